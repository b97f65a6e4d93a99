#include "metasr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace metasr {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

const Shape& Tensor::shape() const { return graph_->node(id_).shape; }

std::span<const double> Tensor::data() const {
  const auto& v = *graph_->node(id_).values;
  return {v.data(), v.size()};
}

double Tensor::scalar() const {
  const auto& v = *graph_->node(id_).values;
  if (v.size() != 1)
    throw std::invalid_argument("scalar() on tensor with " +
                                std::to_string(v.size()) + " elements");
  return v[0];
}

bool Tensor::requires_grad() const { return graph_->node(id_).requires_grad; }

int Graph::emit(Node n) {
  if (!grad_enabled_) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Graph::value(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw std::invalid_argument("value: shape " + shape_str(shape) + " needs " +
                                std::to_string(numel(shape)) + " elements, got " +
                                std::to_string(data.size()));
  Node n;
  n.shape = std::move(shape);
  n.values = std::make_shared<const std::vector<double>>(std::move(data));
  n.requires_grad = requires_grad;
  return Tensor(this, emit(std::move(n)));
}

Tensor Graph::full(const Shape& shape, double fill, bool requires_grad) {
  return value(shape, std::vector<double>(numel(shape), fill), requires_grad);
}

Tensor Graph::scalar_value(double v, bool requires_grad) {
  return value(Shape{}, {v}, requires_grad);
}

Tensor Graph::leaf_shared(Shape shape, std::shared_ptr<const std::vector<double>> data,
                          bool requires_grad) {
  if (numel(shape) != data->size())
    throw std::invalid_argument("leaf_shared: shape/data size mismatch");
  Node n;
  n.shape = std::move(shape);
  n.values = std::move(data);
  n.requires_grad = requires_grad;
  return Tensor(this, emit(std::move(n)));
}

namespace {

Graph* common_graph(Tensor a, Tensor b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("operation on a default-constructed tensor");
  if (a.graph() != b.graph())
    throw std::invalid_argument("operands belong to different graphs");
  return a.graph();
}

void check_same_shape(const char* op, Tensor a, Tensor b) {
  if (!same_shape(a.shape(), b.shape()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Four-way unrolled dot product; a fixed re-association that lets the
// compiler keep vector accumulators.
double dot(const double* __restrict a, const double* __restrict b, int n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc0 += a[i] * b[i];
  return (acc0 + acc1) + (acc2 + acc3);
}

// out (N,O,OH,OW) += cross-correlation of in (N,C,H,W) with w (O,C,KH,KW).
// Padding may be negative (crops); callers guarantee positive output extents.
// Wide outputs stream kernel taps across output rows; narrow outputs (the
// weight-gradient case, where the "kernel" is an activation map) gather dot
// products along the kernel rows instead.
void conv_accumulate(const double* __restrict in, int N, int C, int H, int W,
                     const double* __restrict w, int O, int KH, int KW, int pad_y,
                     int pad_x, double* __restrict out, int OH, int OW) {
  const bool wide = OW >= KW;
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < O; ++o) {
      double* __restrict outp = out + (static_cast<std::size_t>(n) * O + o) * OH * OW;
      for (int c = 0; c < C; ++c) {
        const double* __restrict inp = in + (static_cast<std::size_t>(n) * C + c) * H * W;
        const double* __restrict wp = w + (static_cast<std::size_t>(o) * C + c) * KH * KW;
        if (wide) {
          for (int p = 0; p < KH; ++p) {
            const int y0 = std::max(0, pad_y - p);
            const int y1 = std::min(OH, H + pad_y - p);
            for (int q = 0; q < KW; ++q) {
              const double wv = wp[p * KW + q];
              const int x0 = std::max(0, pad_x - q);
              const int x1 = std::min(OW, W + pad_x - q);
              if (x1 <= x0) continue;
              for (int y = y0; y < y1; ++y) {
                const double* __restrict src =
                    inp + static_cast<std::size_t>(y + p - pad_y) * W + (x0 + q - pad_x);
                double* __restrict dst = outp + static_cast<std::size_t>(y) * OW + x0;
                const int len = x1 - x0;
                for (int x = 0; x < len; ++x) dst[x] += wv * src[x];
              }
            }
          }
        } else {
          for (int y = 0; y < OH; ++y) {
            for (int x = 0; x < OW; ++x) {
              const int p0 = std::max(0, pad_y - y);
              const int p1 = std::min(KH, H + pad_y - y);
              const int q0 = std::max(0, pad_x - x);
              const int q1 = std::min(KW, W + pad_x - x);
              if (p1 <= p0 || q1 <= q0) continue;
              double acc = 0.0;
              for (int p = p0; p < p1; ++p)
                acc += dot(inp + static_cast<std::size_t>(y + p - pad_y) * W +
                               (x + q0 - pad_x),
                           wp + static_cast<std::size_t>(p) * KW + q0, q1 - q0);
              outp[static_cast<std::size_t>(y) * OW + x] += acc;
            }
          }
        }
      }
    }
  }
}

}  // namespace

// All op construction and the backward pass live behind this accessor so the
// node record stays private to the Graph.
struct GraphOps {
  using Op = Graph::Op;
  using Node = Graph::Node;

  static Tensor make(Graph* g, Node n) { return Tensor(g, g->emit(std::move(n))); }

  static const Node& node(Tensor t) { return t.graph()->node(t.id()); }

  static bool any_grad(std::initializer_list<Tensor> ts) {
    for (Tensor t : ts)
      if (t.requires_grad()) return true;
    return false;
  }

  static Tensor binary_elementwise(const char* name, Op op, Tensor a, Tensor b) {
    Graph* g = common_graph(a, b);
    check_same_shape(name, a, b);
    const auto& av = *node(a).values;
    const auto& bv = *node(b).values;
    std::vector<double> out(av.size());
    switch (op) {
      case Op::kAdd:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
        break;
      default:
        throw std::logic_error("binary_elementwise: bad op");
    }
    Node n;
    n.op = op;
    n.shape = a.shape();
    n.inputs = {a.id(), b.id()};
    n.requires_grad = any_grad({a, b});
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(g, std::move(n));
  }

  static Tensor scale(Tensor a, double c) {
    const auto& av = *node(a).values;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    Node n;
    n.op = Op::kScale;
    n.factor = c;
    n.shape = a.shape();
    n.inputs = {a.id()};
    n.requires_grad = a.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(a.graph(), std::move(n));
  }

  static Tensor smul(Tensor a, Tensor s) {
    Graph* g = common_graph(a, s);
    if (s.size() != 1)
      throw std::invalid_argument("smul: scale tensor must have one element, got " +
                                  shape_str(s.shape()));
    const auto& av = *node(a).values;
    const double sv = (*node(s).values)[0];
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
    Node n;
    n.op = Op::kSmul;
    n.shape = a.shape();
    n.inputs = {a.id(), s.id()};
    n.requires_grad = any_grad({a, s});
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(g, std::move(n));
  }

  static Tensor relu(Tensor x) {
    const auto& xv = *node(x).values;
    std::vector<double> out(xv.size());
    auto mask = std::make_shared<std::vector<double>>(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const bool pos = xv[i] > 0.0;  // derivative at 0 is 0
      out[i] = pos ? xv[i] : 0.0;
      (*mask)[i] = pos ? 1.0 : 0.0;
    }
    Node n;
    n.op = Op::kRelu;
    n.shape = x.shape();
    n.inputs = {x.id()};
    n.requires_grad = x.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    n.aux = std::move(mask);
    return make(x.graph(), std::move(n));
  }

  static Tensor sum_all(Tensor x) {
    const auto& xv = *node(x).values;
    double acc = 0.0;
    for (double v : xv) acc += v;
    Node n;
    n.op = Op::kSumAll;
    n.shape = Shape{};
    n.inputs = {x.id()};
    n.requires_grad = x.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::vector<double>{acc});
    return make(x.graph(), std::move(n));
  }

  static Tensor broadcast_all(Tensor s, const Shape& shape) {
    if (s.size() != 1) throw std::invalid_argument("broadcast_all: source not scalar");
    const double sv = (*node(s).values)[0];
    Node n;
    n.op = Op::kBroadcastAll;
    n.shape = shape;
    n.inputs = {s.id()};
    n.requires_grad = s.requires_grad();
    n.values =
        std::make_shared<const std::vector<double>>(std::vector<double>(numel(shape), sv));
    return make(s.graph(), std::move(n));
  }

  static Tensor l1_loss(Tensor pred, Tensor target) {
    Graph* g = common_graph(pred, target);
    check_same_shape("l1_loss", pred, target);
    const auto& pv = *node(pred).values;
    const auto& tv = *node(target).values;
    const double inv_n = 1.0 / static_cast<double>(pv.size());
    auto mask = std::make_shared<std::vector<double>>(pv.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double d = pv[i] - tv[i];
      acc += std::abs(d);
      (*mask)[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    Node n;
    n.op = Op::kL1Loss;
    n.shape = Shape{};
    n.inputs = {pred.id(), target.id()};
    n.requires_grad = any_grad({pred, target});
    n.values =
        std::make_shared<const std::vector<double>>(std::vector<double>{acc * inv_n});
    n.aux = std::move(mask);  // d(mean|p-t|)/dp per element
    return make(g, std::move(n));
  }

  static Tensor conv(Tensor input, Tensor weight, int pad_y, int pad_x) {
    Graph* g = common_graph(input, weight);
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    if (is.size() != 4 || ws.size() != 4)
      throw std::invalid_argument("conv2d: input " + shape_str(is) + " and weight " +
                                  shape_str(ws) + " must be rank 4");
    if (is[1] != ws[1])
      throw std::invalid_argument("conv2d: input channels " + std::to_string(is[1]) +
                                  " != weight in-channels " + std::to_string(ws[1]));
    const int N = is[0], C = is[1], H = is[2], W = is[3];
    const int O = ws[0], KH = ws[2], KW = ws[3];
    const int OH = H + 2 * pad_y - KH + 1;
    const int OW = W + 2 * pad_x - KW + 1;
    if (OH < 1 || OW < 1)
      throw std::invalid_argument("conv2d: kernel " + shape_str(ws) +
                                  " too large for input " + shape_str(is));
    std::vector<double> out(static_cast<std::size_t>(N) * O * OH * OW, 0.0);
    if (KH > H && KW > W) {
      // Kernel spatially larger than the input (second-order weight-grad
      // paths). corr(X, Y, p) equals corr(Y, X, p + H - KH) with batch and
      // out-channel swapped and the output flipped; the swapped form runs
      // through the wide loop.
      std::vector<double> z(out.size(), 0.0);
      conv_accumulate(node(weight).values->data(), O, C, KH, KW,
                      node(input).values->data(), N, H, W, pad_y + H - KH,
                      pad_x + W - KW, z.data(), OH, OW);
      const std::size_t plane = static_cast<std::size_t>(OH) * OW;
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
          const double* zp = z.data() + (static_cast<std::size_t>(o) * N + n) * plane;
          double* op = out.data() + (static_cast<std::size_t>(n) * O + o) * plane;
          for (int y = 0; y < OH; ++y)
            for (int x = 0; x < OW; ++x)
              op[static_cast<std::size_t>(y) * OW + x] =
                  zp[static_cast<std::size_t>(OH - 1 - y) * OW + (OW - 1 - x)];
        }
    } else {
      conv_accumulate(node(input).values->data(), N, C, H, W,
                      node(weight).values->data(), O, KH, KW, pad_y, pad_x, out.data(),
                      OH, OW);
    }
    Node n;
    n.op = Op::kConv;
    n.pad_y = pad_y;
    n.pad_x = pad_x;
    n.shape = {N, O, OH, OW};
    n.inputs = {input.id(), weight.id()};
    n.requires_grad = any_grad({input, weight});
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(g, std::move(n));
  }

  static Tensor add_bias(Tensor x, Tensor b) {
    Graph* g = common_graph(x, b);
    const Shape& xs = x.shape();
    const Shape& bs = b.shape();
    if (xs.size() != 4 || bs.size() != 1 || bs[0] != xs[1])
      throw std::invalid_argument("add_bias: bias " + shape_str(bs) +
                                  " does not match activations " + shape_str(xs));
    const auto& xv = *node(x).values;
    const auto& bv = *node(b).values;
    const int N = xs[0], C = xs[1];
    const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
    std::vector<double> out(xv.size());
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
        const double bc = bv[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) out[base + i] = xv[base + i] + bc;
      }
    Node n;
    n.op = Op::kAddBias;
    n.shape = xs;
    n.inputs = {x.id(), b.id()};
    n.requires_grad = any_grad({x, b});
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(g, std::move(n));
  }

  static Tensor sum_nhw(Tensor x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("sum_nhw: rank 4 required");
    const auto& xv = *node(x).values;
    const int N = xs[0], C = xs[1];
    const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
    std::vector<double> out(static_cast<std::size_t>(C), 0.0);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += xv[base + i];
        out[static_cast<std::size_t>(c)] += acc;
      }
    Node n;
    n.op = Op::kSumNHW;
    n.shape = {C};
    n.inputs = {x.id()};
    n.requires_grad = x.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(x.graph(), std::move(n));
  }

  static Tensor broadcast_nhw(Tensor b, const Shape& target) {
    if (b.shape().size() != 1 || target.size() != 4 || target[1] != b.shape()[0])
      throw std::invalid_argument("broadcast_nhw: bad shapes");
    const auto& bv = *node(b).values;
    const int N = target[0], C = target[1];
    const std::size_t plane = static_cast<std::size_t>(target[2]) * target[3];
    std::vector<double> out(numel(target));
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          out[base + i] = bv[static_cast<std::size_t>(c)];
      }
    Node n;
    n.op = Op::kBroadcastNHW;
    n.shape = target;
    n.inputs = {b.id()};
    n.requires_grad = b.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(b.graph(), std::move(n));
  }

  static Tensor permute01(Tensor x) {
    const Shape& xs = x.shape();
    if (xs.size() < 2) throw std::invalid_argument("permute01: rank >= 2 required");
    const auto& xv = *node(x).values;
    const int A = xs[0], B = xs[1];
    std::size_t inner = 1;
    for (std::size_t i = 2; i < xs.size(); ++i) inner *= static_cast<std::size_t>(xs[i]);
    Shape out_shape = xs;
    std::swap(out_shape[0], out_shape[1]);
    std::vector<double> out(xv.size());
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < B; ++b) {
        const std::size_t src = (static_cast<std::size_t>(a) * B + b) * inner;
        const std::size_t dst = (static_cast<std::size_t>(b) * A + a) * inner;
        std::copy_n(xv.data() + src, inner, out.data() + dst);
      }
    Node n;
    n.op = Op::kPermute01;
    n.shape = std::move(out_shape);
    n.inputs = {x.id()};
    n.requires_grad = x.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(x.graph(), std::move(n));
  }

  static Tensor flip_hw(Tensor x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("flip_hw: rank 4 required");
    const auto& xv = *node(x).values;
    const int H = xs[2], W = xs[3];
    const std::size_t planes = static_cast<std::size_t>(xs[0]) * xs[1];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<double> out(xv.size());
    for (std::size_t p = 0; p < planes; ++p)
      for (int y = 0; y < H; ++y)
        for (int x2 = 0; x2 < W; ++x2)
          out[p * plane + static_cast<std::size_t>(H - 1 - y) * W + (W - 1 - x2)] =
              xv[p * plane + static_cast<std::size_t>(y) * W + x2];
    Node n;
    n.op = Op::kFlipHW;
    n.shape = xs;
    n.inputs = {x.id()};
    n.requires_grad = x.requires_grad();
    n.values = std::make_shared<const std::vector<double>>(std::move(out));
    return make(x.graph(), std::move(n));
  }

  static Tensor detach(Tensor t, bool requires_grad) {
    const Node& n = node(t);
    return t.graph()->leaf_shared(n.shape, n.values, requires_grad);
  }

  static std::vector<Tensor> backward(Tensor loss, std::span<const Tensor> wrt,
                                      bool create_graph);
};

namespace {

// RAII guard for Graph::set_grad_enabled.
class GradMode {
 public:
  GradMode(Graph& g, bool on) : g_(g), prev_(g.grad_enabled()) { g_.set_grad_enabled(on); }
  ~GradMode() { g_.set_grad_enabled(prev_); }

 private:
  Graph& g_;
  bool prev_;
};

}  // namespace

std::vector<Tensor> GraphOps::backward(Tensor loss, std::span<const Tensor> wrt,
                                       bool create_graph) {
  if (!loss.valid()) throw std::invalid_argument("backward: invalid loss tensor");
  Graph* g = loss.graph();
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  for (Tensor t : wrt) {
    if (!t.valid() || t.graph() != g)
      throw std::invalid_argument("backward: wrt tensor not in the loss graph");
    if (t.id() > loss.id())
      throw std::invalid_argument("backward: wrt tensor unreachable from loss");
  }

  const int top = loss.id();
  // Reachability through inputs, for the unreachable-wrt diagnostic.
  std::vector<char> reach(static_cast<std::size_t>(top) + 1, 0);
  reach[static_cast<std::size_t>(top)] = 1;
  for (int id = top; id >= 0; --id) {
    if (!reach[static_cast<std::size_t>(id)]) continue;
    for (int in : g->node(id).inputs) reach[static_cast<std::size_t>(in)] = 1;
  }
  for (Tensor t : wrt)
    if (!reach[static_cast<std::size_t>(t.id())])
      throw std::invalid_argument("backward: wrt tensor unreachable from loss");

  GradMode mode(*g, create_graph);

  std::vector<Tensor> pending(static_cast<std::size_t>(top) + 1);
  pending[static_cast<std::size_t>(top)] = g->full(loss.shape(), 1.0);

  auto accumulate = [&](int id, Tensor grad) {
    auto& slot = pending[static_cast<std::size_t>(id)];
    slot = slot.valid() ? add(slot, grad) : grad;
  };

  for (int id = top; id >= 0; --id) {
    Tensor grad_out = pending[static_cast<std::size_t>(id)];
    if (!grad_out.valid()) continue;
    // Snapshot: accumulate() may reallocate nodes_, but Node copies below
    // are taken before any new node is emitted per case.
    const Node n = g->node(id);
    if (!n.requires_grad || n.op == Op::kLeaf) continue;
    auto in = [&](int k) { return Tensor(g, n.inputs[static_cast<std::size_t>(k)]); };
    auto wants = [&](int k) { return in(k).requires_grad(); };
    switch (n.op) {
      case Op::kAdd:
        if (wants(0)) accumulate(n.inputs[0], grad_out);
        if (wants(1)) accumulate(n.inputs[1], grad_out);
        break;
      case Op::kSub:
        if (wants(0)) accumulate(n.inputs[0], grad_out);
        if (wants(1)) accumulate(n.inputs[1], scale(grad_out, -1.0));
        break;
      case Op::kMul:
        if (wants(0)) accumulate(n.inputs[0], mul(grad_out, in(1)));
        if (wants(1)) accumulate(n.inputs[1], mul(grad_out, in(0)));
        break;
      case Op::kScale:
        if (wants(0)) accumulate(n.inputs[0], scale(grad_out, n.factor));
        break;
      case Op::kSmul:
        if (wants(0)) accumulate(n.inputs[0], smul(grad_out, in(1)));
        if (wants(1)) accumulate(n.inputs[1], sum_all(mul(grad_out, in(0))));
        break;
      case Op::kRelu:
        if (wants(0)) {
          Tensor mask = g->leaf_shared(in(0).shape(), n.aux);
          accumulate(n.inputs[0], mul(grad_out, mask));
        }
        break;
      case Op::kSumAll:
        if (wants(0)) accumulate(n.inputs[0], broadcast_all(grad_out, in(0).shape()));
        break;
      case Op::kBroadcastAll:
        if (wants(0)) accumulate(n.inputs[0], sum_all(grad_out));
        break;
      case Op::kL1Loss: {
        if (wants(0)) {
          Tensor mask = g->leaf_shared(in(0).shape(), n.aux);
          accumulate(n.inputs[0], smul(mask, grad_out));
        }
        if (wants(1)) {
          Tensor mask = scale(g->leaf_shared(in(0).shape(), n.aux), -1.0);
          accumulate(n.inputs[1], smul(mask, grad_out));
        }
        break;
      }
      case Op::kConv: {
        Tensor input = in(0), weight = in(1);
        const int KH = weight.shape()[2], KW = weight.shape()[3];
        if (wants(0)) {
          Tensor wt = permute01(flip_hw(weight));
          accumulate(n.inputs[0],
                     conv(grad_out, wt, KH - 1 - n.pad_y, KW - 1 - n.pad_x));
        }
        if (wants(1)) {
          Tensor gw = conv(permute01(input), permute01(grad_out), n.pad_y, n.pad_x);
          accumulate(n.inputs[1], permute01(gw));
        }
        break;
      }
      case Op::kAddBias:
        if (wants(0)) accumulate(n.inputs[0], grad_out);
        if (wants(1)) accumulate(n.inputs[1], sum_nhw(grad_out));
        break;
      case Op::kSumNHW:
        if (wants(0)) accumulate(n.inputs[0], broadcast_nhw(grad_out, in(0).shape()));
        break;
      case Op::kBroadcastNHW:
        if (wants(0)) accumulate(n.inputs[0], sum_nhw(grad_out));
        break;
      case Op::kPermute01:
        if (wants(0)) accumulate(n.inputs[0], permute01(grad_out));
        break;
      case Op::kFlipHW:
        if (wants(0)) accumulate(n.inputs[0], flip_hw(grad_out));
        break;
      case Op::kLeaf:
        break;
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (Tensor t : wrt) {
    Tensor grad = pending[static_cast<std::size_t>(t.id())];
    if (!grad.valid()) grad = g->full(t.shape(), 0.0);
    out.push_back(create_graph ? grad : detach(grad, false));
  }
  return out;
}

Tensor add(Tensor a, Tensor b) {
  return GraphOps::binary_elementwise("add", GraphOps::Op::kAdd, a, b);
}
Tensor sub(Tensor a, Tensor b) {
  return GraphOps::binary_elementwise("sub", GraphOps::Op::kSub, a, b);
}
Tensor mul(Tensor a, Tensor b) {
  return GraphOps::binary_elementwise("mul", GraphOps::Op::kMul, a, b);
}
Tensor mul_scalar(Tensor a, double c) { return GraphOps::scale(a, c); }
Tensor smul(Tensor a, Tensor s) { return GraphOps::smul(a, s); }
Tensor relu(Tensor x) { return GraphOps::relu(x); }
Tensor sum_all(Tensor x) { return GraphOps::sum_all(x); }
Tensor l1_loss(Tensor pred, Tensor target) { return GraphOps::l1_loss(pred, target); }

Tensor conv2d_nobias(Tensor input, Tensor weight, int padding) {
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  return GraphOps::conv(input, weight, padding, padding);
}

Tensor conv2d(Tensor input, Tensor weight, Tensor bias, int padding) {
  return GraphOps::add_bias(conv2d_nobias(input, weight, padding), bias);
}

Tensor permute01(Tensor x) { return GraphOps::permute01(x); }
Tensor flip_hw(Tensor x) { return GraphOps::flip_hw(x); }
Tensor detach(Tensor t, bool requires_grad) { return GraphOps::detach(t, requires_grad); }

std::vector<Tensor> backward(Tensor loss, std::span<const Tensor> wrt,
                             bool create_graph) {
  return GraphOps::backward(loss, wrt, create_graph);
}

std::vector<Tensor> sgd_update(std::span<const Tensor> params,
                               std::span<const Tensor> grads, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_update: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) + " grads");
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    out.push_back(sub(params[i], mul_scalar(grads[i], lr)));
  return out;
}

HostTensor to_host(Tensor t) {
  auto d = t.data();
  return HostTensor{t.shape(), std::vector<double>(d.begin(), d.end())};
}

AdamState AdamState::for_params(std::span<const HostTensor> params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p.data.size(), 0.0);
    s.v.emplace_back(p.data.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::vector<HostTensor>& params,
               std::span<const HostTensor> grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: param/grad/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& gd = grads[i].data;
    if (gd.size() != p.size())
      throw std::invalid_argument("adam_step: grad " + std::to_string(i) +
                                  " shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gd[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gd[j] * gd[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace metasr
