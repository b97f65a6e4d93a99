#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace metasr {

// Extents of an n-dimensional array. Empty shape denotes a scalar.
using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

class Graph;

// Handle to one node of a Graph. Values are immutable: every operation
// creates a new node, and updates (e.g. a gradient-descent step) produce
// fresh tensors.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  std::span<const double> data() const;
  double scalar() const;  // value of a one-element tensor
  bool requires_grad() const;
  std::size_t size() const { return numel(shape()); }

  int id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  friend struct GraphOps;
  Tensor(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Plain tensor storage detached from any graph; used for parameters that
// persist across training iterations and for checkpoints.
struct HostTensor {
  Shape shape;
  std::vector<double> data;
};

// Append-only record of a differentiable computation. Values are computed
// eagerly at node creation. backward() replays the record in reverse and
// builds each vector-Jacobian product out of the same op set, so the
// returned gradients are themselves graph nodes; running backward on a
// function of those nodes yields second derivatives.
//
// A Graph is single-threaded. Independent graphs may live on different
// threads.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor value(Shape shape, std::vector<double> data, bool requires_grad = false);
  Tensor full(const Shape& shape, double fill, bool requires_grad = false);
  Tensor scalar_value(double v, bool requires_grad = false);
  // Leaf sharing existing storage (no copy).
  Tensor leaf_shared(Shape shape, std::shared_ptr<const std::vector<double>> data,
                     bool requires_grad = false);

  std::size_t node_count() const { return nodes_.size(); }

  // When disabled, newly created nodes are treated as constants; backward
  // uses this to avoid recording a differentiable trace when the caller
  // does not ask for one.
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kScale,         // multiply by compile-time constant factor
    kSmul,          // multiply by a scalar tensor
    kRelu,
    kSumAll,
    kBroadcastAll,  // scalar -> arbitrary shape
    kL1Loss,
    kConv,          // 2-d cross-correlation, no bias
    kAddBias,       // NCHW + per-channel bias
    kSumNHW,        // NCHW -> C
    kBroadcastNHW,  // C -> NCHW
    kPermute01,     // swap the two leading dims
    kFlipHW,        // reverse both spatial dims of an NCHW tensor
  };

  struct Node {
    Op op = Op::kLeaf;
    bool requires_grad = false;
    int pad_y = 0, pad_x = 0;  // kConv
    double factor = 0.0;       // kScale
    Shape shape;
    std::vector<int> inputs;
    std::shared_ptr<const std::vector<double>> values;
    std::shared_ptr<const std::vector<double>> aux;  // relu step mask, l1 sign mask
  };

  int emit(Node n);
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;

  friend class Tensor;
  friend struct GraphOps;
};

// Elementwise ops; operands must live in the same graph and share shape
// where two tensors are involved.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor mul_scalar(Tensor a, double c);
Tensor smul(Tensor a, Tensor s);  // scale by a one-element tensor
Tensor relu(Tensor x);

Tensor sum_all(Tensor x);  // scalar sum of all elements

// Mean absolute difference over all elements. Subgradient at ties is 0.
Tensor l1_loss(Tensor pred, Tensor target);

// 2-d cross-correlation with zero padding and stride 1.
// input (N,C,H,W), weight (O,C,kh,kw), bias (O); output
// (N,O,H+2p-kh+1,W+2p-kw+1). Differentiable w.r.t. all tensor inputs.
Tensor conv2d(Tensor input, Tensor weight, Tensor bias, int padding);
Tensor conv2d_nobias(Tensor input, Tensor weight, int padding);

Tensor permute01(Tensor x);  // swap the two leading dims
Tensor flip_hw(Tensor x);    // reverse both spatial dims (rank 4)

// Leaf copy of t sharing its storage; cuts the tensor out of the
// differentiable trace.
Tensor detach(Tensor t, bool requires_grad = false);

// Reverse-mode gradients of a scalar loss w.r.t. the given tensors.
// With create_graph the results stay connected to the trace and can be
// differentiated again; otherwise they are returned as detached leaves.
// Every wrt tensor must be reachable from the loss.
std::vector<Tensor> backward(Tensor loss, std::span<const Tensor> wrt,
                             bool create_graph = false);

// One functional gradient-descent step: returns new parameter nodes
// p - lr*g without touching the inputs, so later losses can still be
// differentiated w.r.t. the pre-update parameters.
std::vector<Tensor> sgd_update(std::span<const Tensor> params,
                               std::span<const Tensor> grads, double lr);

HostTensor to_host(Tensor t);

// Bias-corrected Adam. Used by the outer training loops only; the update
// is never differentiated through.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(std::span<const HostTensor> params);
};

void adam_step(AdamState& state, std::vector<HostTensor>& params,
               std::span<const HostTensor> grads, double lr);

}  // namespace metasr
