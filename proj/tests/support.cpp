#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "metasr/degrade.hpp"
#include "metasr/kernels.hpp"

namespace metasr::test {

namespace {

std::vector<Tensor> mount_all(Graph& g, const std::vector<HostTensor>& inputs,
                              bool requires_grad) {
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) out.push_back(g.value(t.shape, t.data, requires_grad));
  return out;
}

}  // namespace

double eval_loss(const std::vector<HostTensor>& inputs, const BuildLoss& fn) {
  Graph g;
  // requires_grad stays on: losses that unroll an inner gradient step need
  // the trace even for a plain value evaluation.
  auto leaves = mount_all(g, inputs, true);
  return fn(g, leaves).scalar();
}

double fd_max_rel_error(const std::vector<HostTensor>& inputs, const BuildLoss& fn,
                        double step) {
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    auto leaves = mount_all(g, inputs, true);
    Tensor loss = fn(g, leaves);
    auto grads = backward(loss, leaves, false);
    for (Tensor t : grads) {
      auto d = t.data();
      analytic.emplace_back(d.begin(), d.end());
    }
  }
  double worst = 0.0;
  std::vector<HostTensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double saved = work[i].data[j];
      work[i].data[j] = saved + step;
      const double up = eval_loss(work, fn);
      work[i].data[j] = saved - step;
      const double down = eval_loss(work, fn);
      work[i].data[j] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[i][j];
      const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

HostTensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  HostTensor t;
  t.shape = shape;
  t.data.resize(numel(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Image synthetic_image(std::uint64_t seed, int height, int width) {
  Rng rng = Rng::stream(seed, 0x51e7);
  Image img(3, height, width);

  // Smooth two-tone background.
  double base[3], tilt[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.25, 0.75);
    tilt[c] = rng.uniform(-0.3, 0.3);
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(c, y, x) = base[c] + tilt[c] * (static_cast<double>(x + y) / (height + width));

  // Oriented sinusoid texture bands.
  const int waves = 2 + rng.uniform_int(0, 2);
  for (int k = 0; k < waves; ++k) {
    const double angle = rng.uniform(0.0, 3.14159265358979);
    const double freq = rng.uniform(0.15, 0.6);
    const double phase = rng.uniform(0.0, 6.28);
    const double amp = rng.uniform(0.05, 0.15);
    const double cs = std::cos(angle), sn = std::sin(angle);
    const int c = rng.uniform_int(0, 2);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(c, y, x) += amp * std::sin(freq * (cs * x + sn * y) + phase);
  }

  // Hard-edged rectangles and disks.
  const int shapes = 4 + rng.uniform_int(0, 4);
  for (int k = 0; k < shapes; ++k) {
    const bool disk = rng.uniform() < 0.5;
    const int cy = rng.uniform_int(0, height - 1);
    const int cx = rng.uniform_int(0, width - 1);
    const int ry = rng.uniform_int(3, std::max(4, height / 5));
    const int rx = rng.uniform_int(3, std::max(4, width / 5));
    double color[3];
    for (double& v : color) v = rng.uniform(0.0, 1.0);
    for (int y = std::max(0, cy - ry); y < std::min(height, cy + ry); ++y)
      for (int x = std::max(0, cx - rx); x < std::min(width, cx + rx); ++x) {
        if (disk) {
          const double dy = static_cast<double>(y - cy) / ry;
          const double dx = static_cast<double>(x - cx) / rx;
          if (dy * dy + dx * dx > 1.0) continue;
        }
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = 0.3 * img.at(c, y, x) + 0.7 * color[c];
      }
  }

  // Light blur keeps the content roughly band-limited, then clip.
  img = blur_reflect(img, rasterize(KernelSpec{0.0, 0.35, 0.35, 5, 1}));
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image tiled_texture_image(std::uint64_t seed, int tile, int reps_y, int reps_x) {
  Rng rng = Rng::stream(seed, 0x7117);
  // Large crisp-edged shapes: their edges look alike across scales, which
  // is what single-image self-supervision can exploit.
  Image one(3, tile, tile);
  const double bg[3] = {rng.uniform(0.3, 0.45), rng.uniform(0.3, 0.45),
                        rng.uniform(0.25, 0.4)};
  for (int y = 0; y < tile; ++y)
    for (int x = 0; x < tile; ++x) {
      for (int c = 0; c < 3; ++c) one.at(c, y, x) = bg[c];
      const double dy = y - tile * 0.5, dx = x - tile * 0.5;
      if (dy * dy + dx * dx < tile * tile * 0.09) {
        one.at(0, y, x) = 0.95;
        one.at(1, y, x) = 0.8;
        one.at(2, y, x) = 0.15;
      }
      if (x + y < tile * 0.45) {
        one.at(0, y, x) = 0.1;
        one.at(1, y, x) = 0.25;
        one.at(2, y, x) = 0.8;
      }
      if (x > tile * 0.8) {
        one.at(0, y, x) = 0.85;
        one.at(1, y, x) = 0.15;
        one.at(2, y, x) = 0.25;
      }
    }
  Image img(3, tile * reps_y, tile * reps_x);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        img.at(c, y, x) = one.at(c, y % tile, x % tile);
  return img;
}

}  // namespace metasr::test
