#include "metasr/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace metasr {

std::string to_string(SubsampleMode mode) {
  return mode == SubsampleMode::kDirect ? "direct" : "bicubic";
}

SubsampleMode subsample_mode_from_string(std::string_view s) {
  if (s == "direct") return SubsampleMode::kDirect;
  if (s == "bicubic") return SubsampleMode::kBicubic;
  throw std::invalid_argument("unknown subsample mode '" + std::string(s) +
                              "' (expected direct or bicubic)");
}

Cov2 covariance(double theta, double lambda1, double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw std::invalid_argument("covariance: eigenvalues must be positive");
  // Reduce mod pi so the pi-periodicity holds at the arithmetic level too.
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  const double c = std::cos(t);
  const double s = std::sin(t);
  Cov2 sigma;
  sigma[0][0] = lambda1 * c * c + lambda2 * s * s;
  sigma[1][1] = lambda1 * s * s + lambda2 * c * c;
  sigma[0][1] = sigma[1][0] = (lambda1 - lambda2) * c * s;
  return sigma;
}

KernelSpec sample_kernel_params(int scale, Rng& rng) {
  if (scale < 1) throw std::invalid_argument("sample_kernel_params: scale must be >= 1");
  KernelSpec spec;
  spec.theta = rng.uniform(0.0, std::numbers::pi);
  spec.lambda1 = rng.uniform(1.0, 2.5 * scale);
  spec.lambda2 = rng.uniform(1.0, spec.lambda1);
  spec.size = 15;
  spec.scale = scale;
  return spec;
}

Kernel rasterize(const KernelSpec& spec) {
  if (spec.size < 3 || spec.size % 2 == 0)
    throw std::invalid_argument("rasterize: size must be odd and >= 3");
  const Cov2 sigma = covariance(spec.theta, spec.lambda1, spec.lambda2);
  const double det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
  // det == l1*l2 up to rounding; the covariance() precondition keeps it
  // positive, this guards against overflow/underflow extremes.
  if (!(det > 1e-12) || !(spec.lambda1 / spec.lambda2 < 1e12))
    throw std::invalid_argument("rasterize: covariance is numerically singular");
  const double inv00 = sigma[1][1] / det;
  const double inv11 = sigma[0][0] / det;
  const double inv01 = -sigma[0][1] / det;

  Kernel k;
  k.size = spec.size;
  k.weights.resize(static_cast<std::size_t>(spec.size) * spec.size);
  const int c = spec.size / 2;
  double total = 0.0;
  for (int i = 0; i < spec.size; ++i) {
    for (int j = 0; j < spec.size; ++j) {
      const double dy = i - c;
      const double dx = j - c;
      // d^T Sigma^-1 d with d = (dx, dy)
      const double q = inv00 * dx * dx + 2.0 * inv01 * dx * dy + inv11 * dy * dy;
      const double w = std::exp(-0.5 * q);
      k.weights[static_cast<std::size_t>(i) * spec.size + j] = w;
      total += w;
    }
  }
  for (double& w : k.weights) w /= total;
  return k;
}

Kernel delta_kernel(int size) {
  if (size < 1 || size % 2 == 0)
    throw std::invalid_argument("delta_kernel: size must be odd and >= 1");
  Kernel k;
  k.size = size;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  k.weights[static_cast<std::size_t>(size / 2) * size + size / 2] = 1.0;
  return k;
}

NamedKernel named_kernel(std::string_view name) {
  NamedKernel nk;
  nk.name = std::string(name);
  if (name == "g_d_0.2") {
    nk.spec = KernelSpec{0.0, 0.2, 0.2, 15, 2};
    nk.mode = SubsampleMode::kDirect;
  } else if (name == "g_d_2.0") {
    nk.spec = KernelSpec{0.0, 2.0, 2.0, 15, 2};
    nk.mode = SubsampleMode::kDirect;
  } else if (name == "g_d_ani") {
    nk.spec = KernelSpec{-0.5, 4.0, 1.0, 15, 2};
    nk.mode = SubsampleMode::kDirect;
  } else if (name == "g_b_1.3") {
    nk.spec = KernelSpec{0.0, 1.3, 1.3, 15, 2};
    nk.mode = SubsampleMode::kBicubic;
  } else {
    throw std::invalid_argument("unknown kernel name '" + std::string(name) +
                                "'; known: g_d_0.2, g_d_2.0, g_d_ani, g_b_1.3");
  }
  return nk;
}

std::vector<std::string> named_kernel_names() {
  return {"g_d_0.2", "g_d_2.0", "g_d_ani", "g_b_1.3"};
}

}  // namespace metasr
