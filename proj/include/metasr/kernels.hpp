#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "metasr/rng.hpp"

namespace metasr {

// How the blurred image is brought down to LR size.
enum class SubsampleMode { kDirect, kBicubic };

std::string to_string(SubsampleMode mode);
SubsampleMode subsample_mode_from_string(std::string_view s);

using Cov2 = std::array<std::array<double, 2>, 2>;

// Anisotropic Gaussian parameterized by a rotation angle and the two
// covariance eigenvalues, plus the rasterization grid size and the
// scale factor the kernel was drawn for.
struct KernelSpec {
  double theta = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int size = 15;
  int scale = 2;
};

// Rasterized, normalized blur kernel (size x size, row-major, sums to 1).
struct Kernel {
  int size = 0;
  std::vector<double> weights;

  double at(int i, int j) const {
    return weights[static_cast<std::size_t>(i) * size + j];
  }
};

// Sigma = R(theta) diag(l1, l2) R(theta)^T. The angle is reduced mod pi
// (the matrix is pi-periodic), so theta and theta+pi agree up to the
// rounding of the reduction.
Cov2 covariance(double theta, double lambda1, double lambda2);

// Draws theta ~ U[0,pi], lambda1 ~ U[1, 2.5*s], lambda2 ~ U[1, lambda1].
KernelSpec sample_kernel_params(int scale, Rng& rng);

// Gaussian density of the spec's covariance evaluated on the centered
// integer grid, truncated and renormalized to sum 1.
Kernel rasterize(const KernelSpec& spec);

// Identity kernel (single unit tap when size==1).
Kernel delta_kernel(int size = 1);

struct NamedKernel {
  std::string name;
  KernelSpec spec;
  SubsampleMode mode = SubsampleMode::kDirect;
};

// Fixed evaluation kernels: g_d_0.2, g_d_2.0, g_d_ani, g_b_1.3.
NamedKernel named_kernel(std::string_view name);
std::vector<std::string> named_kernel_names();

}  // namespace metasr
