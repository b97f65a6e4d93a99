#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metasr/degrade.hpp"
#include "metasr/image.hpp"
#include "metasr/network.hpp"

namespace metasr {

struct AdaptResult {
  Image sr;
  std::vector<double> losses;  // self-supervision loss before each update
  HostParams params;           // parameters after the last update
};

// Meta-test: self-supervised adaptation on the single (LR son, LR) pair
// followed by one feed-forward pass on the bicubic-upscaled input.
// Optimized with plain gradient descent at rate alpha; n may be 0.
AdaptResult meta_test(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                      int scale, const HostParams& theta_m, int steps, double alpha);

// The same self-supervision loop started from a random initialization and
// optimized with Adam; the comparison condition for internal learning only.
AdaptResult zssr_baseline(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                          int scale, const ArchDescriptor& arch, int steps,
                          double adam_lr, std::uint64_t seed);

// Adaptation from given parameters with Adam (fine-tuning baseline).
AdaptResult adam_adapt(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                       int scale, const HostParams& theta, int steps, double adam_lr);

// Runs meta_test once per probe kernel against the LR image obtained by
// degrading hr with true_kernel; returns the Y-PSNR (border = scale) of
// each probe's result, in probe order.
std::vector<double> mismatch_probe(const Image& hr, const Kernel& true_kernel,
                                   std::span<const Kernel> probes, SubsampleMode mode,
                                   int scale, const HostParams& theta_m, int steps,
                                   double alpha);

}  // namespace metasr
