#pragma once

#include "metasr/image.hpp"
#include "metasr/kernels.hpp"
#include "metasr/rng.hpp"

namespace metasr {

// One degradation condition: blur kernel, integer scale factor, subsampling
// mode and optional white Gaussian noise. Degradation is data synthesis and
// is never differentiated through.
struct DegradeSpec {
  Kernel kernel;
  int scale = 2;
  SubsampleMode mode = SubsampleMode::kDirect;
  double noise_sigma = 0.0;
};

// Convolves each channel with the kernel under symmetric (half-sample
// reflective) boundary handling. Output size equals input size.
Image blur_reflect(const Image& img, const Kernel& kernel);

// Separable Keys cubic (a = -0.5) resampling with kernel-width scaling
// (antialias) when shrinking; symmetric boundary.
Image bicubic_resize(const Image& img, int out_h, int out_w);

// Blur, subsample by spec.scale (direct keeps pixels 0, s, 2s, ...;
// bicubic shrinks by 1/s), then add noise of std spec.noise_sigma.
// Image extents must be divisible by the scale.
Image degrade(const Image& hr, const DegradeSpec& spec, Rng* rng = nullptr);

// The self-supervision input of the meta-test stage: the test image
// degraded once more with its own kernel, noise-free.
Image make_lr_son(const Image& lr, const Kernel& kernel, int scale,
                  SubsampleMode mode);

}  // namespace metasr
