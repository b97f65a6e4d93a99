#pragma once

#include "metasr/image.hpp"

namespace metasr {

// Studio-swing BT.601 luma: Y = 16 + 65.481 R + 128.553 G + 24.966 B with
// RGB clipped to [0,1] first; black maps to 16, white to 235. Accepts a
// single-channel image as already-converted luma.
Image rgb_to_y(const Image& img);

// PSNR between the luma of a and b on the 0..255 scale, after cropping
// `border` pixels from every side. Identical images return +infinity.
double psnr_y(const Image& a, const Image& b, int border = 0);

// Mean local SSIM on luma: 11x11 Gaussian window with sigma 1.5,
// K1 = 0.01, K2 = 0.03, L = 255; windows are evaluated where they fit
// entirely inside the image.
double ssim_y(const Image& a, const Image& b);

}  // namespace metasr
