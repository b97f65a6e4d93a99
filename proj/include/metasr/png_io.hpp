#pragma once

#include <string>

#include "metasr/image.hpp"

namespace metasr {

// Reads an 8-bit PNG as an RGB image in [0,1] (values byte/255).
// Grayscale is replicated to three channels; alpha is dropped; 16-bit
// files are rejected.
Image read_png(const std::string& path);

// Writes a 1- or 3-channel image as an 8-bit PNG, clipping to [0,1] and
// rounding to the nearest byte.
void write_png(const Image& img, const std::string& path);

}  // namespace metasr
