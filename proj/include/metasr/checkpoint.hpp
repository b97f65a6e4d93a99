#pragma once

#include <string>

#include "metasr/network.hpp"

namespace metasr {

// Binary checkpoint: magic "MZSR", format version u16, architecture
// descriptor, per-tensor shapes, weights as little-endian f32 in layer
// order, trailing CRC32 of everything before it. Compute stays in f64;
// storage quantizes to f32.
void save_checkpoint(const HostParams& params, const std::string& path);
HostParams load_checkpoint(const std::string& path);

}  // namespace metasr
