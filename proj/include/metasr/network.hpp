#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metasr/tensor.hpp"

namespace metasr {

// Residual CNN: `depth` conv layers of `features` hidden channels with
// relu after every conv except the last, plus a skip connection adding
// the input image to the body output. The input is expected to be the
// bicubic-upscaled LR image, already at target resolution.
struct ArchDescriptor {
  int depth = 8;
  int features = 64;
  int kernel_size = 3;
  int in_channels = 3;
  int out_channels = 3;
};

void validate_arch(const ArchDescriptor& arch);

// Parameters detached from any graph: weight (O,I,k,k) and bias (O) per
// layer, interleaved [w0, b0, w1, b1, ...].
struct HostParams {
  ArchDescriptor arch;
  std::vector<HostTensor> tensors;
};

// The same parameters mounted as nodes of a Graph. Adapted parameters
// produced by inner-loop updates are also of this form.
struct ModelParams {
  ArchDescriptor arch;
  std::vector<Tensor> tensors;
};

// He-scaled random weights, zero biases; deterministic per seed.
HostParams build(const ArchDescriptor& arch, std::uint64_t seed);

ModelParams mount(Graph& g, const HostParams& params, bool requires_grad);
HostParams snapshot(const ModelParams& params);
ModelParams with_tensors(const ModelParams& like, std::vector<Tensor> tensors);

// x is (N,in_channels,H,W); result has the same shape.
Tensor forward(const ModelParams& params, Tensor x);

std::size_t param_count(const ArchDescriptor& arch);
std::size_t param_count(const HostParams& params);

}  // namespace metasr
