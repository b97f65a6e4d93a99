#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metasr/image.hpp"
#include "metasr/rng.hpp"
#include "metasr/tensor.hpp"

namespace metasr::test {

// Builds a scalar loss from mounted leaf tensors. Used both for analytic
// gradients and for the finite-difference oracle, which re-evaluates the
// whole build at perturbed leaf values.
using BuildLoss = std::function<Tensor(Graph&, std::span<const Tensor>)>;

double eval_loss(const std::vector<HostTensor>& inputs, const BuildLoss& fn);

// Central finite differences against backward(); returns the largest
// guarded relative error over all input elements.
double fd_max_rel_error(const std::vector<HostTensor>& inputs, const BuildLoss& fn,
                        double step = 1e-5);

HostTensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

// Structured random test image in [0,1]: smooth background, oriented
// sinusoid texture and a few hard-edged shapes.
Image synthetic_image(std::uint64_t seed, int height, int width);

// Tiled random texture with strong cross-patch recurrence.
Image tiled_texture_image(std::uint64_t seed, int tile, int reps_y, int reps_x);

}  // namespace metasr::test
