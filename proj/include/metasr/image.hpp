#pragma once

#include <vector>

#include "metasr/tensor.hpp"

namespace metasr {

// Channel-first (C,H,W) image with double pixels. RGB images live in
// [0,1]; luma images produced by the metrics are on the 0..255 scale.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
};

// Mounts an image as a (1,C,H,W) constant in a graph.
Tensor image_to_tensor(Graph& g, const Image& img);

// Reads a (1,C,H,W) tensor back into an image.
Image tensor_to_image(Tensor t);

// Stacks same-sized images into an (N,C,H,W) constant.
Tensor stack_images(Graph& g, const std::vector<Image>& imgs);

}  // namespace metasr
