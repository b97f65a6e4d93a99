#include "metasr/image.hpp"

#include <stdexcept>

namespace metasr {

Tensor image_to_tensor(Graph& g, const Image& img) {
  return g.value({1, img.channels, img.height, img.width}, img.data);
}

Image tensor_to_image(Tensor t) {
  const Shape& s = t.shape();
  if (s.size() != 4 || s[0] != 1)
    throw std::invalid_argument("tensor_to_image: expected (1,C,H,W), got " +
                                shape_str(s));
  Image img(s[1], s[2], s[3]);
  auto d = t.data();
  img.data.assign(d.begin(), d.end());
  return img;
}

Tensor stack_images(Graph& g, const std::vector<Image>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("stack_images: empty batch");
  const Image& first = imgs.front();
  std::vector<double> data;
  data.reserve(imgs.size() * first.size());
  for (const Image& im : imgs) {
    if (im.channels != first.channels || im.height != first.height ||
        im.width != first.width)
      throw std::invalid_argument("stack_images: mixed image sizes");
    data.insert(data.end(), im.data.begin(), im.data.end());
  }
  return g.value({static_cast<int>(imgs.size()), first.channels, first.height,
                  first.width},
                 std::move(data));
}

}  // namespace metasr
