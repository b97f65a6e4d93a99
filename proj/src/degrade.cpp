#include "metasr/degrade.hpp"

#include <cmath>
#include <stdexcept>

namespace metasr {

namespace {

// Symmetric (half-sample) reflection of an index into [0, n).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Keys cubic, a = -0.5.
double keys(double t) {
  t = std::abs(t);
  if (t < 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

struct Taps {
  int lo = 0;
  std::vector<double> w;  // normalized
};

// Contribution weights of input samples for every output position along one
// axis. When shrinking, the kernel is widened by the scale ratio.
std::vector<Taps> cubic_taps(int in_n, int out_n) {
  const double ratio = static_cast<double>(in_n) / out_n;
  const double width = std::max(1.0, ratio);  // antialias on downscale
  std::vector<Taps> taps(static_cast<std::size_t>(out_n));
  for (int i = 0; i < out_n; ++i) {
    const double center = (i + 0.5) * ratio - 0.5;
    const int lo = static_cast<int>(std::ceil(center - 2.0 * width));
    const int hi = static_cast<int>(std::floor(center + 2.0 * width));
    Taps& t = taps[static_cast<std::size_t>(i)];
    t.lo = lo;
    t.w.resize(static_cast<std::size_t>(hi - lo + 1));
    double total = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = keys((j - center) / width);
      t.w[static_cast<std::size_t>(j - lo)] = w;
      total += w;
    }
    for (double& w : t.w) w /= total;
  }
  return taps;
}

}  // namespace

Image blur_reflect(const Image& img, const Kernel& kernel) {
  const int r = kernel.size / 2;
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int p = 0; p < kernel.size; ++p) {
          const int sy = reflect(y + p - r, img.height);
          for (int q = 0; q < kernel.size; ++q) {
            const int sx = reflect(x + q - r, img.width);
            acc += kernel.at(p, q) * img.at(c, sy, sx);
          }
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Image bicubic_resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bicubic_resize: target extents must be positive");
  const auto row_taps = cubic_taps(img.width, out_w);
  // Horizontal pass.
  Image mid(img.channels, img.height, out_w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        const Taps& t = row_taps[static_cast<std::size_t>(x)];
        double acc = 0.0;
        for (std::size_t k = 0; k < t.w.size(); ++k)
          acc += t.w[k] * img.at(c, y, reflect(t.lo + static_cast<int>(k), img.width));
        mid.at(c, y, x) = acc;
      }
  // Vertical pass.
  const auto col_taps = cubic_taps(img.height, out_h);
  Image out(img.channels, out_h, out_w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out_h; ++y) {
      const Taps& t = col_taps[static_cast<std::size_t>(y)];
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.w.size(); ++k)
          acc += t.w[k] * mid.at(c, reflect(t.lo + static_cast<int>(k), img.height), x);
        out.at(c, y, x) = acc;
      }
    }
  return out;
}

Image degrade(const Image& hr, const DegradeSpec& spec, Rng* rng) {
  if (spec.scale < 1) throw std::invalid_argument("degrade: scale must be >= 1");
  if (hr.height % spec.scale != 0 || hr.width % spec.scale != 0)
    throw std::invalid_argument(
        "degrade: image " + std::to_string(hr.width) + "x" + std::to_string(hr.height) +
        " not divisible by scale " + std::to_string(spec.scale));
  if (spec.noise_sigma < 0.0)
    throw std::invalid_argument("degrade: noise_sigma must be >= 0");

  const Image blurred = blur_reflect(hr, spec.kernel);
  const int oh = hr.height / spec.scale;
  const int ow = hr.width / spec.scale;
  Image lr;
  if (spec.mode == SubsampleMode::kDirect) {
    lr = Image(hr.channels, oh, ow);
    for (int c = 0; c < hr.channels; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
          lr.at(c, y, x) = blurred.at(c, y * spec.scale, x * spec.scale);
  } else {
    lr = bicubic_resize(blurred, oh, ow);
  }
  if (spec.noise_sigma > 0.0) {
    if (rng == nullptr)
      throw std::invalid_argument("degrade: noise requested without an rng");
    for (double& v : lr.data) v += spec.noise_sigma * rng->normal();
  }
  return lr;
}

Image make_lr_son(const Image& lr, const Kernel& kernel, int scale,
                  SubsampleMode mode) {
  DegradeSpec spec;
  spec.kernel = kernel;
  spec.scale = scale;
  spec.mode = mode;
  spec.noise_sigma = 0.0;
  return degrade(lr, spec);
}

}  // namespace metasr
