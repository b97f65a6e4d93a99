#include "metasr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace metasr {

Image rgb_to_y(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3)
    throw std::invalid_argument("rgb_to_y: expected 1 or 3 channels, got " +
                                std::to_string(img.channels));
  Image y(1, img.height, img.width);
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = std::clamp(img.data[i], 0.0, 1.0);
    const double g = std::clamp(img.data[plane + i], 0.0, 1.0);
    const double b = std::clamp(img.data[2 * plane + i], 0.0, 1.0);
    // Grouped around the green channel so neutral grays come out exactly
    // as 16 + 219*v (the coefficients sum to 219).
    y.data[i] = 16.0 + 219.0 * g + 65.481 * (r - g) + 24.966 * (b - g);
  }
  return y;
}

double psnr_y(const Image& a, const Image& b, int border) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("psnr_y: image size mismatch");
  if (border < 0) throw std::invalid_argument("psnr_y: border must be >= 0");
  if (2 * border >= a.height || 2 * border >= a.width)
    throw std::invalid_argument("psnr_y: border crop exceeds image");
  const Image ya = rgb_to_y(a);
  const Image yb = rgb_to_y(b);
  double sq = 0.0;
  std::size_t n = 0;
  for (int y = border; y < a.height - border; ++y)
    for (int x = border; x < a.width - border; ++x) {
      const double d = ya.at(0, y, x) - yb.at(0, y, x);
      sq += d * d;
      ++n;
    }
  const double mse = sq / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim_y(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("ssim_y: image size mismatch");
  constexpr int kWin = 11;
  if (a.height < kWin || a.width < kWin)
    throw std::invalid_argument("ssim_y: image smaller than the 11x11 window");

  const Image ya = rgb_to_y(a);
  const Image yb = rgb_to_y(b);

  double w[kWin][kWin];
  double total = 0.0;
  constexpr double kSigma = 1.5;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - kWin / 2;
      const double dx = j - kWin / 2;
      w[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      total += w[i][j];
    }
  for (auto& row : w)
    for (double& v : row) v /= total;

  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

  double acc = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + kWin <= a.height; ++y)
    for (int x = 0; x + kWin <= a.width; ++x) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          mu_a += w[i][j] * ya.at(0, y + i, x + j);
          mu_b += w[i][j] * yb.at(0, y + i, x + j);
        }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double da = ya.at(0, y + i, x + j) - mu_a;
          const double db = yb.at(0, y + i, x + j) - mu_b;
          var_a += w[i][j] * da * da;
          var_b += w[i][j] * db * db;
          cov += w[i][j] * da * db;
        }
      const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      acc += num / den;
      ++count;
    }
  return acc / static_cast<double>(count);
}

}  // namespace metasr
