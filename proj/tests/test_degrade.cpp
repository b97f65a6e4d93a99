#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "metasr/degrade.hpp"
#include "support.hpp"

using namespace metasr;

namespace {

int reflect_idx(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Brute-force blur + stride subsampling, the oracle for degrade(direct).
Image degrade_direct_oracle(const Image& hr, const Kernel& k, int s) {
  const int r = k.size / 2;
  Image out(hr.channels, hr.height / s, hr.width / s);
  for (int c = 0; c < hr.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        double acc = 0.0;
        for (int p = 0; p < k.size; ++p)
          for (int q = 0; q < k.size; ++q)
            acc += k.at(p, q) * hr.at(c, reflect_idx(y * s + p - r, hr.height),
                                      reflect_idx(x * s + q - r, hr.width));
        out.at(c, y, x) = acc;
      }
  return out;
}

double keys_ref(double t) {
  t = std::abs(t);
  if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

// Direct full 2-d summation resampler; independent of the separable path.
Image bicubic_oracle(const Image& in, int oh, int ow) {
  const double ry = static_cast<double>(in.height) / oh;
  const double rx = static_cast<double>(in.width) / ow;
  const double wy = std::max(1.0, ry);
  const double wx = std::max(1.0, rx);
  Image out(in.channels, oh, ow);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double cy = (y + 0.5) * ry - 0.5;
        const double cx = (x + 0.5) * rx - 0.5;
        double acc = 0.0, norm = 0.0;
        for (int j = static_cast<int>(std::ceil(cy - 2 * wy));
             j <= static_cast<int>(std::floor(cy + 2 * wy)); ++j)
          for (int i = static_cast<int>(std::ceil(cx - 2 * wx));
               i <= static_cast<int>(std::floor(cx + 2 * wx)); ++i) {
            const double w = keys_ref((j - cy) / wy) * keys_ref((i - cx) / wx);
            acc += w * in.at(c, reflect_idx(j, in.height), reflect_idx(i, in.width));
            norm += w;
          }
        out.at(c, y, x) = acc / norm;
      }
  return out;
}

Image random_image(std::uint64_t seed, int c, int h, int w) {
  Rng rng(seed);
  Image img(c, h, w);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("degrade: delta kernel at scale 1 is the identity") {
  Image img = random_image(1, 3, 6, 6);
  DegradeSpec spec{delta_kernel(3), 1, SubsampleMode::kDirect, 0.0};
  Image out = degrade(img, spec);
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(out.data[i] == img.data[i]);
}

TEST_CASE("degrade: constant image stays constant (kernel sums to 1)") {
  Image img(3, 8, 8, 0.37);
  const Kernel k = rasterize(KernelSpec{0.4, 2.0, 1.0, 15, 2});
  for (auto mode : {SubsampleMode::kDirect, SubsampleMode::kBicubic}) {
    Image out = degrade(img, DegradeSpec{k, 2, mode, 0.0});
    CHECK(out.height == 4);
    CHECK(out.width == 4);
    for (double v : out.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
  }
}

TEST_CASE("degrade: matches the brute-force blur + stride oracle") {
  // 4x4 ramp, 3x3 uniform kernel, s = 2
  Image ramp(1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp.at(0, y, x) = y * 4 + x;
  Kernel uniform;
  uniform.size = 3;
  uniform.weights.assign(9, 1.0 / 9.0);
  Image out = degrade(ramp, DegradeSpec{uniform, 2, SubsampleMode::kDirect, 0.0});
  Image expect = degrade_direct_oracle(ramp, uniform, 2);
  REQUIRE(out.data.size() == expect.data.size());
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(std::abs(out.data[i] - expect.data[i]) < 1e-12);

  // and on a random image with a sampled kernel
  Image img = random_image(2, 3, 12, 12);
  Rng rng(3);
  const Kernel k = rasterize(sample_kernel_params(2, rng));
  Image o2 = degrade(img, DegradeSpec{k, 2, SubsampleMode::kDirect, 0.0});
  Image e2 = degrade_direct_oracle(img, k, 2);
  for (std::size_t i = 0; i < o2.data.size(); ++i)
    CHECK(std::abs(o2.data[i] - e2.data[i]) < 1e-12);
}

TEST_CASE("degrade: rejects non-divisible extents and bad specs") {
  Image img = random_image(4, 3, 9, 8);
  CHECK_THROWS_AS(degrade(img, DegradeSpec{delta_kernel(), 2, SubsampleMode::kDirect, 0.0}),
                  std::invalid_argument);
  Image ok = random_image(5, 3, 8, 8);
  CHECK_THROWS_AS(degrade(ok, DegradeSpec{delta_kernel(), 2, SubsampleMode::kDirect, -0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(degrade(ok, DegradeSpec{delta_kernel(), 2, SubsampleMode::kDirect, 0.1}),
                  std::invalid_argument);  // noise without rng
}

TEST_CASE("bicubic_resize: constant preserved, same-size identity") {
  Image img(3, 7, 9, 0.61);
  Image up = bicubic_resize(img, 14, 18);
  for (double v : up.data) CHECK(v == doctest::Approx(0.61).epsilon(1e-12));

  Image rnd = random_image(6, 3, 7, 9);
  Image same = bicubic_resize(rnd, 7, 9);
  for (std::size_t i = 0; i < rnd.data.size(); ++i)
    CHECK(std::abs(same.data[i] - rnd.data[i]) < 1e-12);

  CHECK_THROWS_AS(bicubic_resize(rnd, 0, 9), std::invalid_argument);
}

TEST_CASE("bicubic_resize: matches the direct-summation oracle") {
  Image img = random_image(7, 3, 8, 8);
  SUBCASE("downscale with antialias") {
    Image out = bicubic_resize(img, 4, 4);
    Image expect = bicubic_oracle(img, 4, 4);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      CHECK(std::abs(out.data[i] - expect.data[i]) < 1e-9);
  }
  SUBCASE("upscale") {
    Image out = bicubic_resize(img, 20, 12);
    Image expect = bicubic_oracle(img, 20, 12);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      CHECK(std::abs(out.data[i] - expect.data[i]) < 1e-9);
  }
  SUBCASE("non-uniform aspect") {
    Image out = bicubic_resize(img, 3, 17);
    Image expect = bicubic_oracle(img, 3, 17);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      CHECK(std::abs(out.data[i] - expect.data[i]) < 1e-9);
  }
}

TEST_CASE("make_lr_son: shape contract and equivalence with degrade") {
  Image lr = random_image(8, 3, 64, 64);
  Rng rng(9);
  const Kernel k = rasterize(sample_kernel_params(2, rng));
  Image son = make_lr_son(lr, k, 2, SubsampleMode::kDirect);
  CHECK(son.height == 32);
  CHECK(son.width == 32);

  Image direct = degrade(lr, DegradeSpec{k, 2, SubsampleMode::kDirect, 0.0});
  for (std::size_t i = 0; i < son.data.size(); ++i) CHECK(son.data[i] == direct.data[i]);

  // delta kernel, direct: son[i,j] = lr[2i,2j]
  Image strided = make_lr_son(lr, delta_kernel(), 2, SubsampleMode::kDirect);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) CHECK(strided.at(c, y, x) == lr.at(c, 2 * y, 2 * x));
}

TEST_CASE("degrade: linear in the image for sigma = 0") {
  Image a = random_image(10, 3, 8, 8);
  Image b = random_image(11, 3, 8, 8);
  Rng rng(12);
  const Kernel k = rasterize(sample_kernel_params(2, rng));
  const double ca = 0.7, cb = -0.4;
  for (auto mode : {SubsampleMode::kDirect, SubsampleMode::kBicubic}) {
    DegradeSpec spec{k, 2, mode, 0.0};
    Image mix(3, 8, 8);
    for (std::size_t i = 0; i < mix.data.size(); ++i)
      mix.data[i] = ca * a.data[i] + cb * b.data[i];
    Image lhs = degrade(mix, spec);
    Image da = degrade(a, spec);
    Image db = degrade(b, spec);
    for (std::size_t i = 0; i < lhs.data.size(); ++i)
      CHECK(std::abs(lhs.data[i] - (ca * da.data[i] + cb * db.data[i])) < 1e-10);
  }
}

TEST_CASE("degrade: range preservation") {
  Image img = random_image(13, 3, 16, 16);
  const double lo = *std::min_element(img.data.begin(), img.data.end());
  const double hi = *std::max_element(img.data.begin(), img.data.end());
  Rng rng(14);
  const Kernel k = rasterize(sample_kernel_params(2, rng));

  // direct: convex-combination blur keeps values inside [lo, hi]
  Image d = degrade(img, DegradeSpec{k, 2, SubsampleMode::kDirect, 0.0});
  for (double v : d.data) {
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
  // bicubic: cubic interpolation may overshoot by a bounded fraction
  Image b = degrade(img, DegradeSpec{k, 2, SubsampleMode::kBicubic, 0.0});
  const double slack = 0.08 * (hi - lo);
  for (double v : b.data) {
    CHECK(v >= lo - slack);
    CHECK(v <= hi + slack);
  }
}

TEST_CASE("degrade: noise statistics") {
  Image img = random_image(15, 3, 184, 184);  // ~1e5 pixels
  const double sigma = 0.05;
  DegradeSpec clean{delta_kernel(), 1, SubsampleMode::kDirect, 0.0};
  DegradeSpec noisy{delta_kernel(), 1, SubsampleMode::kDirect, sigma};
  Rng rng(16);
  Image with = degrade(img, noisy, &rng);
  Image without = degrade(img, clean);

  const std::size_t n = with.data.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += with.data[i] - without.data[i];
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));

  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = with.data[i] - without.data[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  CHECK(std::sqrt(var) == doctest::Approx(sigma).epsilon(0.05));
}
