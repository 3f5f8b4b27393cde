#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "laud/metrics.hpp"
#include "testutil.hpp"

using laud::Shape;
using laud::SplitMix64;
using laud::Tensor;

namespace {

Tensor solid_rgb(double r, double g, double b, int64_t hw = 16) {
  Tensor t = Tensor::zeros(Shape{1, 3, hw, hw});
  auto d = t.mutable_data();
  const int64_t plane = hw * hw;
  for (int64_t i = 0; i < plane; ++i) {
    d[static_cast<size_t>(i)] = r;
    d[static_cast<size_t>(plane + i)] = g;
    d[static_cast<size_t>(2 * plane + i)] = b;
  }
  return t;
}

}  // namespace

TEST_CASE("BT.601 luma endpoints and mid-gray") {
  Tensor black = laud::rgb_to_y(solid_rgb(0, 0, 0));
  CHECK(black.data()[0] == doctest::Approx(16.0));

  Tensor white = laud::rgb_to_y(solid_rgb(255, 255, 255));
  CHECK(white.data()[0] == doctest::Approx(235.0).epsilon(1e-4));

  Tensor gray = laud::rgb_to_y(solid_rgb(128, 128, 128));
  // 16 + (65.481 + 128.553 + 24.966) * 128 / 255
  CHECK(gray.data()[0] == doctest::Approx(125.929).epsilon(1e-5));

  Tensor two_ch = Tensor::zeros(Shape{1, 2, 4, 4});
  CHECK_THROWS_AS(laud::rgb_to_y(two_ch), laud::DimensionError);
}

TEST_CASE("PSNR sentinel and closed-form value for unit error") {
  Tensor a = Tensor::full(Shape{1, 1, 16, 16}, 100.0);
  CHECK(std::isinf(laud::psnr_y(a, a, 2)));

  Tensor b = Tensor::full(Shape{1, 1, 16, 16}, 101.0);  // MSE = 1
  CHECK(laud::psnr_y(a, b, 2) ==
        doctest::Approx(10.0 * std::log10(65025.0)).epsilon(1e-9));
  CHECK(laud::psnr_y(a, b, 2) == doctest::Approx(48.1308).epsilon(1e-4));
}

TEST_CASE("PSNR border crop and validation") {
  Tensor a = Tensor::full(Shape{1, 1, 16, 16}, 50.0);
  Tensor b = a.detach();
  // Corrupt only the border ring; a 1-pixel crop must ignore it.
  auto d = b.mutable_data();
  for (int64_t x = 0; x < 16; ++x) {
    d[static_cast<size_t>(x)] = 0;
    d[static_cast<size_t>(15 * 16 + x)] = 0;
    d[static_cast<size_t>(x * 16)] = 0;
    d[static_cast<size_t>(x * 16 + 15)] = 0;
  }
  CHECK(std::isfinite(laud::psnr_y(a, b, 0)));
  CHECK(std::isinf(laud::psnr_y(a, b, 1)));

  CHECK_THROWS_AS(laud::psnr_y(a, b, 8), laud::DimensionError);
  Tensor small = Tensor::zeros(Shape{1, 1, 8, 8});
  CHECK_THROWS_AS(laud::psnr_y(a, small, 0), laud::DimensionError);
}

TEST_CASE("PSNR is translation consistent") {
  Tensor a = laud::rgb_to_y(solid_rgb(90, 120, 70, 24));
  Tensor b = laud::rgb_to_y(solid_rgb(95, 118, 77, 24));
  const double base = laud::psnr_y(a, b, 2);
  auto shift = [](const Tensor& t, double delta) {
    std::vector<double> v(t.data().begin(), t.data().end());
    for (double& x : v) x += delta;
    return Tensor::from_data(t.shape(), std::move(v));
  };
  CHECK(laud::psnr_y(shift(a, 10), shift(b, 10), 2) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("SSIM identity, symmetry and anticorrelation") {
  Tensor img = testutil::synthetic_image(5150, 48, 48);
  Tensor y = laud::rgb_to_y(laud::quantize_255(img));
  CHECK(laud::ssim_y(y, y, 0) == doctest::Approx(1.0));

  Tensor other = testutil::synthetic_image(5151, 48, 48);
  Tensor y2 = laud::rgb_to_y(laud::quantize_255(other));
  CHECK(laud::ssim_y(y, y2, 2) == doctest::Approx(laud::ssim_y(y2, y, 2)));

  // Photographic negative: structure anticorrelates, SSIM goes negative.
  std::vector<double> inv(y.data().begin(), y.data().end());
  for (double& v : inv) v = 255.0 - v;
  Tensor yneg = Tensor::from_data(y.shape(), std::move(inv));
  CHECK(laud::ssim_y(y, yneg, 0) < 0.0);

  Tensor tiny = Tensor::zeros(Shape{1, 1, 10, 10});
  CHECK_THROWS_AS(laud::ssim_y(tiny, tiny, 0), laud::DimensionError);
}

TEST_CASE("blending SR toward HR strictly increases PSNR") {
  Tensor hr = testutil::synthetic_image(61, 32, 32);
  Tensor sr = testutil::synthetic_image(62, 32, 32);
  double prev = -1.0;
  for (double alpha : {0.0, 0.3, 0.6, 0.9}) {
    std::vector<double> mix(static_cast<size_t>(hr.numel()));
    for (size_t i = 0; i < mix.size(); ++i)
      mix[i] = alpha * hr.data()[i] + (1.0 - alpha) * sr.data()[i];
    const double p = laud::psnr(Tensor::from_data(hr.shape(), std::move(mix)),
                                hr, 2, /*round_to_8bit=*/false);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("metric report aggregates arithmetic means") {
  laud::MetricReport report;
  report.per_image = {{"a.png", 30.0, 0.9}, {"b.png", 34.0, 0.8}};
  report.finalize();
  CHECK(report.mean_psnr == doctest::Approx(32.0));
  CHECK(report.mean_ssim == doctest::Approx(0.85));
  const std::string text = report.to_text();
  CHECK(text.find("a.png") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);
}
