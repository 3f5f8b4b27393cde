#include "laud/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace laud {

Tensor rgb_to_y(const Tensor& rgb255) {
  const Shape s = rgb255.shape();
  if (s.c != 3)
    throw DimensionError("rgb_to_y expects 3 channels, got " + s.str());
  const int64_t plane = s.h * s.w;
  std::vector<double> out(static_cast<size_t>(s.b * plane));
  std::span<const double> x = rgb255.data();
  for (int64_t b = 0; b < s.b; ++b) {
    const double* r = x.data() + (b * 3 + 0) * plane;
    const double* g = x.data() + (b * 3 + 1) * plane;
    const double* bl = x.data() + (b * 3 + 2) * plane;
    double* y = out.data() + b * plane;
    for (int64_t i = 0; i < plane; ++i)
      y[i] = 16.0 + (65.481 * r[i] + 128.553 * g[i] + 24.966 * bl[i]) / 255.0;
  }
  return Tensor::from_data(Shape{s.b, 1, s.h, s.w}, std::move(out));
}

Tensor quantize_255(const Tensor& img01) {
  std::span<const double> x = img01.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double v = std::floor(x[i] * 255.0 + 0.5);
    out[i] = std::clamp(v, 0.0, 255.0);
  }
  return Tensor::from_data(img01.shape(), std::move(out));
}

namespace {

void check_metric_inputs(const Tensor& a, const Tensor& b, int border) {
  if (!(a.shape() == b.shape()))
    throw DimensionError("metric shape mismatch: " + a.shape().str() + " vs " +
                         b.shape().str());
  const Shape s = a.shape();
  if (border < 0 || 2 * border >= s.h || 2 * border >= s.w)
    throw DimensionError("border " + std::to_string(border) +
                         " too large for image " + s.str());
}

// Cropped view expressed as copies; metric images are small.
std::vector<double> crop_plane(std::span<const double> x, int64_t h, int64_t w,
                               int border, int64_t& ch, int64_t& cw) {
  ch = h - 2 * border;
  cw = w - 2 * border;
  std::vector<double> out(static_cast<size_t>(ch * cw));
  for (int64_t y = 0; y < ch; ++y)
    for (int64_t xx = 0; xx < cw; ++xx)
      out[static_cast<size_t>(y * cw + xx)] =
          x[static_cast<size_t>((y + border) * w + xx + border)];
  return out;
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size) * size);
  const int half = size / 2;
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dy = y - half, dx = x - half;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w[static_cast<size_t>(y * size + x)] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double psnr_y(const Tensor& y_a, const Tensor& y_b, int border) {
  check_metric_inputs(y_a, y_b, border);
  const Shape s = y_a.shape();
  std::span<const double> xa = y_a.data(), xb = y_b.data();
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
    const double* pa = xa.data() + bc * s.h * s.w;
    const double* pb = xb.data() + bc * s.h * s.w;
    for (int64_t y = border; y < s.h - border; ++y)
      for (int64_t x = border; x < s.w - border; ++x) {
        const double d = pa[y * s.w + x] - pb[y * s.w + x];
        acc += d * d;
        ++count;
      }
  }
  const double mse = acc / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim_y(const Tensor& y_a, const Tensor& y_b, int border) {
  check_metric_inputs(y_a, y_b, border);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const Shape s = y_a.shape();
  if (s.h - 2 * border < kWin || s.w - 2 * border < kWin)
    throw DimensionError("image " + s.str() + " smaller than the " +
                         std::to_string(kWin) + "x" + std::to_string(kWin) +
                         " SSIM window after crop");
  static const std::vector<double> win = gaussian_window(kWin, kSigma);

  double total = 0.0;
  int64_t count = 0;
  for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
    int64_t ch = 0, cw = 0;
    auto pa = crop_plane(
        std::span<const double>(y_a.data().data() + bc * s.h * s.w,
                                static_cast<size_t>(s.h * s.w)),
        s.h, s.w, border, ch, cw);
    auto pb = crop_plane(
        std::span<const double>(y_b.data().data() + bc * s.h * s.w,
                                static_cast<size_t>(s.h * s.w)),
        s.h, s.w, border, ch, cw);
    for (int64_t oy = 0; oy + kWin <= ch; ++oy)
      for (int64_t ox = 0; ox + kWin <= cw; ++ox) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int wy = 0; wy < kWin; ++wy)
          for (int wx = 0; wx < kWin; ++wx) {
            const double wv = win[static_cast<size_t>(wy * kWin + wx)];
            const double va = pa[static_cast<size_t>((oy + wy) * cw + ox + wx)];
            const double vb = pb[static_cast<size_t>((oy + wy) * cw + ox + wx)];
            mu_a += wv * va;
            mu_b += wv * vb;
            aa += wv * va * va;
            bb += wv * vb * vb;
            ab += wv * va * vb;
          }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den =
            (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
        ++count;
      }
  }
  return total / static_cast<double>(count);
}

namespace {

Tensor to_255(const Tensor& img01, bool round_to_8bit) {
  if (round_to_8bit) return quantize_255(img01);
  std::span<const double> x = img01.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = std::clamp(x[i], 0.0, 1.0) * 255.0;
  return Tensor::from_data(img01.shape(), std::move(out));
}

}  // namespace

double psnr(const Tensor& sr01, const Tensor& hr01, int border,
            bool round_to_8bit) {
  return psnr_y(rgb_to_y(to_255(sr01, round_to_8bit)),
                rgb_to_y(to_255(hr01, round_to_8bit)), border);
}

double ssim(const Tensor& sr01, const Tensor& hr01, int border,
            bool round_to_8bit) {
  return ssim_y(rgb_to_y(to_255(sr01, round_to_8bit)),
                rgb_to_y(to_255(hr01, round_to_8bit)), border);
}

void MetricReport::finalize() {
  double ps = 0.0, ss = 0.0;
  for (const auto& m : per_image) {
    ps += m.psnr_db;
    ss += m.ssim;
  }
  const auto n = static_cast<double>(per_image.empty() ? 1 : per_image.size());
  mean_psnr = ps / n;
  mean_ssim = ss / n;
}

std::string MetricReport::to_text() const {
  size_t name_w = 5;
  for (const auto& m : per_image) name_w = std::max(name_w, m.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "image"
     << "  " << std::right << std::setw(9) << "PSNR" << std::setw(9) << "SSIM"
     << "\n";
  auto row = [&](const std::string& name, double p, double s) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << "  "
       << std::right << std::fixed << std::setprecision(3) << std::setw(9) << p
       << std::setprecision(4) << std::setw(9) << s << "\n";
  };
  for (const auto& m : per_image) row(m.name, m.psnr_db, m.ssim);
  row("mean", mean_psnr, mean_ssim);
  return os.str();
}

}  // namespace laud
