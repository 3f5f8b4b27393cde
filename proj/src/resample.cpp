#include "laud/resample.hpp"

#include <cmath>
#include <vector>

namespace laud {

namespace {

// Reflect an index into [0, n) without repeating the edge sample.
int64_t reflect(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double keys_cubic(double x, double a) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return a * (((x - 5.0) * x + 8.0) * x - 4.0);
  return 0.0;
}

struct TapSet {
  int64_t first;               // first (unreflected) source index
  std::vector<double> weights;  // normalized to sum 1
};

std::vector<TapSet> cubic_taps(int64_t in, int64_t out, bool antialias,
                               double a) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
  const double radius = 2.0 / kscale;
  std::vector<TapSet> taps(static_cast<size_t>(out));
  for (int64_t i = 0; i < out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto jmin = static_cast<int64_t>(std::ceil(u - radius));
    const auto jmax = static_cast<int64_t>(std::floor(u + radius));
    TapSet& t = taps[static_cast<size_t>(i)];
    t.first = jmin;
    t.weights.resize(static_cast<size_t>(jmax - jmin + 1));
    double sum = 0.0;
    for (int64_t j = jmin; j <= jmax; ++j) {
      const double w = keys_cubic((u - static_cast<double>(j)) * kscale, a);
      t.weights[static_cast<size_t>(j - jmin)] = w;
      sum += w;
    }
    for (double& w : t.weights) w /= sum;
  }
  return taps;
}

// Apply taps along the last (width) axis of a rows x width plane.
void apply_taps_rows(const double* src, int64_t rows, int64_t width,
                     const std::vector<TapSet>& taps, double* dst) {
  const auto out_w = static_cast<int64_t>(taps.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = src + r * width;
    double* out = dst + r * out_w;
    for (int64_t i = 0; i < out_w; ++i) {
      const TapSet& t = taps[static_cast<size_t>(i)];
      double acc = 0.0;
      for (size_t k = 0; k < t.weights.size(); ++k)
        acc += t.weights[k] *
               row[reflect(t.first + static_cast<int64_t>(k), width)];
      out[i] = acc;
    }
  }
}

// Transpose a rows x cols plane.
void transpose(const double* src, int64_t rows, int64_t cols, double* dst) {
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

void check_positive(int64_t out_h, int64_t out_w) {
  if (out_h < 1 || out_w < 1)
    throw GeometryError("resize target must be positive, got " +
                        std::to_string(out_h) + "x" + std::to_string(out_w));
}

// Burt factor-2 reduce along the width axis (even width required upstream).
void burt_reduce_rows(const double* src, int64_t rows, int64_t width,
                      const std::array<double, 5>& w, double* dst) {
  const int64_t out_w = width / 2;
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = src + r * width;
    double* out = dst + r * out_w;
    for (int64_t i = 0; i < out_w; ++i) {
      double acc = 0.0;
      for (int64_t k = 0; k < 5; ++k)
        acc += w[static_cast<size_t>(k)] * row[reflect(2 * i + k - 2, width)];
      out[i] = acc;
    }
  }
}

// Burt factor-2 expand along the width axis (zero insertion + taps * 2).
void burt_expand_rows(const double* src, int64_t rows, int64_t width,
                      const std::array<double, 5>& w, double* dst) {
  const int64_t out_w = width * 2;
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = src + r * width;
    double* out = dst + r * out_w;
    for (int64_t m = 0; m < out_w; ++m) {
      double acc = 0.0;
      if (m % 2 == 0) {
        const int64_t j = m / 2;
        acc = w[0] * row[reflect(j - 1, width)] + w[2] * row[j] +
              w[4] * row[reflect(j + 1, width)];
      } else {
        const int64_t j = (m - 1) / 2;
        acc = w[1] * row[j] + w[3] * row[reflect(j + 1, width)];
      }
      out[m] = 2.0 * acc;
    }
  }
}

using RowOp = void (*)(const double*, int64_t, int64_t,
                       const std::array<double, 5>&, double*);

// Run a separable width-axis op on both axes of every (b,c) plane.
Tensor burt_separable(const Tensor& image, const std::array<double, 5>& w,
                      RowOp op, int64_t out_h, int64_t out_w) {
  const Shape s = image.shape();
  std::vector<double> pass1(static_cast<size_t>(s.h * out_w));
  std::vector<double> tr(static_cast<size_t>(out_w * s.h));
  std::vector<double> pass2(static_cast<size_t>(out_w * out_h));
  std::vector<double> out(static_cast<size_t>(s.b * s.c * out_h * out_w));
  for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
    const double* plane = image.data().data() + bc * s.h * s.w;
    op(plane, s.h, s.w, w, pass1.data());
    transpose(pass1.data(), s.h, out_w, tr.data());
    op(tr.data(), out_w, s.h, w, pass2.data());
    transpose(pass2.data(), out_w, out_h, out.data() + bc * out_h * out_w);
  }
  return Tensor::from_data(Shape{s.b, s.c, out_h, out_w}, std::move(out));
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

Tensor bicubic_resize(const Tensor& image, int64_t out_h, int64_t out_w,
                      bool antialias, double a) {
  check_positive(out_h, out_w);
  const Shape s = image.shape();
  const auto htaps = cubic_taps(s.w, out_w, antialias, a);
  const auto vtaps = cubic_taps(s.h, out_h, antialias, a);
  std::vector<double> pass1(static_cast<size_t>(s.h * out_w));
  std::vector<double> tr(static_cast<size_t>(out_w * s.h));
  std::vector<double> pass2(static_cast<size_t>(out_w * out_h));
  std::vector<double> out(static_cast<size_t>(s.b * s.c * out_h * out_w));
  for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
    const double* plane = image.data().data() + bc * s.h * s.w;
    apply_taps_rows(plane, s.h, s.w, htaps, pass1.data());
    transpose(pass1.data(), s.h, out_w, tr.data());
    apply_taps_rows(tr.data(), out_w, s.h, vtaps, pass2.data());
    transpose(pass2.data(), out_w, out_h, out.data() + bc * out_h * out_w);
  }
  return Tensor::from_data(Shape{s.b, s.c, out_h, out_w}, std::move(out));
}

Tensor resample_down(const Tensor& image, int factor, const ResampleKernel& k) {
  const Shape s = image.shape();
  if (factor < 1) throw GeometryError("downsample factor must be >= 1");
  if (s.h % factor != 0 || s.w % factor != 0)
    throw GeometryError("image " + s.str() + " not divisible by factor " +
                        std::to_string(factor));
  if (factor == 1) return image.detach();
  if (k.kind == KernelKind::bicubic)
    return bicubic_resize(image, s.h / factor, s.w / factor, k.antialias, k.a);
  if (!is_power_of_two(factor))
    throw GeometryError("burt5 resampling requires a power-of-two factor");
  Tensor cur = image;
  for (int f = factor; f > 1; f /= 2)
    cur = burt_separable(cur, k.burt_taps(), burt_reduce_rows,
                         cur.shape().h / 2, cur.shape().w / 2);
  return cur;
}

Tensor resample_up(const Tensor& image, int factor, const ResampleKernel& k) {
  const Shape s = image.shape();
  if (factor < 1) throw GeometryError("upsample factor must be >= 1");
  if (factor == 1) return image.detach();
  if (k.kind == KernelKind::bicubic)
    return bicubic_resize(image, s.h * factor, s.w * factor,
                          /*antialias=*/false, k.a);
  if (!is_power_of_two(factor))
    throw GeometryError("burt5 resampling requires a power-of-two factor");
  Tensor cur = image;
  for (int f = factor; f > 1; f /= 2)
    cur = burt_separable(cur, k.burt_taps(), burt_expand_rows,
                         cur.shape().h * 2, cur.shape().w * 2);
  return cur;
}

}  // namespace laud
