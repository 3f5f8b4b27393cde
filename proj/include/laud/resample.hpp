#pragma once

#include <array>
#include <cstdint>

#include "laud/tensor.hpp"

namespace laud {

enum class KernelKind { burt5, bicubic };

/// Low-pass kernel selection for pyramid and LR synthesis resampling.
/// burt5 is the classic 5-tap [1/4-a/2, 1/4, a, 1/4, 1/4-a/2] pair used for
/// factor-2 reduce/expand; bicubic is the Keys cubic (parameter a), with
/// optional kernel widening when antialiased downscaling.
struct ResampleKernel {
  KernelKind kind = KernelKind::bicubic;
  double a = -0.5;
  bool antialias = true;

  static ResampleKernel burt(double a = 0.375) {
    return ResampleKernel{KernelKind::burt5, a, false};
  }
  static ResampleKernel bicubic(double a = -0.5, bool antialias = true) {
    return ResampleKernel{KernelKind::bicubic, a, antialias};
  }

  std::array<double, 5> burt_taps() const {
    return {0.25 - a / 2.0, 0.25, a, 0.25, 0.25 - a / 2.0};
  }
};

/// Separable Keys-cubic resize to an arbitrary target size. Boundary handling
/// is symmetric reflection without edge repetition; per-output tap weights are
/// normalized to sum to 1. Downscales widen the kernel by the scale ratio when
/// `antialias` is set.
Tensor bicubic_resize(const Tensor& image, int64_t out_h, int64_t out_w,
                      bool antialias, double a = -0.5);

/// Low-pass filter and decimate by an integer factor. burt5 requires the
/// factor to be a power of two (cascaded factor-2 stages) and dims divisible
/// by the factor.
Tensor resample_down(const Tensor& image, int factor, const ResampleKernel& k);

/// Interpolate up by an integer factor. burt5 uses zero insertion followed by
/// the tap set scaled by the factor.
Tensor resample_up(const Tensor& image, int factor, const ResampleKernel& k);

}  // namespace laud
