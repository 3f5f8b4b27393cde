#pragma once

#include <string>
#include <vector>

#include "laud/tensor.hpp"

namespace laud {

/// BT.601 limited-range luma from RGB in [0,255]:
/// Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255. (B,3,H,W) -> (B,1,H,W).
Tensor rgb_to_y(const Tensor& rgb255);

/// Quantize a [0,1] image to the 8-bit grid (round half up, clamp), keeping
/// values in [0,255] floating point.
Tensor quantize_255(const Tensor& img01);

/// PSNR in dB between two Y-channel images in [0,255], cropping `border`
/// pixels from every side first. Identical inputs give +infinity.
double psnr_y(const Tensor& y_a, const Tensor& y_b, int border);

/// Mean local SSIM between two Y-channel images in [0,255]: 11x11 Gaussian
/// window (sigma 1.5), C1=(0.01*255)^2, C2=(0.03*255)^2, valid-region mean.
double ssim_y(const Tensor& y_a, const Tensor& y_b, int border);

/// Convenience wrappers over [0,1] RGB images: optional 8-bit rounding
/// (the benchmark convention), then Y conversion, then the Y-channel metric.
double psnr(const Tensor& sr01, const Tensor& hr01, int border,
            bool round_to_8bit = true);
double ssim(const Tensor& sr01, const Tensor& hr01, int border,
            bool round_to_8bit = true);

struct ImageMetrics {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<ImageMetrics> per_image;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int scale = 0;
  int border_crop = 0;

  void finalize();
  std::string to_text() const;
};

}  // namespace laud
