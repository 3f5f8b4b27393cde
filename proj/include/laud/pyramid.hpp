#pragma once

#include <vector>

#include "laud/resample.hpp"
#include "laud/tensor.hpp"

namespace laud {

/// Multi-scale residual decomposition: detail images largest-first plus one
/// low-pass base. Reconstruction is exact by construction since each detail
/// stores the full residual of its level.
struct LaplacianPyramid {
  std::vector<Tensor> details;  // details[0] has the source resolution
  Tensor base;
  int factor = 2;
  ResampleKernel kernel;

  int levels() const { return static_cast<int>(details.size()); }
};

/// Decompose into `levels` residual images plus a base. Image dims must be
/// divisible by factor^levels; no implicit padding.
LaplacianPyramid lp_decompose(const Tensor& image, int levels,
                              const ResampleKernel& kernel, int factor);

/// Invert lp_decompose: repeatedly upsample and add the stored residual.
Tensor lp_reconstruct(const LaplacianPyramid& pyramid);

/// Ground-truth detail image for SR training: the residual of a one-level
/// pyramid whose factor equals the SR scale.
Tensor detail_target(const Tensor& hr_image, int scale,
                     const ResampleKernel& kernel);

}  // namespace laud
