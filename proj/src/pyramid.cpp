#include "laud/pyramid.hpp"

namespace laud {

namespace {

Tensor elementwise_sub(const Tensor& a, const Tensor& b) {
  std::span<const double> xa = a.data(), xb = b.data();
  std::vector<double> out(xa.size());
  for (size_t i = 0; i < xa.size(); ++i) out[i] = xa[i] - xb[i];
  return Tensor::from_data(a.shape(), std::move(out));
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  std::span<const double> xa = a.data(), xb = b.data();
  std::vector<double> out(xa.size());
  for (size_t i = 0; i < xa.size(); ++i) out[i] = xa[i] + xb[i];
  return Tensor::from_data(a.shape(), std::move(out));
}

void check_divisible(const Shape& s, int levels, int factor) {
  int64_t div = 1;
  for (int i = 0; i < levels; ++i) div *= factor;
  if (s.h % div != 0 || s.w % div != 0)
    throw GeometryError("image " + s.str() + " not divisible by " +
                        std::to_string(factor) + "^" + std::to_string(levels));
}

}  // namespace

LaplacianPyramid lp_decompose(const Tensor& image, int levels,
                              const ResampleKernel& kernel, int factor) {
  if (levels < 1) throw GeometryError("pyramid needs at least one level");
  if (factor < 2) throw GeometryError("pyramid factor must be >= 2");
  check_divisible(image.shape(), levels, factor);

  LaplacianPyramid pyr;
  pyr.factor = factor;
  pyr.kernel = kernel;
  Tensor cur = image.detach();
  for (int level = 0; level < levels; ++level) {
    Tensor next = resample_down(cur, factor, kernel);
    Tensor up = resample_up(next, factor, kernel);
    pyr.details.push_back(elementwise_sub(cur, up));
    cur = next;
  }
  pyr.base = cur;
  return pyr;
}

Tensor lp_reconstruct(const LaplacianPyramid& pyramid) {
  if (pyramid.details.empty() || !pyramid.base.defined())
    throw GeometryError("reconstruct of an empty pyramid");
  Tensor cur = pyramid.base;
  for (auto it = pyramid.details.rbegin(); it != pyramid.details.rend(); ++it) {
    Tensor up = resample_up(cur, pyramid.factor, pyramid.kernel);
    if (!(up.shape() == it->shape()))
      throw GeometryError("pyramid level size mismatch: expected " +
                          up.shape().str() + ", stored " + it->shape().str());
    cur = elementwise_add(up, *it);
  }
  return cur;
}

Tensor detail_target(const Tensor& hr_image, int scale,
                     const ResampleKernel& kernel) {
  if (scale < 2) throw GeometryError("detail target scale must be >= 2");
  const Shape s = hr_image.shape();
  if (s.h % scale != 0 || s.w % scale != 0)
    throw GeometryError("image " + s.str() + " not divisible by scale " +
                        std::to_string(scale));
  Tensor low = resample_down(hr_image, scale, kernel);
  Tensor up = resample_up(low, scale, kernel);
  return elementwise_sub(hr_image, up);
}

}  // namespace laud
