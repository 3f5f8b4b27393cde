#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "laud/resample.hpp"
#include "laud/rng.hpp"
#include "laud/tensor.hpp"

namespace testutil {

inline laud::Tensor random_tensor(const laud::Shape& shape, laud::SplitMix64& rng,
                                  double lo = -1.0, double hi = 1.0,
                                  bool requires_grad = false) {
  std::vector<double> data(static_cast<size_t>(shape.numel()));
  for (double& v : data) v = rng.uniform(lo, hi);
  return laud::Tensor::from_data(shape, std::move(data), requires_grad);
}

// max |fd - analytic| / max(1, |fd|, |analytic|) over sampled coordinates of
// `leaf`. loss_fn must rebuild the forward graph from the current leaf values.
inline double finite_difference_max_err(
    laud::Tensor leaf, const std::function<laud::Tensor()>& loss_fn,
    laud::SplitMix64& rng, int max_coords = 24, double h = 1e-5) {
  leaf.zero_grad();  // drop residue from any earlier backward
  laud::Tensor loss = loss_fn();
  loss.backward();
  const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
  leaf.zero_grad();

  const auto n = static_cast<size_t>(leaf.numel());
  std::vector<size_t> coords;
  if (n <= static_cast<size_t>(max_coords)) {
    for (size_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (int i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<size_t>(rng.next_below(n)));
  }

  double max_err = 0.0;
  std::span<double> x = leaf.mutable_data();
  for (size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss_fn().item();
    x[i] = saved - h;
    const double down = loss_fn().item();
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - analytic[i]) /
                       std::max({1.0, std::abs(fd), std::abs(analytic[i])});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

// Deterministic natural-looking test image in [0.02, 0.98]: a smooth random
// field shared across channels, a few rectangles, and faint noise. The draw
// order is part of the contract (mirrored by tests/oracles/metrics_oracle.py).
inline laud::Tensor synthetic_image(uint64_t seed, int64_t h, int64_t w) {
  laud::SplitMix64 rng(seed);
  const int64_t gh = std::max<int64_t>(2, h / 8);
  const int64_t gw = std::max<int64_t>(2, w / 8);

  std::vector<std::vector<double>> base(3);
  for (auto& g : base) {
    g.resize(static_cast<size_t>(gh * gw));
    for (double& v : g) v = rng.next_double();
  }
  std::vector<double> shared(static_cast<size_t>(gh * gw));
  for (double& v : shared) v = rng.next_double();

  std::vector<double> field(static_cast<size_t>(3 * gh * gw));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < gh * gw; ++i)
      field[static_cast<size_t>(c * gh * gw + i)] =
          0.6 * shared[static_cast<size_t>(i)] +
          0.4 * base[static_cast<size_t>(c)][static_cast<size_t>(i)];
  laud::Tensor up = laud::bicubic_resize(
      laud::Tensor::from_data(laud::Shape{1, 3, gh, gw}, std::move(field)), h,
      w, /*antialias=*/false);
  std::vector<double> img(up.data().begin(), up.data().end());

  const auto nrect = 2 + rng.next_below(3);
  for (uint64_t r = 0; r < nrect; ++r) {
    const auto y0 = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(h)));
    const auto x0 = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(w)));
    const auto rh = 4 + static_cast<int64_t>(
                            rng.next_below(static_cast<uint64_t>(h / 2)));
    const auto rw = 4 + static_cast<int64_t>(
                            rng.next_below(static_cast<uint64_t>(w / 2)));
    const double delta = rng.uniform(-0.35, 0.35);
    double gain[3];
    for (double& g : gain) g = rng.uniform(0.5, 1.0);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = y0; y < std::min(h, y0 + rh); ++y)
        for (int64_t x = x0; x < std::min(w, x0 + rw); ++x)
          img[static_cast<size_t>(c * h * w + y * w + x)] += delta * gain[c];
  }

  for (int64_t i = 0; i < 3 * h * w; ++i)
    img[static_cast<size_t>(i)] += rng.uniform(-0.02, 0.02);
  for (double& v : img) v = std::clamp(v, 0.02, 0.98);
  return laud::Tensor::from_data(laud::Shape{1, 3, h, w}, std::move(img));
}

// Scratch directory under the build tree, wiped per test run.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("laud_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_abs_diff(const laud::Tensor& a, const laud::Tensor& b) {
  double m = 0.0;
  std::span<const double> xa = a.data(), xb = b.data();
  for (size_t i = 0; i < xa.size(); ++i)
    m = std::max(m, std::abs(xa[i] - xb[i]));
  return m;
}

inline bool bit_equal(const laud::Tensor& a, const laud::Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  std::span<const double> xa = a.data(), xb = b.data();
  for (size_t i = 0; i < xa.size(); ++i)
    if (xa[i] != xb[i]) return false;
  return true;
}

}  // namespace testutil
