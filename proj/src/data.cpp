#include "laud/data.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "laud/png_io.hpp"

namespace laud {

namespace {

DatasetManifest scan_directory(const std::filesystem::path& dir, int scale) {
  DatasetManifest m;
  m.root = dir;
  m.scale = scale > 0 ? scale : 2;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      m.entries.push_back({entry.path()});
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.hr_path < b.hr_path;
            });
  return m;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path, int scale) {
  if (std::filesystem::is_directory(path)) return scan_directory(path, scale);
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + path.string() + "' is not valid JSON: " +
                    e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  m.scale = scale > 0 ? scale : j.value("scale", 2);
  m.split = j.value("split", "train");
  std::vector<std::string> missing;
  for (const auto& e : j.value("entries", nlohmann::json::array())) {
    if (!e.contains("hr"))
      throw DataError("manifest entry without an 'hr' field in '" +
                      path.string() + "'");
    std::filesystem::path p = m.root / e["hr"].get<std::string>();
    if (!std::filesystem::exists(p)) missing.push_back(p.string());
    m.entries.push_back({p});
  }
  if (!missing.empty()) {
    std::string msg = "manifest references missing files:";
    for (const auto& p : missing) msg += "\n  " + p;
    throw DataError(msg);
  }
  return m;
}

Tensor load_hr_image(const DatasetManifest& manifest, size_t index) {
  const auto& path = manifest.entries.at(index).hr_path;
  Tensor img = read_png(path);
  const Shape s = img.shape();
  const int64_t h = s.h - s.h % manifest.scale;
  const int64_t w = s.w - s.w % manifest.scale;
  if (h < manifest.scale || w < manifest.scale)
    throw DataError("image '" + path.string() + "' (" + s.str() +
                    ") too small for scale " + std::to_string(manifest.scale));
  if (h == s.h && w == s.w) return img;
  std::vector<double> out(static_cast<size_t>(s.b * s.c * h * w));
  for (int64_t bc = 0; bc < s.b * s.c; ++bc)
    for (int64_t y = 0; y < h; ++y)
      std::copy_n(img.data().data() + (bc * s.h + y) * s.w, w,
                  out.data() + (bc * h + y) * w);
  return Tensor::from_data(Shape{s.b, s.c, h, w}, std::move(out));
}

Tensor flip_horizontal(const Tensor& img) {
  const Shape s = img.shape();
  std::vector<double> out(static_cast<size_t>(s.numel()));
  std::span<const double> x = img.data();
  for (int64_t bc = 0; bc < s.b * s.c; ++bc)
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t xx = 0; xx < s.w; ++xx)
        out[static_cast<size_t>((bc * s.h + y) * s.w + xx)] =
            x[static_cast<size_t>((bc * s.h + y) * s.w + (s.w - 1 - xx))];
  return Tensor::from_data(s, std::move(out));
}

Tensor flip_vertical(const Tensor& img) {
  const Shape s = img.shape();
  std::vector<double> out(static_cast<size_t>(s.numel()));
  std::span<const double> x = img.data();
  for (int64_t bc = 0; bc < s.b * s.c; ++bc)
    for (int64_t y = 0; y < s.h; ++y)
      std::copy_n(x.data() + (bc * s.h + (s.h - 1 - y)) * s.w, s.w,
                  out.data() + (bc * s.h + y) * s.w);
  return Tensor::from_data(s, std::move(out));
}

Tensor rotate90(const Tensor& img) {
  const Shape s = img.shape();
  std::vector<double> out(static_cast<size_t>(s.numel()));
  std::span<const double> x = img.data();
  // (y, x) -> (x, H-1-y): quarter turn counterclockwise.
  for (int64_t bc = 0; bc < s.b * s.c; ++bc)
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t xx = 0; xx < s.w; ++xx)
        out[static_cast<size_t>((bc * s.w + xx) * s.h + (s.h - 1 - y))] =
            x[static_cast<size_t>((bc * s.h + y) * s.w + xx)];
  return Tensor::from_data(Shape{s.b, s.c, s.w, s.h}, std::move(out));
}

PatchSample make_pair(const Tensor& hr_image, int scale, int crop,
                      const AugmentSpec& augment, const ResampleKernel& kernel,
                      SplitMix64& rng) {
  const Shape s = hr_image.shape();
  Tensor patch;
  if (crop == 0) {
    patch = hr_image.detach();
  } else {
    if (crop % scale != 0)
      throw GeometryError("crop " + std::to_string(crop) +
                          " not divisible by scale " + std::to_string(scale));
    if (crop > s.h || crop > s.w)
      throw DataError("crop " + std::to_string(crop) + " larger than image " +
                      s.str());
    const int64_t max_y = (s.h - crop) / scale;
    const int64_t max_x = (s.w - crop) / scale;
    const int64_t oy = static_cast<int64_t>(
                           rng.next_below(static_cast<uint64_t>(max_y + 1))) *
                       scale;
    const int64_t ox = static_cast<int64_t>(
                           rng.next_below(static_cast<uint64_t>(max_x + 1))) *
                       scale;
    std::vector<double> out(static_cast<size_t>(s.b * s.c * crop * crop));
    for (int64_t bc = 0; bc < s.b * s.c; ++bc)
      for (int64_t y = 0; y < crop; ++y)
        std::copy_n(hr_image.data().data() + (bc * s.h + oy + y) * s.w + ox,
                    crop, out.data() + (bc * crop + y) * crop);
    patch = Tensor::from_data(Shape{s.b, s.c, crop, crop}, std::move(out));
  }

  if (augment.hflip && rng.next_double() < 0.5) patch = flip_horizontal(patch);
  if (augment.vflip && rng.next_double() < 0.5) patch = flip_vertical(patch);
  if (augment.rot90 && patch.shape().h == patch.shape().w &&
      rng.next_double() < 0.5)
    patch = rotate90(patch);

  PatchSample sample;
  sample.hr = patch;
  sample.lr = resample_down(patch, scale, kernel);
  sample.d_gt = detail_target(patch, scale, kernel);
  return sample;
}

PatchBatch collate(const std::vector<PatchSample>& samples) {
  if (samples.empty()) throw DataError("collate of an empty sample list");
  auto stack = [&](auto getter) {
    const Shape s = getter(samples.front()).shape();
    const auto n = static_cast<int64_t>(samples.size());
    std::vector<double> out(static_cast<size_t>(n * s.c * s.h * s.w));
    for (int64_t i = 0; i < n; ++i) {
      std::span<const double> src = getter(samples[static_cast<size_t>(i)]).data();
      std::copy(src.begin(), src.end(), out.begin() + i * s.c * s.h * s.w);
    }
    return Tensor::from_data(Shape{n, s.c, s.h, s.w}, std::move(out));
  };
  PatchBatch batch;
  batch.lr = stack([](const PatchSample& p) -> const Tensor& { return p.lr; });
  batch.hr = stack([](const PatchSample& p) -> const Tensor& { return p.hr; });
  batch.d_gt =
      stack([](const PatchSample& p) -> const Tensor& { return p.d_gt; });
  for (const auto& p : samples) batch.source_ids.push_back(p.source_id);
  return batch;
}

BatchStream::BatchStream(const DatasetManifest& manifest, int batch, int crop,
                         AugmentSpec augment, ResampleKernel kernel,
                         uint64_t seed)
    : scale_(manifest.scale),
      batch_(batch),
      crop_(crop),
      augment_(augment),
      kernel_(kernel),
      seed_(seed) {
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  images_.reserve(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i)
    images_.push_back(load_hr_image(manifest, i));
  begin_epoch(0);
}

void BatchStream::begin_epoch(int64_t epoch) {
  order_.resize(images_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  SplitMix64 shuffle_rng(
      derive_seed(seed_, "shuffle-" + std::to_string(epoch)));
  for (size_t i = order_.size(); i > 1; --i)
    std::swap(order_[i - 1], order_[shuffle_rng.next_below(i)]);
  patch_rng_ = SplitMix64(derive_seed(seed_, "patch-" + std::to_string(epoch)));
  cursor_ = 0;
}

int64_t BatchStream::batches_per_epoch() const {
  const auto n = static_cast<int64_t>(images_.size());
  return (n + batch_ - 1) / batch_;
}

std::optional<PatchBatch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  std::vector<PatchSample> samples;
  while (cursor_ < order_.size() &&
         samples.size() < static_cast<size_t>(batch_)) {
    const size_t idx = order_[cursor_++];
    PatchSample s = make_pair(images_[idx], scale_, crop_, augment_, kernel_,
                              patch_rng_);
    s.source_id = static_cast<int64_t>(idx);
    samples.push_back(std::move(s));
  }
  return collate(samples);
}

}  // namespace laud
