#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "laud/pyramid.hpp"
#include "laud/rng.hpp"
#include "laud/tensor.hpp"

namespace laud {

struct ManifestEntry {
  std::filesystem::path hr_path;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  int scale = 2;
  std::string split = "train";
};

/// Load a manifest JSON ({"scale": s, "entries": [{"hr": "p.png"}, ...]},
/// paths relative to the manifest) or scan a directory for PNGs in
/// alphabetical order. Every referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path, int scale = 0);

/// Decode an entry's HR image and crop it to dims divisible by the scale.
Tensor load_hr_image(const DatasetManifest& manifest, size_t index);

struct AugmentSpec {
  bool hflip = true;
  bool vflip = true;
  bool rot90 = true;

  static AugmentSpec none() { return {false, false, false}; }
};

/// One training example: aligned LR/HR/D_GT patches.
struct PatchSample {
  Tensor lr;    // (1,3,p,p)
  Tensor hr;    // (1,3,p*s,p*s)
  Tensor d_gt;  // (1,3,p*s,p*s)
  int64_t source_id = 0;
};

struct PatchBatch {
  Tensor lr, hr, d_gt;
  std::vector<int64_t> source_ids;
};

/// Random scale-aligned crop + augmentation, then LR and D_GT derivation
/// with the given kernel. crop == 0 takes the whole (divisibility-cropped)
/// image. All random draws come from `rng`.
PatchSample make_pair(const Tensor& hr_image, int scale, int crop,
                      const AugmentSpec& augment, const ResampleKernel& kernel,
                      SplitMix64& rng);

/// Deterministic epoch iteration: a shuffled pass over the manifest entries,
/// one patch per entry per epoch, batches of `batch` with a partial tail.
class BatchStream {
 public:
  BatchStream(const DatasetManifest& manifest, int batch, int crop,
              AugmentSpec augment, ResampleKernel kernel, uint64_t seed);

  /// Reset to the start of the given epoch (order depends on seed + epoch).
  void begin_epoch(int64_t epoch);
  std::optional<PatchBatch> next();

  size_t size() const { return images_.size(); }
  int64_t batches_per_epoch() const;
  const Tensor& image(size_t i) const { return images_.at(i); }

 private:
  std::vector<Tensor> images_;  // decoded + divisibility-cropped
  int scale_, batch_, crop_;
  AugmentSpec augment_;
  ResampleKernel kernel_;
  uint64_t seed_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  SplitMix64 patch_rng_{0};
};

PatchBatch collate(const std::vector<PatchSample>& samples);

/// Flip/rotate helpers shared with augmentation tests.
Tensor flip_horizontal(const Tensor& img);
Tensor flip_vertical(const Tensor& img);
Tensor rotate90(const Tensor& img);

}  // namespace laud
