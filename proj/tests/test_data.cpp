#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "laud/data.hpp"
#include "laud/png_io.hpp"
#include "testutil.hpp"

using laud::AugmentSpec;
using laud::BatchStream;
using laud::DatasetManifest;
using laud::ResampleKernel;
using laud::Shape;
using laud::SplitMix64;
using laud::Tensor;

namespace {

std::filesystem::path write_dataset(const std::string& name, int count,
                                    int64_t hw, uint64_t seed0 = 500) {
  const auto dir = testutil::fresh_dir(name);
  for (int i = 0; i < count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img%02d.png", i);
    laud::write_png(dir / buf, testutil::synthetic_image(seed0 + i, hw, hw));
  }
  return dir;
}

void write_manifest(const std::filesystem::path& dir, int count, int scale) {
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img%02d.png", i);
    entries.push_back({{"hr", std::string(buf)}});
  }
  std::ofstream(dir / "manifest.json")
      << nlohmann::json{{"scale", scale}, {"entries", entries}}.dump();
}

}  // namespace

TEST_CASE("png round trip preserves 8-bit images exactly") {
  const auto dir = testutil::fresh_dir("pngio");
  Tensor img = testutil::synthetic_image(42, 24, 17);
  laud::write_png(dir / "t.png", img);
  Tensor back = laud::read_png(dir / "t.png");
  // write quantizes to the 8-bit grid; a second round trip is lossless
  laud::write_png(dir / "t2.png", back);
  Tensor back2 = laud::read_png(dir / "t2.png");
  CHECK(testutil::bit_equal(back, back2));
  CHECK(back.shape() == Shape{1, 3, 24, 17});
  CHECK(testutil::max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("manifest loading, directory scan and missing files") {
  const auto dir = write_dataset("manifest", 3, 32);
  write_manifest(dir, 3, 2);
  DatasetManifest m = laud::load_manifest(dir / "manifest.json");
  CHECK(m.scale == 2);
  REQUIRE(m.entries.size() == 3);

  DatasetManifest scanned = laud::load_manifest(dir, 2);
  // directory scan picks up PNGs alphabetically
  REQUIRE(scanned.entries.size() == 3);
  CHECK(scanned.entries[0].hr_path.filename() == "img00.png");

  write_manifest(dir, 4, 2);  // references img03.png which does not exist
  CHECK_THROWS_WITH_AS(laud::load_manifest(dir / "manifest.json"),
                       doctest::Contains("img03.png"), laud::DataError);

  std::ofstream(dir / "broken.json") << "{not json";
  CHECK_THROWS_AS(laud::load_manifest(dir / "broken.json"), laud::DataError);
}

TEST_CASE("hr images are cropped to scale divisibility") {
  const auto dir = testutil::fresh_dir("divis");
  laud::write_png(dir / "odd.png", testutil::synthetic_image(9, 33, 35));
  DatasetManifest m = laud::load_manifest(dir, 4);
  Tensor hr = laud::load_hr_image(m, 0);
  CHECK(hr.shape() == Shape{1, 3, 32, 32});
}

TEST_CASE("make_pair geometry and the degenerate full crop") {
  SplitMix64 rng(1);
  Tensor hr = testutil::synthetic_image(77, 64, 64);
  const ResampleKernel kernel = ResampleKernel::bicubic();
  laud::PatchSample s =
      laud::make_pair(hr, 2, 32, AugmentSpec::none(), kernel, rng);
  CHECK(s.hr.shape() == Shape{1, 3, 32, 32});
  CHECK(s.lr.shape() == Shape{1, 3, 16, 16});
  CHECK(s.d_gt.shape() == Shape{1, 3, 32, 32});

  laud::PatchSample whole =
      laud::make_pair(hr, 2, 0, AugmentSpec::none(), kernel, rng);
  CHECK(whole.hr.shape() == hr.shape());
  CHECK(testutil::bit_equal(whole.lr, laud::resample_down(hr, 2, kernel)));

  CHECK_THROWS_AS(laud::make_pair(hr, 2, 128, AugmentSpec::none(), kernel, rng),
                  laud::DataError);
}

TEST_CASE("emitted pairs satisfy the resampling identities") {
  SplitMix64 rng(2);
  Tensor hr = testutil::synthetic_image(78, 48, 48);
  const ResampleKernel kernel = ResampleKernel::bicubic();
  laud::PatchSample s = laud::make_pair(hr, 2, 24, AugmentSpec{}, kernel, rng);
  // lr is exactly the module's own downscale of the augmented patch
  CHECK(testutil::bit_equal(s.lr, laud::resample_down(s.hr, 2, kernel)));
  // d_gt + up(lr) reconstructs the patch when the kernels match
  Tensor up = laud::resample_up(s.lr, 2, kernel);
  std::vector<double> sum(static_cast<size_t>(s.hr.numel()));
  for (size_t i = 0; i < sum.size(); ++i)
    sum[i] = s.d_gt.data()[i] + up.data()[i];
  CHECK(testutil::max_abs_diff(Tensor::from_data(s.hr.shape(), std::move(sum)),
                               s.hr) < 1e-5);
}

TEST_CASE("fixed seed reproduces identical patch bytes") {
  Tensor hr = testutil::synthetic_image(79, 48, 48);
  const ResampleKernel kernel = ResampleKernel::bicubic();
  SplitMix64 r1(123), r2(123);
  laud::PatchSample a = laud::make_pair(hr, 2, 16, AugmentSpec{}, kernel, r1);
  laud::PatchSample b = laud::make_pair(hr, 2, 16, AugmentSpec{}, kernel, r2);
  CHECK(testutil::bit_equal(a.hr, b.hr));
  CHECK(testutil::bit_equal(a.lr, b.lr));
  CHECK(testutil::bit_equal(a.d_gt, b.d_gt));
}

TEST_CASE("augmentation commutes with LR derivation") {
  Tensor hr = testutil::synthetic_image(80, 32, 32);
  const ResampleKernel kernel = ResampleKernel::bicubic();
  Tensor lr_then_flip = laud::flip_horizontal(laud::resample_down(hr, 2, kernel));
  Tensor flip_then_lr = laud::resample_down(laud::flip_horizontal(hr), 2, kernel);
  CHECK(testutil::max_abs_diff(lr_then_flip, flip_then_lr) < 1e-6);

  Tensor v1 = laud::flip_vertical(laud::resample_down(hr, 2, kernel));
  Tensor v2 = laud::resample_down(laud::flip_vertical(hr), 2, kernel);
  CHECK(testutil::max_abs_diff(v1, v2) < 1e-6);
}

TEST_CASE("rotate90 is its own fourth root") {
  Tensor img = testutil::synthetic_image(81, 16, 16);
  Tensor r = img;
  for (int i = 0; i < 4; ++i) r = laud::rotate90(r);
  CHECK(testutil::bit_equal(r, img));
}

TEST_CASE("batch stream: sizes, determinism and empty manifests") {
  const auto dir = write_dataset("batches", 10, 48);
  DatasetManifest m = laud::load_manifest(dir, 2);
  BatchStream stream(m, 4, 16, AugmentSpec{}, ResampleKernel::bicubic(), 99);
  CHECK(stream.batches_per_epoch() == 3);

  std::vector<int64_t> sizes;
  std::vector<int64_t> order;
  while (auto b = stream.next()) {
    sizes.push_back(b->lr.shape().b);
    for (int64_t id : b->source_ids) order.push_back(id);
  }
  CHECK(sizes == std::vector<int64_t>{4, 4, 2});
  // each entry appears exactly once per epoch
  std::vector<int64_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int64_t i = 0; i < 10; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);

  // identical seed -> identical order and bytes
  BatchStream s1(m, 4, 16, AugmentSpec{}, ResampleKernel::bicubic(), 7);
  BatchStream s2(m, 4, 16, AugmentSpec{}, ResampleKernel::bicubic(), 7);
  auto b1 = s1.next(), b2 = s2.next();
  REQUIRE(b1);
  REQUIRE(b2);
  CHECK(b1->source_ids == b2->source_ids);
  CHECK(testutil::bit_equal(b1->lr, b2->lr));

  // different epochs shuffle differently
  s1.begin_epoch(1);
  auto b3 = s1.next();
  bool same = b3->source_ids == b1->source_ids;
  // (can coincide by chance for tiny sets, but not for 10 entries with
  //  this seed)
  CHECK_FALSE(same);

  // empty manifest -> empty stream
  const auto empty_dir = testutil::fresh_dir("emptyset");
  DatasetManifest empty = laud::load_manifest(empty_dir, 2);
  BatchStream es(empty, 4, 16, AugmentSpec{}, ResampleKernel::bicubic(), 1);
  CHECK_FALSE(es.next().has_value());
}
