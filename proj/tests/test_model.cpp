#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "laud/loss.hpp"
#include "laud/model.hpp"
#include "testutil.hpp"

using laud::LaudConfig;
using laud::LaudModel;
using laud::Shape;
using laud::SplitMix64;
using laud::Tensor;

namespace {

LaudConfig micro_config(int k = 3) {
  LaudConfig c;
  c.scale = 2;
  c.rudp_steps = k;
  c.residual_blocks = 2;
  c.channels = 8;
  return c;
}

void zero_params(laud::ConvParams& p) {
  for (double& v : p.weight.mutable_data()) v = 0.0;
  for (double& v : p.bias.mutable_data()) v = 0.0;
}

}  // namespace

TEST_CASE("zeroed residual-block internals make H_N == H_0") {
  LaudModel model = LaudModel::init(micro_config(1), 1);
  auto& sp = model.step_params_mut(0);
  for (auto& rb : sp.blocks) {
    zero_params(rb.conv1);
    zero_params(rb.conv2);
  }
  SplitMix64 rng(5);
  Tensor input = testutil::random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  Tensor h_n = model.feature_extract(input, 0);
  Tensor h_0 = laud::conv2d(input, sp.shallow);
  CHECK(testutil::max_abs_diff(h_n, h_0) == 0.0);
}

TEST_CASE("feature_extract shape contract and channel validation") {
  LaudConfig cfg = micro_config(2);
  cfg.channels = 32;
  LaudModel model = LaudModel::init(cfg, 2);
  SplitMix64 rng(6);
  Tensor input = testutil::random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
  CHECK(model.feature_extract(input, 0).shape() == Shape{1, 32, 16, 16});
  // step 1 takes the concat of I_LR and one H_Down: 3 + C channels
  CHECK_THROWS_AS(model.feature_extract(input, 1), laud::ConfigError);
}

TEST_CASE("gradient reaches the shallow conv from a loss on H_N") {
  LaudModel model = LaudModel::init(micro_config(1), 3);
  SplitMix64 rng(7);
  Tensor input = testutil::random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  Tensor h_n = model.feature_extract(input, 0);
  Tensor l = laud::l1_loss(h_n, Tensor::zeros(h_n.shape()));
  l.backward();
  const Tensor& w = model.step_params(0).shallow.weight;
  REQUIRE(w.has_grad());
  double norm = 0.0;
  for (double g : w.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("upscale block: geometry, detail-branch depth and the skip collapse") {
  LaudModel model = LaudModel::init(micro_config(1), 4);
  SplitMix64 rng(8);
  Tensor h_n = testutil::random_tensor(Shape{1, 8, 16, 16}, rng, -1, 1);
  auto [h_u, h_d, h_sr] = model.upscale_block(h_n, 0);
  CHECK(h_u.shape() == Shape{1, 8, 32, 32});
  CHECK(h_d.shape() == Shape{1, 8, 32, 32});
  CHECK(h_sr.shape() == Shape{1, 8, 32, 32});

  // exactly three convolutions sit between H_U and H_D
  CHECK(model.step_params(0).detail_convs.size() == 3);

  auto& sp = model.step_params_mut(0);
  for (auto& c : sp.detail_convs) zero_params(c);
  auto [h_u2, h_d2, h_sr2] = model.upscale_block(h_n, 0);
  for (double v : h_d2.data()) CHECK(v == 0.0);
  CHECK(testutil::max_abs_diff(h_sr2, h_u2) == 0.0);
}

TEST_CASE("downscale block inverts the upscale geometry") {
  for (int scale : {2, 4, 8}) {
    LaudConfig cfg = micro_config(2);
    cfg.scale = scale;
    LaudModel model = LaudModel::init(cfg, 5);
    SplitMix64 rng(9);
    Tensor h_n = testutil::random_tensor(Shape{1, 8, 8, 8}, rng, -1, 1);
    auto [h_u, h_d, h_sr] = model.upscale_block(h_n, 0);
    CHECK(h_sr.shape().h == 8 * scale);
    Tensor down = model.downscale_block(h_sr, 0);
    CHECK(down.shape() == Shape{1, 8, 8, 8});
  }
}

TEST_CASE("gradient reaches H_SR from a loss on H_Down") {
  LaudModel model = LaudModel::init(micro_config(2), 6);
  SplitMix64 rng(10);
  Tensor h_sr = testutil::random_tensor(Shape{1, 8, 16, 16}, rng, -1, 1, true);
  Tensor down = model.downscale_block(h_sr, 0);
  Tensor l = laud::l1_loss(down, Tensor::zeros(down.shape()));
  l.backward();
  double norm = 0.0;
  for (double g : h_sr.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("forward emits K SR and detail images at HR geometry") {
  SplitMix64 rng(11);
  Tensor lr = testutil::random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);

  LaudModel k1 = LaudModel::init(micro_config(1), 7);
  laud::ForwardTrace t1 = k1.forward(lr);
  CHECK(t1.sr_images.size() == 1);
  CHECK(t1.detail_images.size() == 1);

  LaudModel k3 = LaudModel::init(micro_config(3), 7);
  laud::ForwardTrace t3 = k3.forward(lr);
  REQUIRE(t3.sr_images.size() == 3);
  REQUIRE(t3.detail_images.size() == 3);
  for (const auto& img : t3.sr_images) CHECK(img.shape() == Shape{1, 3, 32, 32});
  for (const auto& img : t3.detail_images)
    CHECK(img.shape() == Shape{1, 3, 32, 32});

  // retained features only on request
  CHECK(t3.features.empty());
  laud::ForwardTrace t3f = k3.forward(lr, /*retain_features=*/true);
  REQUIRE(t3f.features.size() == 3);
  CHECK(t3f.features[0].h_u.shape() == Shape{1, 8, 32, 32});
}

TEST_CASE("two forwards with identical weights and input are bit-identical") {
  SplitMix64 rng(12);
  Tensor lr = testutil::random_tensor(Shape{2, 3, 12, 12}, rng, 0, 1);
  LaudModel model = LaudModel::init(micro_config(3), 8);
  laud::ForwardTrace a = model.forward(lr);
  laud::ForwardTrace b = model.forward(lr);
  for (size_t k = 0; k < a.sr_images.size(); ++k) {
    CHECK(testutil::bit_equal(a.sr_images[k], b.sr_images[k]));
    CHECK(testutil::bit_equal(a.detail_images[k], b.detail_images[k]));
  }
}

TEST_CASE("initialization is reproducible from the seed") {
  LaudModel a = LaudModel::init(micro_config(3), 99);
  LaudModel b = LaudModel::init(micro_config(3), 99);
  LaudModel c = LaudModel::init(micro_config(3), 100);
  auto pa = a.named_parameters(), pb = b.named_parameters(),
       pc = c.named_parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff_c = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(testutil::bit_equal(pa[i].second, pb[i].second));
    if (!testutil::bit_equal(pa[i].second, pc[i].second)) any_diff_c = true;
  }
  CHECK(any_diff_c);
}

TEST_CASE("parameter counts reproduce the reference growth pattern") {
  LaudConfig paper;
  paper.scale = 2;
  paper.residual_blocks = 4;
  paper.channels = 256;

  const std::vector<double> reference{8.40e6, 18.57e6, 29.33e6, 40.69e6};
  std::vector<int64_t> counts;
  for (int k = 1; k <= 4; ++k) {
    paper.rudp_steps = k;
    counts.push_back(laud::parameter_count(paper));
    const double rel = std::abs(static_cast<double>(counts.back()) -
                                reference[static_cast<size_t>(k - 1)]) /
                       reference[static_cast<size_t>(k - 1)];
    CHECK(rel < 0.10);
  }
  // successive-difference growth: the concat shallow conv adds C^2*9 per K
  const int64_t second_diff =
      (counts[2] - counts[1]) - (counts[1] - counts[0]);
  CHECK(std::abs(static_cast<double>(second_diff) - 256.0 * 256.0 * 9.0) /
            (256.0 * 256.0 * 9.0) <
        0.10);
}

TEST_CASE("parameter count of the tiniest config matches a hand enumeration") {
  LaudConfig tiny;
  tiny.scale = 2;
  tiny.rudp_steps = 1;
  tiny.residual_blocks = 1;
  tiny.channels = 1;
  // shallow 1x3x3x3+1 = 28; rb: 2*(9+1) = 20; deconv k4: 16+1 = 17;
  // up conv 9+1 = 10; detail 3*(9+1) = 30; two 1x1 heads 2*(3+3) = 12.
  CHECK(laud::parameter_count(tiny) == 28 + 20 + 17 + 10 + 30 + 12);
}

TEST_CASE("step-k input channels follow 3 + C*(k-1)") {
  LaudConfig cfg = micro_config(3);
  LaudModel model = LaudModel::init(cfg, 13);
  for (int k = 0; k < 3; ++k)
    CHECK(model.step_params(k).shallow.weight.shape().c == 3 + 8 * k);
}

TEST_CASE("checkpoint round trip: bytes, config and forward equivalence") {
  const auto dir = testutil::fresh_dir("model_ckpt");
  LaudModel model = LaudModel::init(micro_config(2), 21);
  model.save(dir / "m.laud");

  LaudModel loaded = LaudModel::load(dir / "m.laud");
  CHECK(loaded.config().channels == model.config().channels);
  CHECK(loaded.config().rudp_steps == model.config().rudp_steps);

  // save -> load -> save is byte identical
  loaded.save(dir / "m2.laud");
  std::ifstream f1(dir / "m.laud", std::ios::binary);
  std::ifstream f2(dir / "m2.laud", std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)), {});
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  // fresh weights live on the f32 grid, so the forward pass is bit-equal
  SplitMix64 rng(22);
  Tensor lr = testutil::random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  laud::ForwardTrace ta = model.forward(lr);
  laud::ForwardTrace tb = loaded.forward(lr);
  for (size_t k = 0; k < ta.sr_images.size(); ++k)
    CHECK(testutil::bit_equal(ta.sr_images[k], tb.sr_images[k]));
}

TEST_CASE("loading rejects foreign or corrupt archives") {
  const auto dir = testutil::fresh_dir("model_badckpt");
  {
    std::ofstream f(dir / "bad.laud", std::ios::binary);
    f << "JUNKJUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(LaudModel::load(dir / "bad.laud"), laud::FormatError);

  // archive without a config key
  laud::TensorArchive arch;
  arch.add("x", Tensor::zeros(Shape{1, 1, 1, 1}));
  arch.save(dir / "noconfig.laud");
  CHECK_THROWS_AS(LaudModel::load(dir / "noconfig.laud"), laud::FormatError);
}

TEST_CASE("invalid configs are rejected") {
  LaudConfig bad = micro_config(1);
  bad.scale = 3;
  CHECK_THROWS_AS(LaudModel::init(bad, 1), laud::ConfigError);
  bad = micro_config(0);
  CHECK_THROWS_AS(laud::parameter_count(bad), laud::ConfigError);
  LaudModel model = LaudModel::init(micro_config(1), 1);
  SplitMix64 rng(1);
  Tensor five_ch = testutil::random_tensor(Shape{1, 5, 8, 8}, rng, 0, 1);
  CHECK_THROWS_AS(model.forward(five_ch), laud::ConfigError);
}
