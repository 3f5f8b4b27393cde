#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "laud/checkpoint.hpp"
#include "laud/nn_ops.hpp"
#include "laud/tensor.hpp"

namespace laud {

struct LaudConfig {
  int scale = 2;            // upscaling factor s: {2,4,8}
  int rudp_steps = 3;       // K
  int residual_blocks = 4;  // N
  int channels = 256;       // C
  double leaky_slope = 0.2;
};

nlohmann::ordered_json laud_config_to_json(const LaudConfig& c);
LaudConfig laud_config_from_json(const nlohmann::json& j);

/// Deconvolution geometry per scale; the paired downscale layer is always a
/// 3x3 convolution with stride = scale, pad 1, so spatial sizes stay exact
/// multiples for any input size.
struct DeconvGeometry {
  int kernel;
  int stride;
  int pad;
};
DeconvGeometry deconv_geometry(int scale);

/// Everything the forward pass produces: K SR images and K detail images
/// (all HR-sized, 3-channel), plus the intermediate feature maps when
/// requested for dumps. sr_images.back() is the designated output.
struct ForwardTrace {
  std::vector<Tensor> sr_images;
  std::vector<Tensor> detail_images;
  struct StepFeatures {
    Tensor h_u, h_d, h_sr;
  };
  std::vector<StepFeatures> features;
};

struct ResBlock {
  ConvParams conv1, conv2;
};

/// Parameter group of one RUDP step. Steps own their parameters; nothing is
/// shared between steps.
struct StepParams {
  ConvParams shallow;                       // (3 + C*(k-1)) -> C
  std::vector<ResBlock> blocks;             // N blocks, C -> C
  ConvParams up_deconv;                     // learned upsampler, C -> C
  ConvParams up_conv;                       // C -> C after the deconv
  std::array<ConvParams, 3> detail_convs;   // detail branch, C -> C
  ConvParams down_strided, down_conv;       // only on steps that feed step k+1
  bool has_down = false;
  ConvParams to_rgb_sr, to_rgb_detail;      // 1x1 heads, C -> 3
};

class LaudModel {
 public:
  LaudModel() = default;

  /// Build a model with Kaiming-uniform weights (LeakyReLU gain) and zero
  /// biases, reproducible from the seed. Initial values are rounded to the
  /// f32 grid so a fresh model round-trips checkpoints bit-exactly.
  static LaudModel init(const LaudConfig& config, uint64_t seed);

  const LaudConfig& config() const { return config_; }
  int steps() const { return static_cast<int>(steps_.size()); }
  const StepParams& step_params(int k) const { return steps_.at(k); }
  StepParams& step_params_mut(int k) { return steps_.at(k); }

  /// H_0 = shallow(input); H_n = H_{n-1} + RB_n(H_{n-1}); returns H_N.
  Tensor feature_extract(const Tensor& input, int step) const;

  /// Returns (H_U, H_D, H_SR): upsampled features, detail features from
  /// three stacked convolutions, and their elementwise sum.
  std::tuple<Tensor, Tensor, Tensor> upscale_block(const Tensor& h_n,
                                                   int step) const;

  /// Strided conv + conv bringing an HR feature map back to LR size.
  Tensor downscale_block(const Tensor& h_sr, int step) const;

  /// Full K-step pass over a 3-channel LR image.
  ForwardTrace forward(const Tensor& lr, bool retain_features = false) const;

  /// Parameters in the canonical (checkpoint) order.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  int64_t parameter_count() const;

  TensorArchive to_archive() const;
  static LaudModel from_archive(const TensorArchive& archive);
  void save(const std::filesystem::path& path) const;
  static LaudModel load(const std::filesystem::path& path);

 private:
  LaudConfig config_;
  std::vector<StepParams> steps_;
};

/// Total learnable scalars for a config, computed symbolically.
int64_t parameter_count(const LaudConfig& config);

}  // namespace laud
