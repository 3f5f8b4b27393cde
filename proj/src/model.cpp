#include "laud/model.hpp"

#include <cmath>

#include "laud/rng.hpp"

namespace laud {

nlohmann::ordered_json laud_config_to_json(const LaudConfig& c) {
  return {{"scale", c.scale},
          {"rudp_steps", c.rudp_steps},
          {"residual_blocks", c.residual_blocks},
          {"channels", c.channels},
          {"leaky_slope", c.leaky_slope}};
}

LaudConfig laud_config_from_json(const nlohmann::json& j) {
  LaudConfig c;
  c.scale = j.value("scale", c.scale);
  c.rudp_steps = j.value("rudp_steps", c.rudp_steps);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.channels = j.value("channels", c.channels);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  return c;
}

DeconvGeometry deconv_geometry(int scale) {
  switch (scale) {
    case 2:
      return {4, 2, 1};
    case 4:
      return {8, 4, 2};
    case 8:
      return {12, 8, 2};
    default:
      throw ConfigError("unsupported scale " + std::to_string(scale) +
                        " (expected 2, 4 or 8)");
  }
}

namespace {

struct LayerSpec {
  std::string name;
  int64_t w_out, w_in;  // weight shape slots (b, c)
  int k, stride, pad;
  bool transposed;

  int64_t bias_count() const { return transposed ? w_in : w_out; }
  int64_t param_count() const { return w_out * w_in * k * k + bias_count(); }
};

void validate_config(const LaudConfig& c) {
  deconv_geometry(c.scale);  // throws on bad scale
  if (c.rudp_steps < 1) throw ConfigError("rudp_steps must be >= 1");
  if (c.residual_blocks < 1) throw ConfigError("residual_blocks must be >= 1");
  if (c.channels < 1) throw ConfigError("channels must be >= 1");
  if (!(c.leaky_slope > 0.0 && c.leaky_slope < 1.0))
    throw ConfigError("leaky_slope must lie in (0,1)");
}

// Canonical layer list; model construction, parameter counting and the
// checkpoint layout all derive from this single enumeration.
std::vector<LayerSpec> enumerate_layers(const LaudConfig& c) {
  validate_config(c);
  const int64_t C = c.channels;
  const DeconvGeometry up = deconv_geometry(c.scale);
  std::vector<LayerSpec> layers;
  for (int k = 0; k < c.rudp_steps; ++k) {
    const std::string prefix = "step" + std::to_string(k) + ".";
    const int64_t in_ch = 3 + C * k;  // I_LR plus all previous H_Down maps
    layers.push_back({prefix + "shallow", C, in_ch, 3, 1, 1, false});
    for (int n = 0; n < c.residual_blocks; ++n) {
      const std::string rb = prefix + "rb" + std::to_string(n) + ".";
      layers.push_back({rb + "conv1", C, C, 3, 1, 1, false});
      layers.push_back({rb + "conv2", C, C, 3, 1, 1, false});
    }
    layers.push_back(
        {prefix + "up.deconv", C, C, up.kernel, up.stride, up.pad, true});
    layers.push_back({prefix + "up.conv", C, C, 3, 1, 1, false});
    for (int j = 0; j < 3; ++j)
      layers.push_back(
          {prefix + "detail" + std::to_string(j), C, C, 3, 1, 1, false});
    if (k + 1 < c.rudp_steps) {
      layers.push_back({prefix + "down.strided", C, C, 3, c.scale, 1, false});
      layers.push_back({prefix + "down.conv", C, C, 3, 1, 1, false});
    }
    layers.push_back({prefix + "to_rgb_sr", 3, C, 1, 1, 0, false});
    layers.push_back({prefix + "to_rgb_detail", 3, C, 1, 1, 0, false});
  }
  return layers;
}

ConvParams init_layer(const LayerSpec& spec, double slope, SplitMix64& rng) {
  const Shape ws{spec.w_out, spec.w_in, spec.k, spec.k};
  const int64_t op_in = spec.transposed ? spec.w_out : spec.w_in;
  const double fan_in = static_cast<double>(op_in * spec.k * spec.k);
  const double gain = std::sqrt(2.0 / (1.0 + 5.0));  // see init note in header
  const double bound = gain * std::sqrt(3.0 / fan_in);
  std::vector<double> wdata(static_cast<size_t>(ws.numel()));
  for (double& v : wdata)
    v = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
  ConvParams p;
  p.weight = Tensor::from_data(ws, std::move(wdata), /*requires_grad=*/true);
  p.bias = Tensor::zeros(Shape{1, spec.bias_count(), 1, 1}, true);
  p.stride = spec.stride;
  p.padding = spec.pad;
  p.transposed = spec.transposed;
  return p;
}

// Walk the canonical layer order, handing each ConvParams slot to `fn`.
template <typename Model, typename Fn>
void for_each_layer(Model& model, Fn&& fn) {
  for (int k = 0; k < model.steps(); ++k) {
    auto& sp = const_cast<StepParams&>(model.step_params(k));
    const std::string prefix = "step" + std::to_string(k) + ".";
    fn(prefix + "shallow", sp.shallow);
    for (size_t n = 0; n < sp.blocks.size(); ++n) {
      const std::string rb = prefix + "rb" + std::to_string(n) + ".";
      fn(rb + "conv1", sp.blocks[n].conv1);
      fn(rb + "conv2", sp.blocks[n].conv2);
    }
    fn(prefix + "up.deconv", sp.up_deconv);
    fn(prefix + "up.conv", sp.up_conv);
    for (size_t j = 0; j < sp.detail_convs.size(); ++j)
      fn(prefix + "detail" + std::to_string(j), sp.detail_convs[j]);
    if (sp.has_down) {
      fn(prefix + "down.strided", sp.down_strided);
      fn(prefix + "down.conv", sp.down_conv);
    }
    fn(prefix + "to_rgb_sr", sp.to_rgb_sr);
    fn(prefix + "to_rgb_detail", sp.to_rgb_detail);
  }
}

}  // namespace

LaudModel LaudModel::init(const LaudConfig& config, uint64_t seed) {
  const auto layers = enumerate_layers(config);
  SplitMix64 rng(derive_seed(seed, "weight-init"));

  LaudModel model;
  model.config_ = config;
  model.steps_.resize(static_cast<size_t>(config.rudp_steps));
  for (int k = 0; k < config.rudp_steps; ++k) {
    model.steps_[static_cast<size_t>(k)].blocks.resize(
        static_cast<size_t>(config.residual_blocks));
    model.steps_[static_cast<size_t>(k)].has_down = k + 1 < config.rudp_steps;
  }
  size_t next = 0;
  for_each_layer(model, [&](const std::string& name, ConvParams& slot) {
    if (next >= layers.size() || layers[next].name != name)
      throw StateError("layer enumeration out of sync at '" + name + "'");
    slot = init_layer(layers[next], config.leaky_slope, rng);
    ++next;
  });
  return model;
}

Tensor LaudModel::feature_extract(const Tensor& input, int step) const {
  const StepParams& sp = steps_.at(static_cast<size_t>(step));
  const int64_t expected = sp.shallow.weight.shape().c;
  if (input.shape().c != expected)
    throw ConfigError("feature_extract step " + std::to_string(step) +
                      " expects " + std::to_string(expected) +
                      " input channels, got " + input.shape().str());
  Tensor h = conv2d(input, sp.shallow);
  for (const ResBlock& rb : sp.blocks) {
    Tensor r = conv2d(leaky_relu(conv2d(h, rb.conv1), config_.leaky_slope),
                      rb.conv2);
    h = add(h, r);
  }
  return h;
}

std::tuple<Tensor, Tensor, Tensor> LaudModel::upscale_block(const Tensor& h_n,
                                                            int step) const {
  const StepParams& sp = steps_.at(static_cast<size_t>(step));
  Tensor h_u = conv2d(
      leaky_relu(conv2d_transposed(h_n, sp.up_deconv), config_.leaky_slope),
      sp.up_conv);
  Tensor d = conv2d(h_u, sp.detail_convs[0]);
  d = conv2d(leaky_relu(d, config_.leaky_slope), sp.detail_convs[1]);
  Tensor h_d = conv2d(leaky_relu(d, config_.leaky_slope), sp.detail_convs[2]);
  Tensor h_sr = add(h_u, h_d);
  return {h_u, h_d, h_sr};
}

Tensor LaudModel::downscale_block(const Tensor& h_sr, int step) const {
  const StepParams& sp = steps_.at(static_cast<size_t>(step));
  if (!sp.has_down)
    throw ConfigError("step " + std::to_string(step) + " has no downscale block");
  return conv2d(leaky_relu(conv2d(h_sr, sp.down_strided), config_.leaky_slope),
                sp.down_conv);
}

ForwardTrace LaudModel::forward(const Tensor& lr, bool retain_features) const {
  if (lr.shape().c != 3)
    throw ConfigError("forward expects a 3-channel LR image, got " +
                      lr.shape().str());
  ForwardTrace trace;
  std::vector<Tensor> inputs{lr};
  for (int k = 0; k < static_cast<int>(steps_.size()); ++k) {
    Tensor input = inputs.size() == 1 ? lr : concat_channels(inputs);
    Tensor h_n = feature_extract(input, k);
    auto [h_u, h_d, h_sr] = upscale_block(h_n, k);
    trace.sr_images.push_back(conv2d(h_sr, steps_[k].to_rgb_sr));
    trace.detail_images.push_back(conv2d(h_d, steps_[k].to_rgb_detail));
    if (retain_features) trace.features.push_back({h_u, h_d, h_sr});
    if (k + 1 < static_cast<int>(steps_.size()))
      inputs.push_back(downscale_block(h_sr, k));
  }
  return trace;
}

std::vector<std::pair<std::string, Tensor>> LaudModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for_each_layer(*this, [&](const std::string& name, ConvParams& slot) {
    out.emplace_back(name + ".weight", slot.weight);
    out.emplace_back(name + ".bias", slot.bias);
  });
  return out;
}

int64_t LaudModel::parameter_count() const {
  return laud::parameter_count(config_);
}

int64_t parameter_count(const LaudConfig& config) {
  int64_t total = 0;
  for (const LayerSpec& l : enumerate_layers(config)) total += l.param_count();
  return total;
}

TensorArchive LaudModel::to_archive() const {
  TensorArchive arch;
  arch.set_meta({{"config", laud_config_to_json(config_)}});
  for (const auto& [name, t] : named_parameters()) arch.add(name, t);
  return arch;
}

LaudModel LaudModel::from_archive(const TensorArchive& archive) {
  const auto& meta = archive.meta();
  if (!meta.contains("config"))
    throw FormatError("archive header carries no model config");
  const LaudConfig config = laud_config_from_json(meta["config"]);
  const auto layers = enumerate_layers(config);

  LaudModel model;
  model.config_ = config;
  model.steps_.resize(static_cast<size_t>(config.rudp_steps));
  for (int k = 0; k < config.rudp_steps; ++k) {
    model.steps_[static_cast<size_t>(k)].blocks.resize(
        static_cast<size_t>(config.residual_blocks));
    model.steps_[static_cast<size_t>(k)].has_down = k + 1 < config.rudp_steps;
  }
  size_t next = 0;
  for_each_layer(model, [&](const std::string& name, ConvParams& slot) {
    const LayerSpec& spec = layers[next++];
    const Tensor& w = archive.find(name + ".weight");
    const Tensor& b = archive.find(name + ".bias");
    const Shape expected_w{spec.w_out, spec.w_in, spec.k, spec.k};
    if (!(w.shape() == expected_w) || b.numel() != spec.bias_count())
      throw FormatError("tensor '" + name + "' has unexpected shape " +
                        w.shape().str());
    slot.weight = Tensor::from_data(w.shape(), {w.data().begin(), w.data().end()},
                                    /*requires_grad=*/true);
    slot.bias = Tensor::from_data(b.shape(), {b.data().begin(), b.data().end()},
                                  /*requires_grad=*/true);
    slot.stride = spec.stride;
    slot.padding = spec.pad;
    slot.transposed = spec.transposed;
  });
  return model;
}

void LaudModel::save(const std::filesystem::path& path) const {
  to_archive().save(path);
}

LaudModel LaudModel::load(const std::filesystem::path& path) {
  return from_archive(TensorArchive::load(path));
}

}  // namespace laud
