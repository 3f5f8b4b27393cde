#include "laud/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "laud/metrics.hpp"

namespace laud {

namespace {

void apply_preset(TrainConfig& c) {
  if (c.preset.empty()) return;
  if (c.preset == "micro") {
    c.model.channels = 32;
    c.model.residual_blocks = 2;
    c.model.rudp_steps = 3;
    c.train.batch = 4;
    c.train.crop = 32;
    c.train.initial_lr = 1e-3;
    c.train.milestones = {0.5, 0.8, 0.9, 0.96};
  } else if (c.preset == "paper") {
    c.model.channels = 256;
    c.model.residual_blocks = 4;
    c.model.rudp_steps = 3;
    c.train.batch = 16;
    c.train.crop = 128;
    c.train.epochs = 25;
    c.train.initial_lr = 2e-4;
    c.train.milestones = {0.5, 0.8, 0.9, 0.96};
  } else {
    throw ConfigError("unknown preset '" + c.preset + "'");
  }
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig c;
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("weights")) c.weights = j["weights"].get<std::vector<double>>();
  if (j.contains("detail_norm")) {
    const std::string n = j["detail_norm"].get<std::string>();
    if (n == "l1")
      c.detail_norm = LossConfig::Norm::l1;
    else if (n == "l2")
      c.detail_norm = LossConfig::Norm::l2;
    else
      throw ConfigError("detail_norm must be 'l1' or 'l2', got '" + n + "'");
  }
  c.detail_enabled = j.value("detail_enabled", c.detail_enabled);
  c.rudp_all_steps = j.value("rudp_all_steps", c.rudp_all_steps);
  return c;
}

nlohmann::ordered_json loss_config_to_json(const LossConfig& c) {
  return {{"lambda", c.lambda},
          {"weights", c.weights},
          {"detail_norm", c.detail_norm == LossConfig::Norm::l1 ? "l1" : "l2"},
          {"detail_enabled", c.detail_enabled},
          {"rudp_all_steps", c.rudp_all_steps}};
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.preset = j.value("preset", "");
  apply_preset(c);
  if (j.contains("model")) {
    const auto& m = j["model"];
    LaudConfig base = c.model;
    base.scale = m.value("scale", base.scale);
    base.rudp_steps = m.value("rudp_steps", base.rudp_steps);
    base.residual_blocks = m.value("residual_blocks", base.residual_blocks);
    base.channels = m.value("channels", base.channels);
    base.leaky_slope = m.value("leaky_slope", base.leaky_slope);
    c.model = base;
  }
  if (j.contains("loss")) {
    nlohmann::json merged = loss_config_to_json(c.loss);
    merged.update(j["loss"]);
    c.loss = loss_config_from_json(merged);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch = t.value("batch", c.train.batch);
    c.train.initial_lr = t.value("initial_lr", c.train.initial_lr);
    if (t.contains("milestones"))
      c.train.milestones = t["milestones"].get<std::vector<double>>();
    c.train.seed = t.value("seed", c.train.seed);
    c.train.crop = t.value("crop", c.train.crop);
    c.train.log_every = t.value("log_every", c.train.log_every);
    c.train.val_every = t.value("val_every", c.train.val_every);
    c.train.augment = t.value("augment", c.train.augment);
    c.train.deterministic = t.value("deterministic", c.train.deterministic);
    c.train.clip_norm = t.value("clip_norm", c.train.clip_norm);
  }
  if (j.contains("data")) {
    c.train_manifest = j["data"].value("train", "");
    c.val_manifest = j["data"].value("val", "");
  }
  if (j.contains("out"))
    c.checkpoint_dir = j["out"].value("checkpoint_dir", c.checkpoint_dir);
  return c;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  return {{"preset", c.preset},
          {"model", laud_config_to_json(c.model)},
          {"loss", loss_config_to_json(c.loss)},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch", c.train.batch},
            {"initial_lr", c.train.initial_lr},
            {"milestones", c.train.milestones},
            {"seed", c.train.seed},
            {"crop", c.train.crop},
            {"log_every", c.train.log_every},
            {"val_every", c.train.val_every},
            {"augment", c.train.augment},
            {"deterministic", c.train.deterministic},
            {"clip_norm", c.train.clip_norm}}},
          {"data", {{"train", c.train_manifest}, {"val", c.val_manifest}}},
          {"out", {{"checkpoint_dir", c.checkpoint_dir}}}};
}

nlohmann::ordered_json runlog_entry_to_json(const RunLogEntry& e) {
  nlohmann::ordered_json j{{"step", e.step},
                           {"epoch", e.epoch},
                           {"lr", e.lr},
                           {"sr_loss", e.loss.sr_loss},
                           {"detail_loss", e.loss.detail_loss},
                           {"combined", e.loss.combined},
                           {"total", e.loss.total}};
  if (e.val_psnr) {
    j["val_psnr"] = *e.val_psnr;
    j["val_ssim"] = *e.val_ssim;
  }
  return j;
}

std::string runlog_to_jsonl(const std::vector<RunLogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    out += runlog_entry_to_json(e).dump();
    out += "\n";
  }
  return out;
}

std::pair<double, double> evaluate_model(const LaudModel& model,
                                         const DatasetManifest& manifest) {
  const int s = model.config().scale;
  const ResampleKernel kernel = ResampleKernel::bicubic();
  double psnr_acc = 0.0, ssim_acc = 0.0;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    Tensor hr = load_hr_image(manifest, i);
    Tensor lr = resample_down(hr, s, kernel);
    ForwardTrace trace = model.forward(lr);
    const Tensor& sr = trace.sr_images.back();
    psnr_acc += psnr(sr, hr, s);
    ssim_acc += ssim(sr, hr, s);
  }
  const auto n = static_cast<double>(manifest.entries.size());
  return {psnr_acc / n, ssim_acc / n};
}

double bicubic_baseline_psnr(const DatasetManifest& manifest) {
  const ResampleKernel kernel = ResampleKernel::bicubic();
  double acc = 0.0;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    Tensor hr = load_hr_image(manifest, i);
    Tensor lr = resample_down(hr, manifest.scale, kernel);
    Tensor up = resample_up(lr, manifest.scale, kernel);
    acc += psnr(up, hr, manifest.scale);
  }
  return acc / static_cast<double>(manifest.entries.size());
}

TrainResult train(const TrainConfig& config) {
  if (config.train_manifest.empty())
    throw ConfigError("train config names no training manifest");
  const DatasetManifest train_set =
      load_manifest(config.train_manifest, config.model.scale);
  std::optional<DatasetManifest> val_set;
  if (!config.val_manifest.empty())
    val_set = load_manifest(config.val_manifest, config.model.scale);

  if (static_cast<int>(config.loss.weights.size()) != config.model.rudp_steps)
    throw ConfigError("loss has " +
                      std::to_string(config.loss.weights.size()) +
                      " weights for rudp_steps=" +
                      std::to_string(config.model.rudp_steps));

  const std::filesystem::path ckpt_dir = config.checkpoint_dir;
  std::filesystem::create_directories(ckpt_dir);

  LaudModel model = LaudModel::init(config.model, config.train.seed);
  Adam adam(model.named_parameters(), AdamConfig{config.train.initial_lr});
  const AugmentSpec augment =
      config.train.augment ? AugmentSpec{} : AugmentSpec::none();
  BatchStream stream(train_set, config.train.batch, config.train.crop, augment,
                     ResampleKernel::bicubic(),
                     derive_seed(config.train.seed, "data"));

  TrainResult result;
  result.final_checkpoint = ckpt_dir / "final.laud";
  result.best_checkpoint = ckpt_dir / "best.laud";
  const int64_t total_steps =
      static_cast<int64_t>(config.train.epochs) * stream.batches_per_epoch();

  auto validate = [&](int64_t step, int64_t epoch, const LossReport& report,
                      double lr) {
    RunLogEntry entry{step, epoch, lr, report, std::nullopt, std::nullopt};
    if (val_set) {
      auto [p, s] = evaluate_model(model, *val_set);
      entry.val_psnr = p;
      entry.val_ssim = s;
      result.has_validation = true;
      if (p > result.best_val_psnr || result.best_val_psnr == 0.0) {
        result.best_val_psnr = p;
        model.save(result.best_checkpoint);
      }
    }
    result.log.push_back(std::move(entry));
  };

  int64_t step = 0;
  for (int64_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.train.epochs,
                                  config.train.initial_lr,
                                  config.train.milestones);
    adam.set_lr(lr);
    stream.begin_epoch(epoch);
    while (auto batch = stream.next()) {
      ForwardTrace trace = model.forward(batch->lr);
      auto [loss, report] = total_loss(trace, batch->hr, batch->d_gt,
                                       config.loss);
      if (!std::isfinite(report.total)) {
        // Parameters have not been stepped with the bad gradient yet.
        model.save(ckpt_dir / "last_good.laud");
        nlohmann::ordered_json diag{{"step", step + 1},
                                    {"epoch", epoch},
                                    {"lr", lr},
                                    {"sr_loss", report.sr_loss},
                                    {"detail_loss", report.detail_loss},
                                    {"combined", report.combined},
                                    {"total", report.total}};
        std::ofstream(ckpt_dir / "nan_diagnostics.json") << diag.dump(2) << "\n";
        throw NumericError("non-finite loss at step " + std::to_string(step + 1) +
                           "; last good checkpoint kept at " +
                           (ckpt_dir / "last_good.laud").string());
      }
      loss.backward();
      if (config.train.clip_norm > 0.0)
        adam.clip_grad_norm(config.train.clip_norm);
      adam.step();
      adam.zero_grad();
      ++step;

      const bool want_val =
          config.train.val_every > 0 && step % config.train.val_every == 0;
      const bool want_log = step == 1 || step == total_steps || want_val ||
                            (config.train.log_every > 0 &&
                             step % config.train.log_every == 0);
      if (want_val)
        validate(step, epoch, report, lr);
      else if (want_log)
        result.log.push_back(RunLogEntry{step, epoch, lr, report});
    }
    if (epoch + 1 == config.train.epochs && val_set) {
      // Final validation entry (reuses the last logged report if any).
      LossReport last = result.log.empty() ? LossReport{} : result.log.back().loss;
      validate(step, epoch, last, lr);
    }
  }

  model.save(result.final_checkpoint);
  if (!result.has_validation)
    model.save(result.best_checkpoint);  // degenerate: best == final
  std::ofstream(ckpt_dir / "runlog.jsonl") << runlog_to_jsonl(result.log);
  return result;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ComparisonRow run_variant(const TrainConfig& cfg, const std::string& name,
                          const std::vector<uint64_t>& seeds) {
  ComparisonRow row;
  row.name = name;
  row.param_count = parameter_count(cfg.model);
  for (uint64_t seed : seeds) {
    TrainConfig run = cfg;
    run.train.seed = seed;
    run.checkpoint_dir =
        (std::filesystem::path(cfg.checkpoint_dir) / (name + "_seed" + std::to_string(seed)))
            .string();
    TrainResult r = train(run);
    LaudModel model = LaudModel::load(r.final_checkpoint);
    const DatasetManifest val = load_manifest(run.val_manifest, run.model.scale);
    auto [p, s] = evaluate_model(model, val);
    row.psnrs.push_back(p);
    row.ssims.push_back(s);
  }
  row.median_psnr = median(row.psnrs);
  row.median_ssim = median(row.ssims);
  return row;
}

}  // namespace

nlohmann::ordered_json ComparisonTable::to_json() const {
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"name", r.name},
                         {"param_count", r.param_count},
                         {"psnr", r.psnrs},
                         {"ssim", r.ssims},
                         {"median_psnr", r.median_psnr},
                         {"median_ssim", r.median_ssim}});
  nlohmann::ordered_json deltas = nlohmann::ordered_json::array();
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = i + 1; j < rows.size(); ++j)
      deltas.push_back({{"pair", rows[j].name + "-" + rows[i].name},
                        {"delta_median_psnr",
                         rows[j].median_psnr - rows[i].median_psnr},
                        {"delta_median_ssim",
                         rows[j].median_ssim - rows[i].median_ssim}});
  return {{"rows", rows_json}, {"pairwise_deltas", deltas}};
}

std::string ComparisonTable::to_text() const {
  std::string out = "variant     params     median PSNR   median SSIM   runs\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s %9lld %12.4f %13.5f %6zu\n",
                  r.name.c_str(), static_cast<long long>(r.param_count),
                  r.median_psnr, r.median_ssim, r.psnrs.size());
    out += buf;
  }
  return out;
}

ComparisonTable run_ablation(const TrainConfig& base,
                             const std::vector<std::string>& variants,
                             const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (base.val_manifest.empty())
    throw ConfigError("ablation needs a validation manifest");
  ComparisonTable table;
  for (const std::string& v : variants) {
    auto [model_cfg, loss_cfg] = ablation_variant(v, base.model);
    TrainConfig cfg = base;
    cfg.model = model_cfg;
    cfg.loss = loss_cfg;
    table.rows.push_back(run_variant(cfg, v, seeds));
  }
  return table;
}

ComparisonTable run_k_sweep(const TrainConfig& base,
                            const std::vector<int>& k_values,
                            const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("k-sweep needs at least one seed");
  if (base.val_manifest.empty())
    throw ConfigError("k-sweep needs a validation manifest");
  ComparisonTable table;
  for (int k : k_values) {
    TrainConfig cfg = base;
    cfg.model.rudp_steps = k;
    cfg.loss.weights.assign(static_cast<size_t>(k), 1.0);
    if (k == 3) cfg.loss.weights = {1, 3, 10};
    if (k == 2) cfg.loss.weights = {1, 3};
    table.rows.push_back(run_variant(cfg, "K" + std::to_string(k), seeds));
  }
  return table;
}

namespace {

// Bytes of every distinct tensor reachable from `t` through the tape,
// counting value and gradient storage.
int64_t graph_bytes(const Tensor& t) {
  std::unordered_set<const detail::TensorNode*> seen;
  std::vector<const detail::TensorNode*> stack{t.node().get()};
  int64_t bytes = 0;
  while (!stack.empty()) {
    const detail::TensorNode* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    bytes += static_cast<int64_t>(n->data.size()) * 2 * 8;  // data + grad
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  return bytes;
}

}  // namespace

nlohmann::ordered_json bench_to_json(const BenchResult& r) {
  return {{"param_count", r.param_count},
          {"peak_memory_bytes", r.peak_memory_bytes},
          {"seconds_per_train_step", r.seconds_per_train_step},
          {"ms_per_inference", r.ms_per_inference},
          {"warmup_iters", r.warmup_iters},
          {"measured_iters", r.measured_iters},
          {"dry", r.dry}};
}

BenchResult bench(const LaudConfig& model_cfg, const LossConfig& loss_cfg,
                  int lr_size, int batch, int warmup, int iters, bool dry,
                  uint64_t seed) {
  BenchResult result;
  result.param_count = parameter_count(model_cfg);
  result.dry = dry;
  if (dry) return result;
  if (iters < 1 || warmup < 0) throw ConfigError("bad bench iteration counts");
  result.warmup_iters = warmup;
  result.measured_iters = iters;

  LaudModel model = LaudModel::init(model_cfg, seed);
  Adam adam(model.named_parameters(), AdamConfig{1e-4});
  SplitMix64 rng(derive_seed(seed, "bench-data"));
  const int s = model_cfg.scale;
  auto random_image = [&](int64_t b, int64_t hw) {
    Tensor t = Tensor::zeros(Shape{b, 3, hw, hw});
    for (double& v : t.mutable_data()) v = rng.next_double();
    return t;
  };
  Tensor lr = random_image(batch, lr_size);
  Tensor hr = random_image(batch, static_cast<int64_t>(lr_size) * s);
  Tensor d_gt = detail_target(hr, s, ResampleKernel::bicubic());

  auto train_step = [&]() {
    ForwardTrace trace = model.forward(lr);
    auto [loss, report] = total_loss(trace, hr, d_gt, loss_cfg);
    loss.backward();
    adam.step();
    adam.zero_grad();
    return report.total;
  };

  // Working-set estimate: parameters (value/grad/two Adam moments) plus the
  // retained tape of one forward+loss.
  {
    ForwardTrace trace = model.forward(lr);
    auto [loss, report] = total_loss(trace, hr, d_gt, loss_cfg);
    const int64_t param_bytes = result.param_count * (8 + 8 + 16);
    result.peak_memory_bytes = param_bytes + graph_bytes(loss);
  }

  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) train_step();
  auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i) train_step();
  auto t1 = Clock::now();
  result.seconds_per_train_step =
      std::chrono::duration<double>(t1 - t0).count() / iters;

  Tensor infer_input = random_image(1, lr_size);
  for (int i = 0; i < warmup; ++i) model.forward(infer_input);
  t0 = Clock::now();
  for (int i = 0; i < iters; ++i) model.forward(infer_input);
  t1 = Clock::now();
  result.ms_per_inference =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
  return result;
}

}  // namespace laud
