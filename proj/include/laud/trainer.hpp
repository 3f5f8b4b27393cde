#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "laud/data.hpp"
#include "laud/loss.hpp"
#include "laud/model.hpp"
#include "laud/optim.hpp"

namespace laud {

struct TrainSettings {
  int epochs = 1;
  int batch = 4;
  double initial_lr = 1e-3;
  std::vector<double> milestones = {0.5, 0.8, 0.9, 0.96};
  uint64_t seed = 0;
  int crop = 32;          // HR crop size; 0 = whole image
  int log_every = 10;     // steps between log entries (first/last always kept)
  int val_every = 0;      // validate every N steps; 0 = once, at end of training
  bool augment = true;
  bool deterministic = true;
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables
};

struct TrainConfig {
  std::string preset;  // "", "micro" or "paper"
  LaudConfig model;
  LossConfig loss;
  TrainSettings train;
  std::string train_manifest;
  std::string val_manifest;
  std::string checkpoint_dir = "runs";
};

/// Parse a config JSON. Preset defaults are applied first, explicit keys win.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& c);

struct RunLogEntry {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  LossReport loss;
  std::optional<double> val_psnr, val_ssim;
};

nlohmann::ordered_json runlog_entry_to_json(const RunLogEntry& e);
std::string runlog_to_jsonl(const std::vector<RunLogEntry>& log);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::vector<RunLogEntry> log;
  double best_val_psnr = 0.0;
  bool has_validation = false;
};

/// Full optimization run: forward / weighted loss / backward / Adam step with
/// the milestone LR schedule, epoch-shuffled batches, periodic validation and
/// checkpointing. Deterministic for a fixed config and seed. A non-finite
/// loss aborts with the pre-step parameters saved and a diagnostics dump.
TrainResult train(const TrainConfig& config);

/// Mean PSNR/SSIM of the model over a manifest's full images (LR synthesized
/// with the training kernel, border crop = scale).
std::pair<double, double> evaluate_model(const LaudModel& model,
                                         const DatasetManifest& manifest);

/// Mean PSNR of plain bicubic upscaling over a manifest (the baseline).
double bicubic_baseline_psnr(const DatasetManifest& manifest);

struct ComparisonRow {
  std::string name;
  int64_t param_count = 0;
  std::vector<double> psnrs, ssims;  // one entry per seed
  double median_psnr = 0.0;
  double median_ssim = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// Train every (variant, seed) pair under identical data order and report
/// median validation metrics per variant.
ComparisonTable run_ablation(const TrainConfig& base,
                             const std::vector<std::string>& variants,
                             const std::vector<uint64_t>& seeds);

/// Same runner over RUDP step counts.
ComparisonTable run_k_sweep(const TrainConfig& base,
                            const std::vector<int>& k_values,
                            const std::vector<uint64_t>& seeds);

struct BenchResult {
  int64_t param_count = 0;
  int64_t peak_memory_bytes = 0;
  double seconds_per_train_step = 0.0;
  double ms_per_inference = 0.0;
  int warmup_iters = 0;
  int measured_iters = 0;
  bool dry = false;
};

nlohmann::ordered_json bench_to_json(const BenchResult& r);

/// Parameter count, working-set estimate and train/inference timings on a
/// synthetic input. Warm-up iterations never enter the averages. dry=true
/// skips all measurement and reports the symbolic count only.
BenchResult bench(const LaudConfig& model_cfg, const LossConfig& loss_cfg,
                  int lr_size, int batch, int warmup, int iters, bool dry,
                  uint64_t seed);

}  // namespace laud
