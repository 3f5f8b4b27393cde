// Command-line front end: train / infer / eval / pyramid / ablate / bench.
// Exit codes: 0 ok, 2 config/format/geometry, 3 data, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "laud/metrics.hpp"
#include "laud/png_io.hpp"
#include "laud/pyramid.hpp"
#include "laud/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path, "config JSON path");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_flag("--deterministic", args.deterministic,
                "force the deterministic single-worker path");
  cmd->add_option("--set", args.overrides,
                  "dotted-key config override, e.g. loss.lambda=0")
      ->take_all();
}

json load_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw laud::ConfigError("cannot open config '" + path.string() + "'");
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw laud::ConfigError("config '" + path.string() +
                            "' is not valid JSON: " + e.what());
  }
}

void apply_overrides(json& config, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw laud::ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    std::replace(key.begin(), key.end(), '.', '/');
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    config[json::json_pointer("/" + key)] = parsed;
  }
}

laud::TrainConfig resolve_config(const CommonArgs& args, json& raw) {
  if (!args.config_path.empty())
    raw = load_json_file(args.config_path);
  apply_overrides(raw, args.overrides);
  laud::TrainConfig cfg = laud::train_config_from_json(raw);
  if (args.seed_set) cfg.train.seed = args.seed;
  if (args.deterministic) cfg.train.deterministic = true;
  return cfg;
}

void write_snapshot(const fs::path& out_dir, const ordered_json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "resolved_config.json") << resolved.dump(2) << "\n";
}

laud::Tensor offset_view(const laud::Tensor& signed_img) {
  std::span<const double> x = signed_img.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = std::clamp(x[i] + 0.5, 0.0, 1.0);
  return laud::Tensor::from_data(signed_img.shape(), std::move(out));
}

laud::Tensor clamp01(const laud::Tensor& img) {
  std::span<const double> x = img.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], 0.0, 1.0);
  return laud::Tensor::from_data(img.shape(), std::move(out));
}

// Tile a (1,C,H,W) feature map into a square grid of per-channel min-max
// normalized grayscale panes.
laud::Tensor feature_mosaic(const laud::Tensor& features, bool last16) {
  const laud::Shape s = features.shape();
  const int64_t first = last16 ? std::max<int64_t>(0, s.c - 16) : 0;
  const int64_t count = s.c - first;
  const auto grid = static_cast<int64_t>(
      std::ceil(std::sqrt(static_cast<double>(count))));
  std::vector<double> out(static_cast<size_t>(grid * s.h * grid * s.w), 0.0);
  std::span<const double> x = features.data();
  for (int64_t i = 0; i < count; ++i) {
    const double* plane = x.data() + (first + i) * s.h * s.w;
    double lo = plane[0], hi = plane[0];
    for (int64_t p = 0; p < s.h * s.w; ++p) {
      lo = std::min(lo, plane[p]);
      hi = std::max(hi, plane[p]);
    }
    const double range = hi > lo ? hi - lo : 1.0;
    const int64_t ty = i / grid, tx = i % grid;
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t xx = 0; xx < s.w; ++xx)
        out[static_cast<size_t>((ty * s.h + y) * grid * s.w + tx * s.w + xx)] =
            (plane[y * s.w + xx] - lo) / range;
  }
  return laud::Tensor::from_data(laud::Shape{1, 1, grid * s.h, grid * s.w},
                                 std::move(out));
}

int cmd_train(const CommonArgs& args) {
  json raw;
  laud::TrainConfig cfg = resolve_config(const_cast<CommonArgs&>(args), raw);
  cfg.checkpoint_dir = args.out_dir;
  write_snapshot(args.out_dir, laud::train_config_to_json(cfg));
  laud::TrainResult result = laud::train(cfg);
  std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
  if (result.has_validation)
    std::cout << "best val PSNR: " << result.best_val_psnr << " dB\n";
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& checkpoint,
              const std::vector<std::string>& inputs, bool all_steps,
              bool dump_features, bool last16) {
  laud::LaudModel model = laud::LaudModel::load(checkpoint);
  fs::create_directories(args.out_dir);
  ordered_json resolved{{"checkpoint", checkpoint},
                        {"model", laud::laud_config_to_json(model.config())},
                        {"all_steps", all_steps},
                        {"dump_features", dump_features},
                        {"last16", last16}};
  write_snapshot(args.out_dir, resolved);

  const fs::path out_dir = args.out_dir;
  for (const std::string& input : inputs) {
    laud::Tensor lr = laud::read_png(input);
    laud::ForwardTrace trace = model.forward(lr, dump_features);
    const std::string stem = fs::path(input).stem().string();
    laud::write_png(out_dir / (stem + "_sr.png"),
                    clamp01(trace.sr_images.back()));
    if (all_steps) {
      for (size_t k = 0; k < trace.sr_images.size(); ++k) {
        const std::string suffix = "_step" + std::to_string(k + 1) + ".png";
        laud::write_png(out_dir / (stem + "_sr" + suffix),
                        clamp01(trace.sr_images[k]));
        laud::write_png(out_dir / (stem + "_detail" + suffix),
                        offset_view(trace.detail_images[k]));
      }
    }
    if (dump_features) {
      for (size_t k = 0; k < trace.features.size(); ++k) {
        const std::string suffix = "_step" + std::to_string(k + 1) + ".png";
        const auto& f = trace.features[k];
        laud::write_png(out_dir / (stem + "_h_u" + suffix),
                        feature_mosaic(f.h_u, last16));
        laud::write_png(out_dir / (stem + "_h_d" + suffix),
                        feature_mosaic(f.h_d, last16));
        laud::write_png(out_dir / (stem + "_h_sr" + suffix),
                        feature_mosaic(f.h_sr, last16));
      }
    }
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& sr_dir,
             const std::string& hr_dir, int scale, bool no_round) {
  auto list_pngs = [](const fs::path& dir) {
    if (!fs::is_directory(dir))
      throw laud::DataError("'" + dir.string() + "' is not a directory");
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png")
        names.insert(e.path().filename().string());
    return names;
  };
  const auto sr_names = list_pngs(sr_dir);
  const auto hr_names = list_pngs(hr_dir);
  std::vector<std::string> unmatched;
  for (const auto& n : sr_names)
    if (!hr_names.count(n)) unmatched.push_back(n + " (sr only)");
  for (const auto& n : hr_names)
    if (!sr_names.count(n)) unmatched.push_back(n + " (hr only)");
  if (!unmatched.empty()) {
    std::string msg = "unmatched filenames between sr and hr directories:";
    for (const auto& n : unmatched) msg += "\n  " + n;
    throw laud::DataError(msg);
  }

  laud::MetricReport report;
  report.scale = scale;
  report.border_crop = scale;
  for (const auto& name : sr_names) {
    laud::Tensor sr = laud::read_png(fs::path(sr_dir) / name);
    laud::Tensor hr = laud::read_png(fs::path(hr_dir) / name);
    report.per_image.push_back(
        {name, laud::psnr(sr, hr, scale, !no_round),
         laud::ssim(sr, hr, scale, !no_round)});
  }
  report.finalize();

  fs::create_directories(args.out_dir);
  ordered_json per_image = ordered_json::array();
  for (const auto& m : report.per_image)
    per_image.push_back(
        {{"name", m.name},
         {"psnr_db", std::isinf(m.psnr_db) ? json("inf") : json(m.psnr_db)},
         {"ssim", m.ssim}});
  ordered_json j{{"scale", report.scale},
                 {"border_crop", report.border_crop},
                 {"per_image", per_image},
                 {"mean_psnr", report.mean_psnr},
                 {"mean_ssim", report.mean_ssim}};
  std::ofstream(fs::path(args.out_dir) / "report.json") << j.dump(2) << "\n";
  std::ofstream(fs::path(args.out_dir) / "report.txt") << report.to_text();
  write_snapshot(args.out_dir, ordered_json{{"sr", sr_dir},
                                            {"hr", hr_dir},
                                            {"scale", scale},
                                            {"round_to_8bit", !no_round}});
  std::cout << report.to_text();
  return 0;
}

int cmd_pyramid(const CommonArgs& args, const std::string& mode,
                const std::string& image_path, int levels,
                const std::string& kernel_name, int factor, int scale,
                const std::string& sidecar_path) {
  laud::ResampleKernel kernel = kernel_name == "burt5"
                                    ? laud::ResampleKernel::burt()
                                    : laud::ResampleKernel::bicubic();
  fs::create_directories(args.out_dir);
  write_snapshot(args.out_dir,
                 ordered_json{{"mode", mode},
                              {"image", image_path},
                              {"levels", levels},
                              {"kernel", kernel_name},
                              {"factor", factor},
                              {"scale", scale}});

  if (mode == "decompose") {
    laud::Tensor img = laud::read_png(image_path);
    laud::LaplacianPyramid pyr = laud::lp_decompose(img, levels, kernel, factor);
    laud::TensorArchive sidecar;
    sidecar.set_meta(ordered_json{{"factor", factor},
                                  {"kernel", kernel_name},
                                  {"levels", levels}});
    for (int i = 0; i < pyr.levels(); ++i) {
      laud::write_png(
          fs::path(args.out_dir) / ("detail_" + std::to_string(i + 1) + ".png"),
          offset_view(pyr.details[static_cast<size_t>(i)]));
      sidecar.add("detail_" + std::to_string(i + 1),
                  pyr.details[static_cast<size_t>(i)]);
    }
    laud::write_png(fs::path(args.out_dir) / "base.png", clamp01(pyr.base));
    sidecar.add("base", pyr.base);
    sidecar.save(fs::path(args.out_dir) / "pyramid.laud");
    return 0;
  }
  if (mode == "reconstruct") {
    const fs::path sc = sidecar_path.empty()
                            ? fs::path(args.out_dir) / "pyramid.laud"
                            : fs::path(sidecar_path);
    laud::TensorArchive arch = laud::TensorArchive::load(sc);
    laud::LaplacianPyramid pyr;
    pyr.factor = arch.meta().value("factor", 2);
    pyr.kernel = arch.meta().value("kernel", std::string("bicubic")) == "burt5"
                     ? laud::ResampleKernel::burt()
                     : laud::ResampleKernel::bicubic();
    const int n = arch.meta().value("levels", 1);
    for (int i = 0; i < n; ++i)
      pyr.details.push_back(arch.find("detail_" + std::to_string(i + 1)));
    pyr.base = arch.find("base");
    laud::write_png(fs::path(args.out_dir) / "reconstructed.png",
                    clamp01(laud::lp_reconstruct(pyr)));
    return 0;
  }
  if (mode == "detail") {
    laud::Tensor img = laud::read_png(image_path);
    laud::Tensor d = laud::detail_target(img, scale, kernel);
    laud::write_png(fs::path(args.out_dir) / "detail.png", offset_view(d));
    laud::TensorArchive sidecar;
    sidecar.set_meta(ordered_json{{"scale", scale}, {"kernel", kernel_name}});
    sidecar.add("detail", d);
    sidecar.save(fs::path(args.out_dir) / "detail.laud");
    return 0;
  }
  throw laud::ConfigError("pyramid mode must be decompose, reconstruct or detail");
}

int cmd_ablate(const CommonArgs& args, const std::string& variants_csv,
               const std::string& ksweep_csv, const std::string& seeds_csv) {
  json raw;
  laud::TrainConfig cfg = resolve_config(const_cast<CommonArgs&>(args), raw);
  cfg.checkpoint_dir = (fs::path(args.out_dir) / "runs").string();
  write_snapshot(args.out_dir, laud::train_config_to_json(cfg));

  auto split_csv = [](const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  };
  std::vector<uint64_t> seeds;
  for (const auto& s : split_csv(seeds_csv.empty() ? "1" : seeds_csv))
    seeds.push_back(std::stoull(s));

  laud::ComparisonTable table;
  if (!ksweep_csv.empty()) {
    std::vector<int> ks;
    for (const auto& s : split_csv(ksweep_csv)) ks.push_back(std::stoi(s));
    table = laud::run_k_sweep(cfg, ks, seeds);
  } else {
    table = laud::run_ablation(cfg, split_csv(variants_csv), seeds);
  }
  std::ofstream(fs::path(args.out_dir) / "table.json")
      << table.to_json().dump(2) << "\n";
  std::ofstream(fs::path(args.out_dir) / "table.txt") << table.to_text();
  std::cout << table.to_text();
  return 0;
}

int cmd_bench(const CommonArgs& args, bool dry, int lr_size, int batch,
              int warmup, int iters) {
  json raw;
  laud::TrainConfig cfg = resolve_config(const_cast<CommonArgs&>(args), raw);
  write_snapshot(args.out_dir, laud::train_config_to_json(cfg));
  laud::BenchResult r = laud::bench(cfg.model, cfg.loss, lr_size, batch,
                                    warmup, iters, dry, cfg.train.seed);
  const ordered_json j = laud::bench_to_json(r);
  std::ofstream(fs::path(args.out_dir) / "bench.json") << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian-pyramid detail-loss super-resolution toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, infer_args, eval_args, pyr_args, abl_args, bench_args;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, train_args, /*config_required=*/true);

  auto* infer_cmd = app.add_subcommand("infer", "super-resolve PNG images");
  std::string checkpoint;
  std::vector<std::string> inputs;
  bool all_steps = false, dump_features = false, last16 = false;
  add_common(infer_cmd, infer_args, false);
  infer_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  infer_cmd->add_option("inputs", inputs, "input PNG files")->required();
  infer_cmd->add_flag("--all-steps", all_steps,
                      "write every intermediate SR and detail image");
  infer_cmd->add_flag("--dump-features", dump_features,
                      "write per-step feature-map mosaics");
  infer_cmd->add_flag("--last-16", last16, "restrict mosaics to the last 16 channels");

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM report for two directories");
  std::string sr_dir, hr_dir;
  int eval_scale = 2;
  bool no_round = false;
  add_common(eval_cmd, eval_args, false);
  eval_cmd->add_option("--sr", sr_dir, "directory of SR images")->required();
  eval_cmd->add_option("--hr", hr_dir, "directory of HR images")->required();
  eval_cmd->add_option("--scale", eval_scale, "scale (sets the border crop)");
  eval_cmd->add_flag("--no-round", no_round, "skip 8-bit rounding before metrics");

  auto* pyr_cmd = app.add_subcommand("pyramid", "pyramid decompose/reconstruct/detail");
  std::string mode, image_path, kernel_name = "burt5", sidecar;
  int levels = 1, factor = 2, pyr_scale = 2;
  add_common(pyr_cmd, pyr_args, false);
  pyr_cmd->add_option("--mode", mode, "decompose | reconstruct | detail")->required();
  pyr_cmd->add_option("--image", image_path, "input PNG");
  pyr_cmd->add_option("--levels", levels, "pyramid levels");
  pyr_cmd->add_option("--kernel", kernel_name, "burt5 | bicubic");
  pyr_cmd->add_option("--factor", factor, "per-level factor");
  pyr_cmd->add_option("--scale", pyr_scale, "detail-mode SR scale");
  pyr_cmd->add_option("--sidecar", sidecar, "lossless sidecar for reconstruct");

  auto* abl_cmd = app.add_subcommand("ablate", "ablation / K-sweep runner");
  std::string variants = "m1,m4", ksweep, seeds_csv = "1";
  add_common(abl_cmd, abl_args, /*config_required=*/true);
  abl_cmd->add_option("--variants", variants, "comma list from m1..m4");
  abl_cmd->add_option("--k-sweep", ksweep, "comma list of K values (overrides variants)");
  abl_cmd->add_option("--seeds", seeds_csv, "comma list of seeds");

  auto* bench_cmd = app.add_subcommand("bench", "parameter/memory/timing report");
  bool dry = false;
  int lr_size = 16, bench_batch = 2, warmup = 10, iters = 100;
  add_common(bench_cmd, bench_args, /*config_required=*/true);
  bench_cmd->add_flag("--dry", dry, "report the parameter count only");
  bench_cmd->add_option("--lr-size", lr_size, "synthetic LR input side length");
  bench_cmd->add_option("--batch", bench_batch, "training batch for timing");
  bench_cmd->add_option("--warmup", warmup, "warm-up iterations (untimed)");
  bench_cmd->add_option("--iters", iters, "measured iterations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (infer_cmd->parsed())
      return cmd_infer(infer_args, checkpoint, inputs, all_steps, dump_features,
                       last16);
    if (eval_cmd->parsed())
      return cmd_eval(eval_args, sr_dir, hr_dir, eval_scale, no_round);
    if (pyr_cmd->parsed())
      return cmd_pyramid(pyr_args, mode, image_path, levels, kernel_name,
                         factor, pyr_scale, sidecar);
    if (abl_cmd->parsed()) return cmd_ablate(abl_args, variants, ksweep, seeds_csv);
    if (bench_cmd->parsed())
      return cmd_bench(bench_args, dry, lr_size, bench_batch, warmup, iters);
  } catch (const laud::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const laud::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const laud::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
