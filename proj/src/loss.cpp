#include "laud/loss.hpp"

#include <algorithm>
#include <cmath>

namespace laud {

Tensor step_loss(const Tensor& i_sr, const Tensor& d_sr, const Tensor& i_hr,
                 const Tensor& d_gt, const LossConfig& config) {
  Tensor sr_term = l1_loss(i_sr, i_hr);
  if (!config.detail_enabled) return sr_term;
  if (!d_sr.defined() || !d_gt.defined())
    throw ConfigError("detail loss enabled but detail tensors are missing");
  Tensor detail_term = config.detail_norm == LossConfig::Norm::l1
                           ? l1_loss(d_sr, d_gt)
                           : l2_loss(d_sr, d_gt);
  return add(sr_term, scale(detail_term, config.lambda));
}

std::pair<Tensor, LossReport> total_loss(const ForwardTrace& trace,
                                         const Tensor& i_hr,
                                         const Tensor& d_gt,
                                         const LossConfig& config) {
  const size_t steps = trace.sr_images.size();
  if (steps == 0) throw ConfigError("trace holds no SR images");
  if (config.weights.size() != steps)
    throw ConfigError("loss has " + std::to_string(config.weights.size()) +
                      " weights for " + std::to_string(steps) + " RUDP steps");

  LossReport report;
  Tensor total;
  for (size_t k = 0; k < steps; ++k) {
    Tensor sr_term = l1_loss(trace.sr_images[k], i_hr);
    report.sr_loss.push_back(sr_term.item());
    Tensor combined = sr_term;
    if (config.detail_enabled) {
      Tensor detail_term =
          config.detail_norm == LossConfig::Norm::l1
              ? l1_loss(trace.detail_images[k], d_gt)
              : l2_loss(trace.detail_images[k], d_gt);
      report.detail_loss.push_back(detail_term.item());
      combined = add(sr_term, scale(detail_term, config.lambda));
    } else {
      report.detail_loss.push_back(0.0);
    }
    report.combined.push_back(combined.item());
    const bool counted = config.rudp_all_steps || k + 1 == steps;
    if (!counted) continue;
    Tensor weighted = scale(combined, config.weights[k]);
    total = total.defined() ? add(total, weighted) : weighted;
  }
  report.total = total.item();
  return {total, report};
}

namespace {

// Smallest channel width >= the base width whose K=1 parameter count lands
// within 5% of the reference count (binary search on the monotone counter).
int pad_channels_for_parity(const LaudConfig& single_step, int64_t reference) {
  LaudConfig probe = single_step;
  auto count = [&](int c) {
    probe.channels = c;
    return parameter_count(probe);
  };
  int lo = single_step.channels, hi = single_step.channels;
  while (count(hi) < reference) hi *= 2;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (count(mid) < reference)
      lo = mid + 1;
    else
      hi = mid;
  }
  // lo is the first width at or above the reference; the one below may be
  // closer to parity.
  if (lo > single_step.channels) {
    const double above = std::abs(static_cast<double>(count(lo) - reference));
    const double below =
        std::abs(static_cast<double>(count(lo - 1) - reference));
    if (below < above) --lo;
  }
  return lo;
}

}  // namespace

std::pair<LaudConfig, LossConfig> ablation_variant(const std::string& name,
                                                   const LaudConfig& base) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return std::tolower(c); });

  LaudConfig model = base;
  LossConfig loss;
  loss.weights = {1, 3, 10};
  if (static_cast<int>(loss.weights.size()) != base.rudp_steps)
    loss.weights.assign(static_cast<size_t>(base.rudp_steps), 1.0);

  if (n == "m3" || n == "m4") {
    loss.detail_enabled = (n == "m4");
    return {model, loss};
  }
  if (n == "m1" || n == "m2") {
    const int64_t reference = parameter_count(base);
    model.rudp_steps = 1;
    model.channels = pad_channels_for_parity(model, reference);
    loss.weights = {1};
    loss.detail_enabled = (n == "m2");
    return {model, loss};
  }
  throw ConfigError("unknown ablation variant '" + name +
                    "' (expected m1..m4)");
}

}  // namespace laud
