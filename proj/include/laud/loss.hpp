#pragma once

#include <string>
#include <utility>
#include <vector>

#include "laud/model.hpp"
#include "laud/tensor.hpp"

namespace laud {

struct LossConfig {
  double lambda = 1.0;                     // detail-term balance
  std::vector<double> weights = {1, 3, 10};  // w_k, one per RUDP step
  enum class Norm { l1, l2 };
  Norm detail_norm = Norm::l1;
  bool detail_enabled = true;
  bool rudp_all_steps = true;  // false: only the final step contributes
};

/// Per-step components and their weighted total, as computed.
struct LossReport {
  std::vector<double> sr_loss;
  std::vector<double> detail_loss;  // 0 when the detail term is disabled
  std::vector<double> combined;     // per-step totals
  double total = 0.0;
};

/// Per-step objective: l1(I_SR, I_HR) + lambda * norm(D_SR, D_GT). The
/// detail pair may be undefined tensors when detail_enabled is false.
Tensor step_loss(const Tensor& i_sr, const Tensor& d_sr, const Tensor& i_hr,
                 const Tensor& d_gt, const LossConfig& config);

/// Weighted sum over all RUDP steps. Gradients flow to every step's outputs.
std::pair<Tensor, LossReport> total_loss(const ForwardTrace& trace,
                                         const Tensor& i_hr,
                                         const Tensor& d_gt,
                                         const LossConfig& config);

/// Named ablation setups. M1: single step, no detail term; M2: single step
/// with detail term; M3: full RUDP without the detail term; M4: everything.
/// Single-step variants get their channel width padded so parameter counts
/// stay within 5% of the full configuration.
std::pair<LaudConfig, LossConfig> ablation_variant(const std::string& name,
                                                   const LaudConfig& base);

}  // namespace laud
