#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "laud/tensor.hpp"

namespace laud {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed set of named parameters.
/// Moment buffers are allocated on the first step. Gradients are left
/// untouched by step(); callers zero them via zero_grad().
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, AdamConfig config);

  void step();
  void zero_grad();

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  int64_t step_count() const { return step_count_; }

  /// Global gradient norm over all parameters (diagnostics, clipping).
  double grad_norm() const;
  /// Scale all gradients so the global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;  // empty until the first update
  };
  std::vector<Slot> slots_;
  AdamConfig config_;
  int64_t step_count_ = 0;
};

/// Step decay: initial_lr * 0.5^(number of milestones m, given as fractions
/// of total_epochs, with epoch >= ceil(m * total_epochs)).
double lr_schedule(int64_t epoch, int64_t total_epochs, double initial_lr,
                   std::span<const double> milestones);

}  // namespace laud
