#include "laud/optim.hpp"

#include <cmath>

namespace laud {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params,
           AdamConfig config)
    : config_(config) {
  if (!(config.lr > 0.0)) throw ConfigError("Adam lr must be positive");
  if (!(config.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  slots_.reserve(params.size());
  for (auto& [name, t] : params) {
    if (!t.requires_grad())
      throw StateError("parameter '" + name + "' does not require grad");
    slots_.push_back(Slot{name, t, {}, {}});
  }
}

void Adam::step() {
  for (const Slot& s : slots_)
    if (!s.param.has_grad())
      throw StateError("parameter '" + s.name + "' has no gradient");

  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (Slot& s : slots_) {
    std::span<const double> g = s.param.grad();
    if (s.m.empty()) {
      s.m.assign(g.size(), 0.0);
      s.v.assign(g.size(), 0.0);
    }
    std::span<double> p = s.param.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

double Adam::grad_norm() const {
  double acc = 0.0;
  for (const Slot& s : slots_) {
    if (!s.param.has_grad()) continue;
    for (double g : s.param.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

void Adam::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (Slot& s : slots_) {
    if (!s.param.has_grad()) continue;
    auto& grad = s.param.node()->grad;
    for (double& g : grad) g *= scale;
  }
}

double lr_schedule(int64_t epoch, int64_t total_epochs, double initial_lr,
                   std::span<const double> milestones) {
  double prev = 0.0;
  int passed = 0;
  for (double m : milestones) {
    if (!(m > prev && m <= 1.0))
      throw ConfigError("lr milestones must be strictly increasing in (0,1]");
    prev = m;
    const auto boundary = static_cast<int64_t>(
        std::ceil(m * static_cast<double>(total_epochs)));
    if (epoch >= boundary) ++passed;
  }
  return initial_lr * std::pow(0.5, passed);
}

}  // namespace laud
