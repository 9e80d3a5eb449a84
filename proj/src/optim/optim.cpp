#include "glyphner/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "glyphner/errors.hpp"

namespace glyphner::optim {
namespace {

bool finite(const nd::Tensor& t) {
  return std::ranges::all_of(t.data(), [](double v) { return std::isfinite(v); });
}

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kAdafactor:
      return "adafactor";
    case OptimizerKind::kAdam:
      return "adam";
    case OptimizerKind::kRmsprop:
      return "rmsprop";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adafactor") return OptimizerKind::kAdafactor;
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "rmsprop") return OptimizerKind::kRmsprop;
  throw ConfigError("unknown optimizer '" + name + "' (expected adafactor, adam or rmsprop)");
}

double lr_at_step(std::uint64_t step, const ScheduleConfig& sched) {
  const double first = static_cast<double>(std::max<std::uint64_t>(sched.first_decay_steps, 1));
  double start = 0.0;
  double period = first;
  const double s = static_cast<double>(step);
  // Period 0 is [0, P]; later periods are (start, start + P_i].
  while (s > start + period) {
    start += period;
    period *= sched.period_multiplier;
  }
  const double t = s - start;
  return sched.min_rate + 0.5 * (sched.base_rate - sched.min_rate) * (1.0 + std::cos(std::numbers::pi * t / period));
}

double global_grad_norm(const nd::ParameterSet& params) {
  double total = 0.0;
  for (const auto& p : params.items()) {
    if (!p.var.has_grad()) continue;
    for (double g : p.var.grad().data()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_global_norm(nd::ParameterSet& params, double max_norm) {
  for (const auto& p : params.items()) {
    if (p.var.has_grad() && !finite(p.var.grad())) throw NumericError("non-finite gradient in parameter " + p.name);
  }
  const double norm = global_grad_norm(params);
  // The slack keeps a second call from rescaling by a last-ulp factor.
  if (norm <= max_norm + 1e-12) return 1.0;
  const double factor = max_norm / norm;
  for (auto& p : params.items()) {
    if (!p.var.has_grad()) continue;
    for (auto& g : p.var.mutable_grad().data()) g *= factor;
  }
  return factor;
}

Optimizer::Optimizer(OptimizerConfig config) : config_(std::move(config)) {}

bool Optimizer::uses_schedule() const noexcept {
  return config_.kind != OptimizerKind::kAdafactor || config_.lr.has_value();
}

const SlotState* Optimizer::slot(const std::string& name) const {
  auto it = slots_.find(name);
  return it == slots_.end() ? nullptr : &it->second;
}

double Optimizer::last_step_size(const std::string& name) const {
  auto it = last_alpha_.find(name);
  return it == last_alpha_.end() ? 0.0 : it->second;
}

void Optimizer::step(nd::ParameterSet& params, std::optional<double> lr) {
  ++step_;
  for (auto& p : params.items()) {
    if (!p.var.has_grad()) continue;
    auto& s = slots_[p.name];
    switch (config_.kind) {
      case OptimizerKind::kAdam:
        update_adam(p, s, lr.value_or(config_.lr.value_or(kAdamDefaultLr)));
        break;
      case OptimizerKind::kRmsprop:
        update_rmsprop(p, s, lr.value_or(config_.lr.value_or(kRmspropDefaultLr)));
        break;
      case OptimizerKind::kAdafactor:
        update_adafactor(p, s, config_.lr ? std::optional<double>(lr.value_or(*config_.lr)) : std::nullopt);
        break;
    }
    if (!finite(p.var.value())) {
      throw NumericError("non-finite update in parameter " + p.name + " at step " + std::to_string(step_));
    }
  }
}

void Optimizer::update_adam(nd::Parameter& p, SlotState& s, double lr) {
  auto& x = p.var.mutable_value();
  const auto& g = p.var.grad();
  if (s.m.empty()) {
    s.m = nd::Tensor(x.shape(), 0.0);
    s.v = nd::Tensor(x.shape(), 0.0);
  }
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
  const bool decay = p.kind == nd::ParamKind::kWeight && config_.weight_decay > 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (decay) x[i] -= lr * config_.weight_decay * x[i];
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
    x[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + config_.adam_eps);
  }
  last_alpha_[p.name] = lr;
}

void Optimizer::update_rmsprop(nd::Parameter& p, SlotState& s, double lr) {
  auto& x = p.var.mutable_value();
  const auto& g = p.var.grad();
  if (s.v.empty()) s.v = nd::Tensor(x.shape(), 0.0);
  const double rho = config_.rms_decay;
  const bool decay = p.kind == nd::ParamKind::kWeight && config_.weight_decay > 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (decay) x[i] -= lr * config_.weight_decay * x[i];
    s.v[i] = rho * s.v[i] + (1.0 - rho) * g[i] * g[i];
    x[i] -= lr * g[i] / (std::sqrt(s.v[i]) + config_.rms_eps);
  }
  last_alpha_[p.name] = lr;
}

void Optimizer::update_adafactor(nd::Parameter& p, SlotState& s, std::optional<double> lr) {
  auto& x = p.var.mutable_value();
  const auto& g = p.var.grad();
  const double t = static_cast<double>(step_);
  const double beta2 = 1.0 - std::pow(t, config_.ada_decay_rate);
  const double eps1 = config_.ada_eps1;

  // Relative step: rho_t scaled by the parameter's own RMS.
  const double alpha =
      lr ? *lr : std::max(config_.ada_eps2, rms(x.data())) * std::min(1e-2, 1.0 / std::sqrt(t));

  const std::size_t n = x.size();
  std::vector<double> update(n);
  if (x.rank() >= 2) {
    const std::size_t cols = x.shape().back();
    const std::size_t rows = n / cols;
    if (s.row.empty()) {
      s.row = nd::Tensor({rows}, 0.0);
      s.col = nd::Tensor({cols}, 0.0);
      s.factored = true;
    }
    std::vector<double> row_mean(rows, 0.0), col_mean(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double sq = g[r * cols + c] * g[r * cols + c] + eps1;
        row_mean[r] += sq;
        col_mean[c] += sq;
      }
    for (std::size_t r = 0; r < rows; ++r) s.row[r] = beta2 * s.row[r] + (1.0 - beta2) * row_mean[r] / cols;
    for (std::size_t c = 0; c < cols; ++c) s.col[c] = beta2 * s.col[c] + (1.0 - beta2) * col_mean[c] / rows;
    double row_avg = 0.0;
    for (std::size_t r = 0; r < rows; ++r) row_avg += s.row[r];
    row_avg /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double rf = 1.0 / std::sqrt(s.row[r] / row_avg);
      for (std::size_t c = 0; c < cols; ++c) update[r * cols + c] = g[r * cols + c] * rf / std::sqrt(s.col[c]);
    }
  } else {
    if (s.v.empty()) s.v = nd::Tensor(x.shape(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * (g[i] * g[i] + eps1);
      update[i] = g[i] / std::sqrt(s.v[i]);
    }
  }
  const double clip = std::max(1.0, rms(update) / config_.ada_clip_threshold);
  const bool decay = p.kind == nd::ParamKind::kWeight && config_.weight_decay > 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (decay) x[i] -= alpha * config_.weight_decay * x[i];
    x[i] -= alpha * update[i] / clip;
  }
  last_alpha_[p.name] = alpha;
}

bool EarlyStopping::observe(double loss) {
  ++epoch_;
  if (!best_ || loss < *best_) {
    best_ = loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return patience_ > 0 && stale_ >= patience_;
}

}  // namespace glyphner::optim
