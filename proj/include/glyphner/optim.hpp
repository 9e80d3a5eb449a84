#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glyphner/params.hpp"

namespace glyphner::optim {

enum class OptimizerKind { kAdafactor, kAdam, kRmsprop };

std::string to_string(OptimizerKind kind);
// Accepts "adafactor", "adam", "rmsprop"; throws ConfigError otherwise.
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdafactor;
  // Adafactor runs in relative-step mode when unset. Adam and RMSprop fall
  // back to their default rate.
  std::optional<double> lr;
  double weight_decay = 0.005;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double rms_decay = 0.9;
  double rms_eps = 1e-8;

  double ada_eps1 = 1e-30;
  double ada_eps2 = 1e-3;
  double ada_clip_threshold = 1.0;
  double ada_decay_rate = -0.8;
};

inline constexpr double kAdamDefaultLr = 1e-3;
inline constexpr double kRmspropDefaultLr = 1e-3;

// Cosine annealing with warm restarts. The first period covers steps [0, P];
// period i has length P * period_multiplier^i.
struct ScheduleConfig {
  double base_rate = 1e-3;
  std::uint64_t first_decay_steps = 1000;
  double period_multiplier = 2.0;
  double min_rate = 0.0;
};

double lr_at_step(std::uint64_t step, const ScheduleConfig& sched);

// Scales every gradient by max_norm / g when the global L2 norm g exceeds
// max_norm. Returns the factor applied (1 when unchanged). Throws
// NumericError naming the first parameter with a non-finite gradient.
double clip_global_norm(nd::ParameterSet& params, double max_norm = 1.0);
double global_grad_norm(const nd::ParameterSet& params);

// Per-parameter accumulators.
struct SlotState {
  nd::Tensor m;    // Adam first moment
  nd::Tensor v;    // Adam second moment / RMSprop mean square / unfactored Adafactor moment
  nd::Tensor row;  // Adafactor factored row statistics (length = product of leading extents)
  nd::Tensor col;  // Adafactor factored column statistics (length = last extent)
  bool factored = false;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // One update from the gradients currently stored on `params`. `lr`
  // overrides the configured rate (the trainer passes the scheduled value);
  // Adafactor in relative-step mode ignores it. Parameters without a gradient
  // are left untouched. Throws NumericError on a non-finite update.
  void step(nd::ParameterSet& params, std::optional<double> lr = std::nullopt);

  std::uint64_t steps() const noexcept { return step_; }
  const OptimizerConfig& config() const noexcept { return config_; }
  // Whether the configured optimizer follows an external schedule.
  bool uses_schedule() const noexcept;
  const SlotState* slot(const std::string& name) const;
  // Step size used on the most recent update of `name` (after Adafactor scaling).
  double last_step_size(const std::string& name) const;

 private:
  void update_adam(nd::Parameter& p, SlotState& s, double lr);
  void update_rmsprop(nd::Parameter& p, SlotState& s, double lr);
  void update_adafactor(nd::Parameter& p, SlotState& s, std::optional<double> lr);

  OptimizerConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, SlotState> slots_;
  std::map<std::string, double> last_alpha_;
};

// Early stopping on a loss that fails to improve for `patience` epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when training should stop after recording `loss`.
  bool observe(double loss);
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  std::optional<double> best_;
};

}  // namespace glyphner::optim
