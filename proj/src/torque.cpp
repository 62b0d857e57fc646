#include "fatigue/torque.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fatigue {

void PdGains::validate() const {
  if (!std::isfinite(stiffness) || stiffness <= 0.0) throw ConfigError("k_p must be > 0");
  if (!std::isfinite(damping) || damping < 0.0) throw ConfigError("k_d must be >= 0");
}

const std::vector<std::pair<std::string, PdGains>>& default_gain_table() {
  static const std::vector<std::pair<std::string, PdGains>> table{
      {"Abdomen", {120.0, 12.0}}, {"Neck", {90.0, 9.0}},   {"Shoulders", {100.0, 10.0}},
      {"Elbows", {110.0, 11.0}},  {"Hips", {320.0, 32.0}}, {"Knees", {370.0, 37.0}},
      {"Ankles", {120.0, 12.0}},
  };
  return table;
}

PdGains default_gains(const std::string& group) {
  for (const auto& [name, gains] : default_gain_table()) {
    if (name == group) return gains;
  }
  throw ConfigError("unknown joint group '" + group + "'");
}

double pd_torque(const PdCommand& cmd, const DofState& state, const PdGains& gains,
                 const BetaRange& range) {
  if (!std::isfinite(cmd.target) || !std::isfinite(cmd.beta) || !std::isfinite(state.angle) ||
      !std::isfinite(state.velocity) || !std::isfinite(gains.stiffness) ||
      !std::isfinite(gains.damping)) {
    throw ConfigError("pd_torque: non-finite input");
  }
  if (cmd.beta < range.min || cmd.beta > range.max) {
    throw ConfigError("pd_torque: beta " + std::to_string(cmd.beta) + " outside [" +
                      std::to_string(range.min) + ", " + std::to_string(range.max) + "]");
  }
  return cmd.beta * gains.stiffness * (cmd.target - state.angle) -
         cmd.beta * gains.damping * state.velocity;
}

void TorqueBoundTable::validate() const {
  if (names.size() != t_max.size()) throw ConfigError("bound table: names/t_max size mismatch");
  for (std::size_t i = 0; i < t_max.size(); ++i) {
    if (!std::isfinite(t_max[i]) || t_max[i] < 0.0) {
      throw ConfigError("bound table: negative or non-finite bound for '" + names[i] + "'");
    }
  }
  for (const auto& [l, r] : symmetry_pairs) {
    if (l >= t_max.size() || r >= t_max.size() || l == r) {
      throw ConfigError("bound table: invalid symmetry pair (" + std::to_string(l) + ", " +
                        std::to_string(r) + ")");
    }
  }
}

std::size_t TorqueBoundTable::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("bound table: unknown DoF '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

TorqueBoundTable update_torque_bounds(TorqueBoundTable table, std::span<const double> torques) {
  if (torques.size() != table.t_max.size()) {
    throw ConfigError("update_torque_bounds: expected " + std::to_string(table.t_max.size()) +
                      " torques, got " + std::to_string(torques.size()));
  }
  for (std::size_t d = 0; d < torques.size(); ++d) {
    if (!std::isfinite(torques[d])) throw ConfigError("update_torque_bounds: non-finite torque");
    table.t_max[d] = std::max(table.t_max[d], std::abs(torques[d]));
  }
  return table;
}

TorqueBoundTable finalize_bounds(TorqueBoundTable table) {
  table.validate();
  for (const auto& [l, r] : table.symmetry_pairs) {
    const double m = std::min(table.t_max[l], table.t_max[r]);
    table.t_max[l] = m;
    table.t_max[r] = m;
  }
  return table;
}

double target_load(double torque, double t_max) {
  if (!(t_max > 0.0)) throw ConfigError("unbounded DoF: torque bound is zero");
  return std::abs(torque) / t_max * 100.0;
}

double fatigued_limit(double rc, double t_max) { return rc * t_max; }

double clip_torque(double torque, double limit) { return std::clamp(torque, -limit, limit); }

double clip_torque_ratio(double torque, double limit) {
  if (std::abs(torque) > limit) {
    // torque / |torque| is exactly +-1, so this grouping reproduces clamp bit-for-bit.
    return limit * (torque / std::abs(torque));
  }
  return torque;
}

FatigueLimiter::FatigueLimiter(TorqueBoundTable bounds, ThreeCCParams params, const InitMode& init)
    : bounds_(std::move(bounds)), params_(params) {
  bounds_.validate();
  params_.validate();
  const std::size_t n = bounds_.size();
  diag_.assign(n, StepDiagnostics{});
  target_loads_.assign(n, 0.0);
  intended_.assign(n, 0.0);
  applied_.assign(n, 0.0);
  reset(init);
}

void FatigueLimiter::reset(const InitMode& init) {
  const std::size_t n = bounds_.size();
  states_.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    if (const auto* r = std::get_if<RandomizedInit>(&init)) {
      // one independent stream per DoF
      states_[d] = init_state(RandomizedInit{r->seed + d});
    } else {
      states_[d] = init_state(init);
    }
  }
  limits_.resize(n);
  for (std::size_t d = 0; d < n; ++d) limits_[d] = fatigued_limit(rc(d), bounds_.t_max[d]);
  std::fill(diag_.begin(), diag_.end(), StepDiagnostics{});
  std::fill(target_loads_.begin(), target_loads_.end(), 0.0);
  std::fill(intended_.begin(), intended_.end(), 0.0);
  std::fill(applied_.begin(), applied_.end(), 0.0);
}

void FatigueLimiter::set_params(const ThreeCCParams& params) {
  params.validate();
  params_ = params;
}

std::vector<double> FatigueLimiter::step(std::span<const PdCommand> cmds,
                                         std::span<const DofState> states,
                                         std::span<const PdGains> gains, double dt,
                                         const BetaRange& range) {
  const std::size_t n = size();
  if (cmds.size() != n || states.size() != n || gains.size() != n) {
    throw ConfigError("limiter_step: DoF count mismatch");
  }
  std::vector<double> torques(n);
  for (std::size_t d = 0; d < n; ++d) torques[d] = pd_torque(cmds[d], states[d], gains[d], range);
  return step_torques(torques, dt, true);
}

std::vector<double> FatigueLimiter::step_torques(std::span<const double> torques, double dt,
                                                 bool apply_fatigue) {
  const std::size_t n = size();
  if (torques.size() != n) throw ConfigError("limiter_step: DoF count mismatch");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  for (std::size_t d = 0; d < n; ++d) {
    const double t_max = bounds_.t_max[d];
    const double pre = clip_torque(torques[d], t_max);
    const double tl = target_load(pre, t_max);
    const StepResult r = fatigue::step(states_[d], tl, params_, dt);
    states_[d] = r.state;
    diag_[d] = r.diag;
    target_loads_[d] = tl;
    intended_[d] = torques[d];
    limits_[d] = apply_fatigue ? fatigued_limit(rc(d), t_max) : t_max;
    applied_[d] = clip_torque(torques[d], limits_[d]);
  }
  return applied_;
}

double FatigueLimiter::mean_rc() const {
  if (states_.empty()) return 1.0;
  double total = 0.0;
  for (std::size_t d = 0; d < states_.size(); ++d) total += rc(d);
  return total / static_cast<double>(states_.size());
}

}  // namespace fatigue
