#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fatigue/three_cc.hpp"

namespace fatigue {

struct PdGains {
  double stiffness = 0.0;  // k_p, N*m/rad
  double damping = 0.0;    // k_d, N*m*s/rad

  void validate() const;
  friend bool operator==(const PdGains&, const PdGains&) = default;
};

struct BetaRange {
  double min = 0.1;
  double max = 2.0;
};

struct PdCommand {
  double target = 0.0;  // u, rad
  double beta = 1.0;    // stiffness/damping multiplier
};

struct DofState {
  double angle = 0.0;     // rad
  double velocity = 0.0;  // rad/s
};

/// Per-joint-group defaults for a human-scale character (stiffness, damping).
/// Keys: Abdomen, Neck, Shoulders, Elbows, Hips, Knees, Ankles.
const std::vector<std::pair<std::string, PdGains>>& default_gain_table();

/// Looks up a joint group in default_gain_table(); throws ConfigError if
/// unknown.
PdGains default_gains(const std::string& group);

/// T = beta * k_p * (u - angle) - beta * k_d * velocity.
double pd_torque(const PdCommand& cmd, const DofState& state, const PdGains& gains,
                 const BetaRange& range = {});

struct TorqueBoundTable {
  std::vector<std::string> names;
  std::vector<double> t_max;
  std::vector<std::pair<std::size_t, std::size_t>> symmetry_pairs;

  std::size_t size() const { return t_max.size(); }
  /// Throws ConfigError on size mismatch, negative bounds or bad pair indices.
  void validate() const;
  /// Index of a DoF by name; throws ConfigError if absent.
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const TorqueBoundTable&, const TorqueBoundTable&) = default;
};

/// Running maximum of |T| per DoF.
TorqueBoundTable update_torque_bounds(TorqueBoundTable table, std::span<const double> torques);

/// Symmetric DoFs take the smaller of the two bounds.
TorqueBoundTable finalize_bounds(TorqueBoundTable table);

/// |T| / t_max * 100. Throws ConfigError for a zero bound ("unbounded DoF").
double target_load(double torque, double t_max);

double fatigued_limit(double rc, double t_max);

double clip_torque(double torque, double limit);

/// Ratio form: when |T| exceeds the limit, scale T by limit/|T|.
double clip_torque_ratio(double torque, double limit);

/// Per-DoF 3CC state plus torque bound; turns intended torques into applied
/// torques bounded by RC * T_max.
class FatigueLimiter {
 public:
  FatigueLimiter(TorqueBoundTable bounds, ThreeCCParams params, const InitMode& init = RestedInit{});

  /// PD torque, target load, 3CC step and clip for every DoF.
  std::vector<double> step(std::span<const PdCommand> cmds, std::span<const DofState> states,
                           std::span<const PdGains> gains, double dt, const BetaRange& range = {});

  /// Same pipeline starting from already computed intended torques. When
  /// `apply_fatigue` is false the 3CC state still advances but the clip uses
  /// the unfatigued bound T_max.
  std::vector<double> step_torques(std::span<const double> torques, double dt,
                                   bool apply_fatigue = true);

  void reset(const InitMode& init);
  /// Takes effect on the next step; compartments are kept.
  void set_params(const ThreeCCParams& params);

  std::size_t size() const { return bounds_.size(); }
  const TorqueBoundTable& bounds() const { return bounds_; }
  const ThreeCCParams& params() const { return params_; }
  std::span<const CompartmentState> states() const { return states_; }
  std::span<const StepDiagnostics> diagnostics() const { return diag_; }
  std::span<const double> target_loads() const { return target_loads_; }
  std::span<const double> intended() const { return intended_; }
  std::span<const double> applied() const { return applied_; }
  std::span<const double> limits() const { return limits_; }
  double rc(std::size_t dof) const { return residual_capacity(states_[dof]); }
  double mean_rc() const;

 private:
  TorqueBoundTable bounds_;
  ThreeCCParams params_;
  std::vector<CompartmentState> states_;
  std::vector<StepDiagnostics> diag_;
  std::vector<double> target_loads_;
  std::vector<double> intended_;
  std::vector<double> applied_;
  std::vector<double> limits_;
};

}  // namespace fatigue
