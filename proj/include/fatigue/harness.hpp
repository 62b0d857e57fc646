#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fatigue/chain.hpp"
#include "fatigue/three_cc.hpp"
#include "fatigue/torque.hpp"
#include "fatigue/trace.hpp"

namespace fatigue {

enum class TaskKind { StaticHold, RepetitiveReach, Hop, IntermittentHold };

enum class Interpolation { Step, Linear };

enum class RestMode {
  Hold,  // PD to rest_pose at rest_beta
  Limp,  // no actuation; joint limits and the ground carry the body
};

struct Keyframe {
  double t = 0.0;               // seconds into the cycle (or absolute for non-cyclic tasks)
  std::vector<double> targets;  // one target angle per DoF
  double beta = 1.0;

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct RestWindow {
  double start = 0.0;
  double duration = 0.0;

  double end() const { return start + duration; }
  friend bool operator==(const RestWindow&, const RestWindow&) = default;
};

/// Scripted stand-in for a policy. Cyclic tasks repeat their keyframes every
/// `period` seconds of absolute time; inside a rest window the script either
/// holds `rest_pose` at `rest_beta` or goes limp.
struct TaskScript {
  std::string name;
  TaskKind kind = TaskKind::StaticHold;
  std::vector<Keyframe> keyframes;
  double period = 0.0;  // 0 for non-cyclic tasks
  Interpolation interpolation = Interpolation::Step;
  std::vector<RestWindow> rest;
  std::vector<double> rest_pose;
  double rest_beta = 0.1;
  RestMode rest_mode = RestMode::Hold;
  int metric_link = -1;  // link whose tip is the end effector; -1 = last link
  std::vector<double> start_pose;  // initial joint angles; empty = the model's

  bool cyclic() const { return period > 0.0; }
  bool resting(double t) const;
  /// Throws ConfigError when keyframes leave the joint limits, are unsorted,
  /// or the sizes disagree with the model.
  void validate(const ChainModel& model) const;

  friend bool operator==(const TaskScript&, const TaskScript&) = default;
};

struct Command {
  std::vector<double> targets;
  double beta = 1.0;
  bool resting = false;
  bool limp = false;  // zero intended torque on every DoF
};

Command command_at(const TaskScript& task, double t);

struct SimConfig {
  double sim_dt = 1.0 / 120.0;
  double control_dt = 1.0 / 30.0;
  double duration = 10.0;
  ThreeCCParams params;
  bool fatigue_enabled = true;
  std::uint64_t seed = 0;
  bool randomized_init = false;  // compartments drawn from `seed` instead of rested

  /// Physics substeps per control tick; throws unless control_dt is an
  /// integer multiple of sim_dt.
  int substeps() const;
  void validate() const;
  InitMode init_mode() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMaxJointSpeed = 1.0e3;

/// Incremental simulation: one call to advance() is one control tick (PD,
/// target load, 3CC step, clip) followed by the physics substeps with the
/// clipped torque held.
class Harness {
 public:
  Harness(ChainModel model, TaskScript task, SimConfig cfg);

  /// Row describing the current instant (compartments, last applied torques,
  /// pose).
  TraceRow row() const;
  /// Advances one control tick and returns the new row.
  TraceRow advance();

  TraceMeta meta() const;
  double time() const { return static_cast<double>(tick_) * cfg_.control_dt; }
  std::uint64_t tick() const { return tick_; }

  /// New coefficients govern the next tick; compartments are kept.
  void set_params(const ThreeCCParams& params);
  /// Compartments and chain back to their initial state, time to zero.
  void reset(const InitMode& init);

  const ChainModel& model() const { return model_; }
  const TaskScript& task() const { return task_; }
  const SimConfig& config() const { return cfg_; }
  const ChainState& chain() const { return chain_; }
  const FatigueLimiter& limiter() const { return limiter_; }

 private:
  friend TorqueBoundTable calibrate_bounds(const ChainModel&, const TaskScript&, const SimConfig&);
  Harness(ChainModel model, TaskScript task, SimConfig cfg, bool calibrating);
  ChainState start_state() const;

  ChainModel model_;
  TaskScript task_;
  SimConfig cfg_;
  bool calibrating_ = false;
  FatigueLimiter limiter_;
  ChainState chain_;
  std::uint64_t tick_ = 0;
  std::vector<double> intended_;
  std::vector<double> applied_;
  TorqueBoundTable observed_;  // running max while calibrating
};

/// Fixed-length run; one row per control tick including t = 0.
Trace simulate(const ChainModel& model, const TaskScript& task, const SimConfig& cfg);

/// Same with parameter changes at the given tick indices (applied before the
/// tick runs).
struct ParamChange {
  std::uint64_t tick = 0;
  ThreeCCParams params;
};
Trace simulate(const ChainModel& model, const TaskScript& task, const SimConfig& cfg,
               const std::vector<ParamChange>& schedule);

/// Runs the task with fatigue off and the bounds ignored, tracks the running
/// max |T| per DoF and applies the symmetry rule.
TorqueBoundTable calibrate_bounds(const ChainModel& model, const TaskScript& task,
                                  const SimConfig& cfg);

struct TorqueAudit {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // max(|applied| - bound), N*m
};

/// Post-hoc check that every applied torque stays within RC * T_max.
TorqueAudit audit_torque_ceiling(const Trace& trace, const TorqueBoundTable& bounds);

struct CycleMetric {
  std::size_t index = 0;
  double start = 0.0;
  double amplitude = 0.0;     // cycle peak of the task signal above its t = 0 value
  double time_to_peak = 0.0;  // seconds from cycle start
  bool completed = false;     // amplitude >= threshold * reference
  bool overlaps_rest = false;
};

struct PerformanceMetrics {
  std::vector<CycleMetric> cycles;
  double reference_amplitude = 0.0;
  std::size_t repetitions = 0;      // completed cycles outside rest windows
  double slope_before_rest = 0.0;   // least-squares amplitude per cycle
  std::size_t cycles_before_rest = 0;
};

inline constexpr double kRepetitionThreshold = 0.7;

/// Task signal: root height for hops, end-effector height otherwise.
std::vector<double> task_signal(const Trace& trace, const TaskScript& task);

/// Per-cycle amplitude over full cycles of a cyclic task. `reference` is the
/// unfatigued amplitude; when absent the first cycle's amplitude is used.
PerformanceMetrics performance_metrics(const Trace& trace, const TaskScript& task,
                                       std::optional<double> reference = std::nullopt,
                                       double threshold = kRepetitionThreshold);

double least_squares_slope(const std::vector<double>& y);

struct RecoveryReport {
  std::size_t dof = 0;  // most fatigued DoF at the start of the rest window
  RestWindow window;
  double fatigued_start = 0.0;
  double fatigued_end = 0.0;
  bool decreased = false;            // fatigued_end < fatigued_start
  double pre_rest_amplitude = 0.0;   // last full cycle before the window
  double post_rest_amplitude = 0.0;  // first full cycle after it
  Trace trace;
};

/// Runs the task once and reports how the first rest window of at least
/// `min_rest` seconds changes fatigue and performance.
RecoveryReport recovery_experiment(const ChainModel& model, const TaskScript& task,
                                   const SimConfig& cfg, double min_rest = 5.0);

}  // namespace fatigue
