#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fatigue/three_cc.hpp"
#include "fatigue/trace.hpp"

namespace fatigue {

inline constexpr double kDefaultHorizon = 10000.0;
inline constexpr double kControlDt = 1.0 / 30.0;

/// Outcome of holding a constant load from rested.
///
/// Failure is the first instant the residual capacity drops to the load,
/// 100 - M_F <= TL: from then on the rested pool cannot cover the deficit
/// (the drive is in its exhausted branch) and an RC-scaled torque bound no
/// longer admits the demand. The crossing is interpolated linearly between
/// steps.
struct EnduranceResult {
  std::optional<double> endurance_time;  // empty = unbounded over the horizon
  bool failure_detected = false;
  CompartmentState final_state;
  double horizon = 0.0;
};

EnduranceResult endurance_time(double target_load, const ThreeCCParams& params,
                               double dt = kControlDt, double horizon = kDefaultHorizon);

struct SustainableLoad {
  double bisected = 0.0;
  /// 100 * rR / (rR + F): the limit for an ideal drive where M_A sits at TL.
  double closed_form = 0.0;
  /// Threshold of the finite-gain drive, 100 / (1 + L_D F / ((L_D + F) R)).
  double closed_form_finite_drive = 0.0;
};

/// Bisection over TL in (0, 100] on whether endurance_time stays unbounded.
SustainableLoad sustainable_load(const ThreeCCParams& params, double tol = 0.01,
                                 double dt = kControlDt, double horizon = kDefaultHorizon);

double sustainable_load_closed_form(const ThreeCCParams& params);
double sustainable_load_finite_drive(const ThreeCCParams& params);

struct Sensitivity {
  double max_relative_change = 0.0;
  double reference_time = 0.0;
  std::vector<std::pair<double, std::optional<double>>> times;  // (L_D = L_R, ET)
};

/// Endurance time at L_D = L_R = each of `factors`, relative to the value at 10.
Sensitivity ld_lr_sensitivity(double target_load, const ThreeCCParams& params,
                              const std::vector<double>& factors = {2.0, 10.0, 50.0},
                              double dt = kControlDt, double horizon = kDefaultHorizon);

struct DutyCycle {
  double on = 0.0;   // seconds at TL_on
  double off = 0.0;  // seconds at 0
};

struct IntermittentResult {
  double mean_fatigued = 0.0;
  std::vector<double> cycle_peaks;  // max M_F within each cycle
  Trace trace;
};

IntermittentResult intermittent_recovery(const DutyCycle& duty, double tl_on,
                                         const ThreeCCParams& params, double horizon,
                                         double dt = kControlDt);

struct JointRank {
  std::size_t dof = 0;
  std::string name;
  double peak_fatigued = 0.0;
  double integral_fatigued = 0.0;  // %MVC * s, trapezoid rule
};

/// Descending by peak M_F, then by integral, then ascending index.
std::vector<JointRank> joint_fatigue_ranking(const Trace& trace);

void write_ranking_csv(std::ostream& out, const std::vector<JointRank>& ranking);

struct SweepSpec {
  std::vector<double> fatigue;
  std::vector<double> recovery;
  std::vector<double> rest_multiplier;
  double develop = 10.0;
  double relax = 10.0;
};

struct SweepCell {
  ThreeCCParams params;
  EnduranceResult result;
};

struct SweepGrid {
  SweepSpec spec;
  double target_load = 0.0;
  std::vector<SweepCell> cells;  // F-major, then R, then r

  const SweepCell& at(std::size_t fi, std::size_t ri, std::size_t mi) const;
};

/// Parameters for every cell in grid order.
std::vector<ThreeCCParams> sweep_params(const SweepSpec& spec);

/// Endurance time for every (F, R, r) cell; cells run on `workers` threads
/// (0 = hardware concurrency) and land at their grid index.
SweepGrid sweep(const SweepSpec& spec, double target_load, double dt = kControlDt,
                double horizon = kDefaultHorizon, unsigned workers = 0);

/// Generic cell-parallel map used for task-level sweeps.
std::vector<double> sweep_map(const std::vector<ThreeCCParams>& cells,
                              const std::function<double(const ThreeCCParams&)>& fn,
                              unsigned workers = 0);

void write_sweep_csv(std::ostream& out, const SweepGrid& grid);

}  // namespace fatigue
