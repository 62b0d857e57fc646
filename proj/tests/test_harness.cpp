#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "fatigue/endurance.hpp"
#include "fatigue/harness.hpp"
#include "fatigue/presets.hpp"

using namespace fatigue;

namespace {

constexpr double kSagTolerance = 0.005;  // rad away from the unfatigued run

ThreeCCParams coeffs(double f, double r, double m = 1.0) { return ThreeCCParams{f, r, m, 10.0, 10.0}; }

bool rows_bit_equal(const Trace& a, const Trace& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (std::memcmp(&x.t, &y.t, sizeof(double)) != 0 || !(x == y)) return false;
  }
  return true;
}

struct Sag {
  double onset = -1.0;
  double mean_load = 0.0;
};

/// First time the shoulder leaves the unfatigued trajectory, and the mean
/// shoulder load up to then.
Sag shoulder_sag(const Trace& run, const Trace& ref) {
  Sag s;
  int n = 0;
  for (std::size_t i = 0; i < run.rows.size(); ++i) {
    if (std::abs(run.rows[i].dofs[1].angle - ref.rows[i].dofs[1].angle) > kSagTolerance) {
      s.onset = run.rows[i].t;
      break;
    }
    if (run.rows[i].t > 0.0) {
      s.mean_load += run.rows[i].dofs[1].target_load;
      ++n;
    }
  }
  if (n > 0) s.mean_load /= n;
  return s;
}

ChainModel calibrated_hopper(const TaskScript& task, SimConfig cfg) {
  ChainModel m = hopper();
  cfg.duration = 4.0;
  m.bounds = calibrate_bounds(m, task, cfg);
  return m;
}

}  // namespace

TEST_CASE("unfatigued rest hold keeps the pose") {
  const ChainModel m = arm_chain();
  SimConfig cfg;
  cfg.duration = 3.0;
  cfg.fatigue_enabled = false;
  const Trace t = simulate(m, rest_hold(m), cfg);
  double worst = 0.0;
  for (const auto& row : t.rows) {
    if (row.t < 1.0) continue;
    for (std::size_t d = 0; d < m.dof_count(); ++d) {
      worst = std::max(worst, std::abs(row.dofs[d].angle - m.initial_angles[d]));
    }
  }
  CHECK(worst < 0.05);
}

TEST_CASE("shoulder hold sags near the predicted endurance time") {
  const ChainModel m = arm_chain();
  SimConfig cfg;
  cfg.duration = 8.0;
  cfg.fatigue_enabled = false;
  cfg.params = coeffs(1.0, 0.01);
  const Trace ref = simulate(m, shoulder_hold(), cfg);
  cfg.fatigue_enabled = true;
  double prev = 1e9;
  for (double f : {0.5, 1.0, 2.0}) {
    CAPTURE(f);
    cfg.params = coeffs(f, 0.01);
    const Sag s = shoulder_sag(simulate(m, shoulder_hold(), cfg), ref);
    REQUIRE(s.onset > 0.0);
    const auto et = endurance_time(s.mean_load, cfg.params);
    REQUIRE(et.endurance_time);
    CHECK(std::abs(s.onset - *et.endurance_time) <= 0.3 * *et.endurance_time);
    CHECK(s.onset <= prev);
    prev = s.onset;
  }
}

TEST_CASE("zero coefficients match the fatigue-disabled run bit for bit") {
  for (const auto& task : {shoulder_hold(), reach_task()}) {
    SimConfig cfg;
    cfg.duration = 4.0;
    cfg.params = coeffs(0.0, 0.0, 0.0);
    const Trace zero = simulate(arm_chain(), task, cfg);
    cfg.fatigue_enabled = false;
    const Trace off = simulate(arm_chain(), task, cfg);
    CHECK(rows_bit_equal(zero, off));
  }
}

TEST_CASE("applied torque never exceeds the fatigued bound") {
  const ChainModel m = arm_chain();
  SimConfig cfg;
  cfg.duration = 6.0;
  cfg.params = coeffs(2.0, 0.1, 15.0);
  for (const auto& task : {shoulder_hold(), reach_task()}) {
    const Trace t = simulate(m, task, cfg);
    const auto audit = audit_torque_ceiling(t, m.bounds);
    CHECK(audit.checked == t.rows.size() * m.dof_count());
    CHECK(audit.violations == 0);
  }
  // a tampered trace is caught
  Trace t = simulate(m, shoulder_hold(), cfg);
  t.rows[10].dofs[1].applied = 2.0 * m.bounds.t_max[1];
  CHECK(audit_torque_ceiling(t, m.bounds).violations == 1);
}

TEST_CASE("same seed, same trace") {
  SimConfig cfg;
  cfg.duration = 2.0;
  cfg.randomized_init = true;
  cfg.seed = 11;
  const Trace a = simulate(arm_chain(), reach_task(), cfg);
  const Trace b = simulate(arm_chain(), reach_task(), cfg);
  CHECK(rows_bit_equal(a, b));
  cfg.seed = 12;
  CHECK_FALSE(rows_bit_equal(a, simulate(arm_chain(), reach_task(), cfg)));
}

TEST_CASE("scheduled parameter changes match the incremental harness") {
  SimConfig cfg;
  cfg.duration = 3.0;
  cfg.params = coeffs(1.0, 0.2);
  const std::vector<ParamChange> schedule{{20, coeffs(2.0, 0.1, 5.0)}, {55, coeffs(0.5, 0.3)}};
  const Trace batch = simulate(arm_chain(), shoulder_hold(), cfg, schedule);

  Harness h(arm_chain(), shoulder_hold(), cfg);
  Trace inc;
  inc.meta = h.meta();
  inc.rows.push_back(h.row());
  while (inc.rows.size() < batch.rows.size()) {
    for (const auto& c : schedule) {
      if (c.tick == h.tick()) h.set_params(c.params);
    }
    inc.rows.push_back(h.advance());
  }
  CHECK(rows_bit_equal(batch, inc));
  CHECK(h.limiter().params() == schedule.back().params);
}

TEST_CASE("harness reset returns to the start") {
  Harness h(arm_chain(), reach_task(), SimConfig{});
  const TraceRow first = h.row();
  for (int k = 0; k < 40; ++k) h.advance();
  CHECK(h.time() == doctest::Approx(40.0 / 30.0));
  h.reset(RestedInit{});
  CHECK(h.tick() == 0);
  CHECK(h.row() == first);
}

TEST_CASE("command interpolation") {
  TaskScript t;
  t.name = "ramp";
  t.kind = TaskKind::RepetitiveReach;
  t.period = 2.0;
  t.keyframes = {{0.0, {0.0}, 1.0}, {1.0, {1.0}, 0.5}};
  CHECK(command_at(t, 0.5).targets[0] == 0.0);
  CHECK(command_at(t, 1.5).targets[0] == 1.0);
  CHECK(command_at(t, 2.5).targets[0] == 0.0);  // wraps with the period
  t.interpolation = Interpolation::Linear;
  CHECK(command_at(t, 0.5).targets[0] == doctest::Approx(0.5));
  CHECK(command_at(t, 0.5).beta == doctest::Approx(0.75));
  CHECK(command_at(t, 1.5).targets[0] == doctest::Approx(0.5));  // back toward the first key

  t.rest = {{3.0, 1.0}};
  t.rest_pose = {0.2};
  t.rest_beta = 0.1;
  const Command r = command_at(t, 3.5);
  CHECK(r.resting);
  CHECK(r.targets[0] == 0.2);
  CHECK(r.beta == 0.1);
  CHECK_FALSE(r.limp);
  t.rest_mode = RestMode::Limp;
  CHECK(command_at(t, 3.5).limp);
  CHECK_FALSE(command_at(t, 4.5).resting);
}

TEST_CASE("task and config validation") {
  const ChainModel m = arm_chain();
  TaskScript t = shoulder_hold();
  CHECK_NOTHROW(t.validate(m));
  t.keyframes[0].targets.pop_back();
  CHECK_THROWS_AS(t.validate(m), ConfigError);
  t = shoulder_hold();
  t.keyframes[0].targets[1] = 5.0;  // past the shoulder limit
  CHECK_THROWS_AS(t.validate(m), ConfigError);
  t = reach_task();
  std::swap(t.keyframes.front(), t.keyframes.back());
  CHECK_THROWS_AS(t.validate(m), ConfigError);

  SimConfig c;
  CHECK(c.substeps() == 4);
  c.sim_dt = 1.0 / 100.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.duration = -1.0;
  CHECK_THROWS_AS(simulate(m, shoulder_hold(), c), ConfigError);
}

TEST_CASE("calibration") {
  SimConfig cfg;
  cfg.duration = 4.0;
  const auto hop = calibrate_bounds(hopper(), hop_task(), cfg);
  for (const char* leg : {"Hip_L", "Knee_L"}) {
    for (const char* arm : {"Shoulder_L", "Elbow_L"}) {
      CHECK(hop.t_max[hop.index_of(leg)] > hop.t_max[hop.index_of(arm)]);
    }
  }
  for (const auto& [a, b] : hop.symmetry_pairs) CHECK(hop.t_max[a] == hop.t_max[b]);

  ChainModel floating = arm_chain();
  floating.gravity = 0.0;
  const auto zero = calibrate_bounds(floating, rest_hold(floating), cfg);
  for (double v : zero.t_max) CHECK(v == 0.0);
}

TEST_CASE("performance metrics") {
  CHECK_THROWS_AS(performance_metrics(simulate(arm_chain(), shoulder_hold(), SimConfig{}), shoulder_hold()),
                  ConfigError);

  const TaskScript task = hop_task();
  SimConfig cfg;
  cfg.duration = 8.0;
  cfg.params = coeffs(1.0, 0.01);
  const ChainModel m = calibrated_hopper(task, cfg);

  cfg.fatigue_enabled = false;
  const auto fresh = performance_metrics(simulate(m, task, cfg), task);
  REQUIRE(fresh.cycles.size() >= 5);
  double lo = 1e9;
  double hi = 0.0;
  for (const auto& c : fresh.cycles) {
    lo = std::min(lo, c.amplitude);
    hi = std::max(hi, c.amplitude);
  }
  CHECK((hi - lo) / hi <= 0.05);

  cfg.fatigue_enabled = true;
  const auto tired = performance_metrics(simulate(m, task, cfg), task, fresh.reference_amplitude);
  CHECK(tired.slope_before_rest < 0.0);
  CHECK(tired.repetitions < fresh.repetitions);
  CHECK(least_squares_slope({1.0, 3.0, 5.0}) == doctest::Approx(2.0));
}

TEST_CASE("rest recovers fatigue and performance") {
  const TaskScript task = hop_task({{9.0, 13.5}});
  SimConfig cfg;
  cfg.duration = 33.0;
  cfg.params = coeffs(1.0, 0.01, 15.0);
  const ChainModel m = calibrated_hopper(task, cfg);
  const auto rep = recovery_experiment(m, task, cfg);
  CHECK(rep.decreased);
  CHECK(rep.fatigued_end < rep.fatigued_start);
  CHECK(rep.post_rest_amplitude > rep.pre_rest_amplitude);

  cfg.params = coeffs(1.0, 0.0, 15.0);
  const auto none = recovery_experiment(m, task, cfg);
  // no recovery; only the residual active pool drains into M_F
  CHECK_FALSE(none.decreased);
  CHECK(none.fatigued_end - none.fatigued_start < 1.0);
}

TEST_CASE("a diverging chain raises a simulation error") {
  ChainModel m = arm_chain();
  for (auto& l : m.links) l.gains = {1e7, 0.0};
  m.bounds.t_max.assign(m.dof_count(), 1e9);
  SimConfig cfg;
  cfg.duration = 5.0;
  cfg.fatigue_enabled = false;
  CHECK_THROWS_AS(simulate(m, reach_task(), cfg), SimulationError);
}
