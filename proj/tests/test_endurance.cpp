#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fatigue/endurance.hpp"
#include "fatigue/profile.hpp"
#include "oracle.hpp"

using namespace fatigue;

namespace {

ThreeCCParams coeffs(double f, double r, double m = 1.0) { return ThreeCCParams{f, r, m, 10.0, 10.0}; }

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("endurance anchors") {
  const auto fast = endurance_time(50.0, coeffs(1.0, 0.2));
  REQUIRE(fast.failure_detected);
  CHECK(*fast.endurance_time >= 1.0);
  CHECK(*fast.endurance_time <= 5.0);

  const auto slow = endurance_time(50.0, coeffs(0.1, 0.02));
  REQUIRE(slow.failure_detected);
  CHECK(*slow.endurance_time >= 8.0);
  CHECK(*slow.endurance_time <= 20.0);
}

TEST_CASE("endurance agrees with the fine-step reference") {
  for (double f : {0.5, 1.0, 2.0}) {
    for (double tl : {30.0, 50.0, 80.0}) {
      const oracle::Coeffs c{f, 0.2, 1.0};
      const double ref = oracle::failure_time(tl, c, 1e-4, 200.0);
      const auto et = endurance_time(tl, coeffs(f, 0.2), 1.0 / 3000.0, 200.0);
      REQUIRE(ref > 0.0);
      REQUIRE(et.endurance_time);
      CHECK(*et.endurance_time == doctest::Approx(ref).epsilon(0.01));
    }
  }
}

TEST_CASE("endurance preconditions and edge cases") {
  CHECK_THROWS_AS(endurance_time(0.0, coeffs(1, 0.2)), ConfigError);
  CHECK_THROWS_AS(endurance_time(-5.0, coeffs(1, 0.2)), ConfigError);
  CHECK_THROWS_AS(endurance_time(50.0, coeffs(-1, 0.2)), ConfigError);
  CHECK_THROWS_AS(endurance_time(50.0, coeffs(1, 0.2), 0.0), ConfigError);

  const auto instant = endurance_time(100.0, coeffs(1, 0.2));
  REQUIRE(instant.endurance_time);
  CHECK(*instant.endurance_time > 0.0);
  CHECK(*instant.endurance_time <= kControlDt);

  const auto never = endurance_time(50.0, coeffs(0.0, 0.0), kControlDt, 100.0);
  CHECK_FALSE(never.endurance_time);
  CHECK(never.final_state.fatigued == 0.0);
}

TEST_CASE("property: endurance shrinks with load and fatigue rate") {
  double prev = 1e9;
  for (double tl = 25.0; tl <= 95.0; tl += 5.0) {
    const auto r = endurance_time(tl, coeffs(1.0, 0.2), kControlDt, 2000.0);
    REQUIRE(r.endurance_time);
    CHECK(*r.endurance_time <= prev);
    prev = *r.endurance_time;
  }
  prev = 1e9;
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto r = endurance_time(60.0, coeffs(f, 0.2));
    REQUIRE(r.endurance_time);
    CHECK(*r.endurance_time <= prev);
    prev = *r.endurance_time;
  }
  // more recovery never shortens endurance
  prev = 0.0;
  for (double rec : {0.0, 0.1, 0.2, 0.3}) {
    const auto r = endurance_time(40.0, coeffs(1.0, rec), kControlDt, 2000.0);
    const double et = r.endurance_time ? *r.endurance_time : 1e9;
    CHECK(et >= prev);
    prev = et;
  }
}

TEST_CASE("sustainable load") {
  const auto p = coeffs(1.0, 0.2);
  CHECK_FALSE(endurance_time(15.0, p).failure_detected);
  CHECK(endurance_time(20.0, p).failure_detected);

  const auto s = sustainable_load(p, 0.01, kControlDt, 2000.0);
  CHECK(s.closed_form == doctest::Approx(100.0 * 0.2 / 1.2));
  CHECK(s.closed_form_finite_drive == doctest::Approx(100.0 / (1.0 + 10.0 / (11.0 * 0.2))));
  CHECK(std::abs(s.bisected - s.closed_form_finite_drive) < 0.1);

  // with an ideal drive the two closed forms coincide
  ThreeCCParams stiff = p;
  stiff.develop = 1e9;
  CHECK(sustainable_load_finite_drive(stiff) == doctest::Approx(sustainable_load_closed_form(p)));

  CHECK(sustainable_load_closed_form(coeffs(0.0, 0.2)) == 100.0);
  CHECK(sustainable_load_finite_drive(coeffs(1.0, 0.0)) == 0.0);
}

TEST_CASE("property: r does not move the threshold of a continuous hold") {
  // the active pool stays below TL during a hold, so R_r = R
  for (double tl : {10.0, 30.0, 60.0}) {
    const auto a = endurance_time(tl, coeffs(1.0, 0.1, 1.0), kControlDt, 500.0);
    const auto b = endurance_time(tl, coeffs(1.0, 0.1, 15.0), kControlDt, 500.0);
    CHECK(a.endurance_time == b.endurance_time);
  }
}

TEST_CASE("L_D and L_R sensitivity") {
  const auto slow = ld_lr_sensitivity(50.0, coeffs(0.1, 0.02));
  CHECK(slow.times.size() == 3);
  CHECK(slow.max_relative_change <= 0.15);
  const auto fast = ld_lr_sensitivity(50.0, coeffs(1.0, 0.2));
  CHECK(fast.reference_time > 0.0);
  // L_D = 2 cannot bring M_A near TL when F = 1 (recorded as a known gap)
  CHECK(fast.max_relative_change > 0.15);
  CHECK_THROWS_AS(ld_lr_sensitivity(5.0, coeffs(1.0, 0.2)), ConfigError);
}

TEST_CASE("intermittent loading") {
  const auto p = coeffs(1.0, 0.2, 15.0);
  const auto steady = intermittent_recovery({10.0, 0.0}, 30.0, p, 60.0);
  const auto short_rest = intermittent_recovery({5.0, 2.0}, 30.0, p, 60.0);
  const auto long_rest = intermittent_recovery({5.0, 10.0}, 30.0, p, 60.0);
  CHECK(long_rest.mean_fatigued < short_rest.mean_fatigued);
  CHECK(short_rest.mean_fatigued < steady.mean_fatigued);
  CHECK(long_rest.cycle_peaks.size() == 4);
  // the peak reached inside each cycle settles instead of growing without bound
  CHECK(long_rest.cycle_peaks.back() <= long_rest.cycle_peaks.front() * 1.5);
  CHECK_THROWS_AS(intermittent_recovery({0.0, 1.0}, 30.0, p, 10.0), ConfigError);

  // with r = 1 rest recovers more slowly
  const auto plain = intermittent_recovery({5.0, 10.0}, 30.0, coeffs(1.0, 0.2, 1.0), 60.0);
  CHECK(long_rest.mean_fatigued < plain.mean_fatigued);
}

TEST_CASE("joint ranking") {
  Trace t;
  t.meta.dof_names = {"a", "b", "c"};
  t.meta.dt = 1.0;
  for (int k = 0; k < 3; ++k) {
    TraceRow row;
    row.t = k;
    row.dofs.resize(3);
    row.dofs[0].state = {0, 100.0 - 10.0 * k, 10.0 * k};
    row.dofs[1].state = {0, 100.0 - 20.0 * k, 20.0 * k};
    row.dofs[2].state = {0, 80, k == 2 ? 20.0 : 10.0};  // same peak as b at k = 1, smaller integral
    t.rows.push_back(row);
  }
  const auto r = joint_fatigue_ranking(t);
  REQUIRE(r.size() == 3);
  CHECK(r[0].name == "b");
  CHECK(r[0].peak_fatigued == 40.0);
  CHECK(r[1].name == "c");
  CHECK(r[2].name == "a");
  CHECK(r[2].integral_fatigued == doctest::Approx(20.0));

  std::ostringstream out;
  write_ranking_csv(out, r);
  CHECK(count_lines(out.str()) == 4);
  CHECK(out.str().rfind("rank,dof,name,peak_mf,integral_mf\n", 0) == 0);
}

TEST_CASE("sweep grid") {
  const SweepSpec spec{{0.5, 1.0, 2.0}, {0.01, 0.2}, {1.0, 15.0}};
  const auto grid = sweep(spec, 40.0, kControlDt, 300.0, 4);
  REQUIRE(grid.cells.size() == 12);
  CHECK(grid.at(2, 1, 0).params == ThreeCCParams{2.0, 0.2, 1.0, 10.0, 10.0});
  CHECK(grid.at(0, 0, 1).params.rest_multiplier == 15.0);
  for (const auto& c : grid.cells) {
    const auto solo = endurance_time(40.0, c.params, kControlDt, 300.0);
    CHECK(solo.endurance_time == c.result.endurance_time);
  }
  const auto serial = sweep(spec, 40.0, kControlDt, 300.0, 1);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    CHECK(serial.cells[i].result.endurance_time == grid.cells[i].result.endurance_time);
  }
  std::ostringstream out;
  write_sweep_csv(out, grid);
  CHECK(count_lines(out.str()) == 13);

  const auto doubled = sweep_map(sweep_params(spec), [](const ThreeCCParams& p) { return 2.0 * p.fatigue; }, 3);
  CHECK(doubled.size() == 12);
  CHECK(doubled[11] == 4.0);
}
