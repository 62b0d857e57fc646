#include "fatigue/three_cc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fatigue {

namespace {

bool finite_state(const CompartmentState& s) {
  return std::isfinite(s.active) && std::isfinite(s.resting) && std::isfinite(s.fatigued);
}

double clamp_pool(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

void ThreeCCParams::validate() const {
  auto check_rate = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError(std::string(name) + " must be finite and >= 0");
    }
  };
  check_rate(fatigue, "F");
  check_rate(recovery, "R");
  check_rate(rest_multiplier, "r");
  if (!std::isfinite(develop) || develop <= 0.0) throw ConfigError("L_D must be finite and > 0");
  if (!std::isfinite(relax) || relax <= 0.0) throw ConfigError("L_R must be finite and > 0");
}

Drive drive(const CompartmentState& s, double target_load, const ThreeCCParams& p) {
  if (s.active >= target_load) {
    return {p.relax * (target_load - s.active), DriveCase::Relax};
  }
  const double deficit = target_load - s.active;
  if (s.resting > deficit) {
    return {p.develop * deficit, DriveCase::Develop};
  }
  return {p.develop * s.resting, DriveCase::Exhausted};
}

double rest_rate(const CompartmentState& s, double target_load, const ThreeCCParams& p) {
  return s.active >= target_load ? p.rest_multiplier * p.recovery : p.recovery;
}

StepResult step(const CompartmentState& s, double target_load, const ThreeCCParams& p, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be finite and > 0");
  if (!std::isfinite(target_load) || target_load < 0.0) {
    throw ConfigError("target load must be finite and >= 0");
  }
  if (!finite_state(s)) throw ConfigError("compartment state must be finite");
  p.validate();

  const Drive c = drive(s, target_load, p);
  const double rr = rest_rate(s, target_load, p);

  CompartmentState next{
      s.active + dt * (c.value - p.fatigue * s.active),
      s.resting + dt * (-c.value + rr * s.fatigued),
      s.fatigued + dt * (p.fatigue * s.active - rr * s.fatigued),
  };

  CompartmentState clamped{clamp_pool(next.active), clamp_pool(next.resting),
                           clamp_pool(next.fatigued)};
  const bool saturated = !(clamped == next);
  const double total = clamped.sum();
  // total >= ~100 - rounding here: the raw increments sum to zero and clamping
  // only raises negative pools or trims values above 100.
  const double scale = 100.0 / total;
  clamped.active *= scale;
  clamped.resting *= scale;
  clamped.fatigued *= scale;

  return {clamped, StepDiagnostics{c.value, rr, c.which, saturated}};
}

double residual_capacity(const CompartmentState& s) { return (100.0 - s.fatigued) / 100.0; }

CompartmentState init_state(const InitMode& mode) {
  if (std::holds_alternative<RestedInit>(mode)) return CompartmentState{0.0, 100.0, 0.0};
  if (const auto* e = std::get_if<ExplicitInit>(&mode)) {
    const auto& s = e->state;
    auto in_range = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 100.0; };
    if (!in_range(s.active) || !in_range(s.resting) || !in_range(s.fatigued) ||
        std::abs(s.sum() - 100.0) > 1e-9) {
      throw ConfigError("initial state must have pools in [0, 100] summing to 100");
    }
    return s;
  }
  std::mt19937_64 rng(std::get<RandomizedInit>(mode).seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double resting = 100.0 * unit(rng);
  const double active = (100.0 - resting) * unit(rng);
  return CompartmentState{active, resting, std::max(0.0, 100.0 - resting - active)};
}

}  // namespace fatigue
