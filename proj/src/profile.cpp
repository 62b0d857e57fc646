#include "fatigue/profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fatigue {

namespace {

DofSample sample_of(const CompartmentState& s, double tl, const StepDiagnostics& d) {
  DofSample out;
  out.target_load = tl;
  out.state = s;
  out.rc = residual_capacity(s);
  out.drive = d.drive;
  out.rest_rate = d.rest_rate;
  out.which = d.which;
  return out;
}

const ThreeCCParams& params_at(std::span<const ParamSample> schedule, double t) {
  auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                             [](double v, const ParamSample& p) { return v < p.t; });
  return std::prev(it)->params;
}

}  // namespace

std::size_t Trace::aux_index(const std::string& name) const {
  auto it = std::find(meta.aux_names.begin(), meta.aux_names.end(), name);
  if (it == meta.aux_names.end()) throw std::out_of_range("no aux column '" + name + "'");
  return static_cast<std::size_t>(it - meta.aux_names.begin());
}

void check_profile(std::span<const LoadSample> profile) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const auto& s = profile[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.target_load) || s.target_load < 0.0) {
      throw ConfigError("profile sample " + std::to_string(i) + " is not finite or has TL < 0");
    }
    if (i == 0 && s.t != 0.0) throw ConfigError("profile must start at t = 0");
    if (i > 0 && !(s.t > profile[i - 1].t)) {
      throw ConfigError("profile times must be strictly increasing (sample " + std::to_string(i) +
                        ")");
    }
  }
}

double load_at(std::span<const LoadSample> profile, double t) {
  auto it = std::upper_bound(profile.begin(), profile.end(), t,
                             [](double v, const LoadSample& s) { return v < s.t; });
  if (it == profile.begin()) return 0.0;
  return std::prev(it)->target_load;
}

Trace integrate_profile(std::span<const LoadSample> profile, const ThreeCCParams& params, double dt,
                        const InitMode& init) {
  const ParamSample only{0.0, params};
  return integrate_profile(profile, std::span<const ParamSample>(&only, 1), dt, init);
}

Trace integrate_profile(std::span<const LoadSample> profile, std::span<const ParamSample> schedule,
                        double dt, const InitMode& init) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be finite and > 0");
  check_profile(profile);
  if (schedule.empty() || schedule.front().t != 0.0) {
    throw ConfigError("parameter schedule must start at t = 0");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    schedule[i].params.validate();
    if (i > 0 && !(schedule[i].t > schedule[i - 1].t)) {
      throw ConfigError("parameter schedule times must be strictly increasing");
    }
  }

  Trace trace;
  trace.meta.params = schedule.front().params;
  trace.meta.dt = dt;
  trace.meta.dof_names = {"dof0"};
  if (const auto* r = std::get_if<RandomizedInit>(&init)) trace.meta.seed = r->seed;

  CompartmentState state = init_state(init);
  {
    const double tl0 = load_at(profile, 0.0);
    const auto& p0 = schedule.front().params;
    const Drive c = drive(state, tl0, p0);
    const StepDiagnostics d0{c.value, rest_rate(state, tl0, p0), c.which, false};
    trace.rows.push_back(TraceRow{0.0, {sample_of(state, tl0, d0)}, {}});
  }
  if (profile.empty()) return trace;

  const auto steps = static_cast<long long>(std::llround(profile.back().t / dt));
  trace.rows.reserve(static_cast<std::size_t>(steps) + 1);
  for (long long k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * dt;
    const double tl = load_at(profile, t_prev);
    const auto& p = params_at(schedule, t_prev);
    const StepResult r = step(state, tl, p, dt);
    state = r.state;
    trace.rows.push_back(TraceRow{static_cast<double>(k) * dt, {sample_of(state, tl, r.diag)}, {}});
  }
  return trace;
}

}  // namespace fatigue
