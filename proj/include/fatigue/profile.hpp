#pragma once

#include <span>
#include <vector>

#include "fatigue/three_cc.hpp"
#include "fatigue/trace.hpp"

namespace fatigue {

/// Time-stamped parameter change; takes effect for every step starting at or
/// after `t`.
struct ParamSample {
  double t = 0.0;
  ThreeCCParams params;
};

/// Drives a single motor-unit pool through a piecewise-constant load profile.
///
/// Rows are emitted at t_k = k * dt for k = 0 .. round(t_end / dt), where t_end
/// is the last sample time. Row 0 holds the initial state with the drive
/// evaluated (not applied) at it; row k >= 1 holds the state after step k and
/// the diagnostics of that step. The load used by step k is the last sample
/// with t <= t_{k-1} (zero-order hold).
Trace integrate_profile(std::span<const LoadSample> profile, const ThreeCCParams& params, double dt,
                        const InitMode& init = RestedInit{});

/// Same as above with a parameter schedule. `schedule` must be non-empty,
/// start at t = 0 and be strictly increasing.
Trace integrate_profile(std::span<const LoadSample> profile, std::span<const ParamSample> schedule,
                        double dt, const InitMode& init = RestedInit{});

/// Validates that sample times start at 0 and increase strictly.
void check_profile(std::span<const LoadSample> profile);

/// Zero-order-hold lookup over a validated profile; 0 before the first sample.
double load_at(std::span<const LoadSample> profile, double t);

}  // namespace fatigue
