#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fatigue {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Coefficients of the three-compartment controller. F and R are per-second
/// rates, r multiplies R while the active pool covers the load, and L_D / L_R
/// set how fast the drive develops and relaxes force.
struct ThreeCCParams {
  double fatigue = 0.0;        // F
  double recovery = 0.0;       // R
  double rest_multiplier = 1.0;  // r
  double develop = 10.0;       // L_D
  double relax = 10.0;         // L_R

  /// Throws ConfigError when a coefficient is negative, non-finite, or a drive
  /// factor is not strictly positive.
  void validate() const;

  friend bool operator==(const ThreeCCParams&, const ThreeCCParams&) = default;
};

/// Motor-unit pools in %MVC. Always sums to 100.
struct CompartmentState {
  double active = 0.0;     // M_A
  double resting = 100.0;  // M_R
  double fatigued = 0.0;   // M_F

  double sum() const { return active + resting + fatigued; }
  friend bool operator==(const CompartmentState&, const CompartmentState&) = default;
};

enum class DriveCase : std::uint8_t {
  Relax = 1,      // M_A >= TL
  Develop = 2,    // M_A < TL and M_R > TL - M_A
  Exhausted = 3,  // M_A < TL and M_R <= TL - M_A
};

struct Drive {
  double value = 0.0;  // C, %MVC per second
  DriveCase which = DriveCase::Relax;
};

struct StepDiagnostics {
  double drive = 0.0;
  double rest_rate = 0.0;  // R_r
  DriveCase which = DriveCase::Relax;
  bool saturated = false;  // post-step clamping changed a compartment
};

struct StepResult {
  CompartmentState state;
  StepDiagnostics diag;
};

struct LoadSample {
  double t = 0.0;
  double target_load = 0.0;  // TL, %MVC
};

struct RestedInit {};
struct RandomizedInit {
  std::uint64_t seed = 0;
};
/// Starts from a given state (must be valid).
struct ExplicitInit {
  CompartmentState state;
};
using InitMode = std::variant<RestedInit, RandomizedInit, ExplicitInit>;

Drive drive(const CompartmentState& state, double target_load, const ThreeCCParams& params);

double rest_rate(const CompartmentState& state, double target_load, const ThreeCCParams& params);

/// One forward-Euler step followed by clamping each pool to [0, 100] and
/// rescaling so the pools sum to 100.
StepResult step(const CompartmentState& state, double target_load, const ThreeCCParams& params,
                double dt);

/// Fraction of non-fatigued motor units, (100 - M_F) / 100.
double residual_capacity(const CompartmentState& state);

/// Rested gives (0, 100, 0). Randomized draws M_R ~ U(0,100), then
/// M_A ~ U(0, 100 - M_R); M_F takes the remainder. Explicit states are
/// checked for finiteness, range and sum.
CompartmentState init_state(const InitMode& mode);

}  // namespace fatigue
