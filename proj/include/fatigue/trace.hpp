#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fatigue/three_cc.hpp"

namespace fatigue {

inline constexpr int kTraceSchemaVersion = 1;

/// Per-DoF quantities recorded at one row. Torques are zero for pure load
/// profiles; angle/velocity are only meaningful when the trace carries chain
/// state.
struct DofSample {
  double target_load = 0.0;
  CompartmentState state;
  double rc = 1.0;
  double drive = 0.0;
  double rest_rate = 0.0;
  DriveCase which = DriveCase::Relax;
  double torque = 0.0;   // intended (PD) torque
  double applied = 0.0;  // clipped torque actually applied
  double bound = 0.0;    // RC * T_max at this row
  double angle = 0.0;
  double velocity = 0.0;

  friend bool operator==(const DofSample&, const DofSample&) = default;
};

struct TraceRow {
  double t = 0.0;
  std::vector<DofSample> dofs;
  std::vector<double> aux;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TraceMeta {
  int schema_version = kTraceSchemaVersion;
  ThreeCCParams params;
  double dt = 0.0;
  std::string model_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> dof_names;
  bool chain_state = false;
  bool fatigue_enabled = true;  // false: clip used T_max, compartments tracked only
  std::vector<std::string> aux_names;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<TraceRow> rows;

  std::size_t dof_count() const { return meta.dof_names.size(); }
  /// Index of a named aux column, or throws std::out_of_range.
  std::size_t aux_index(const std::string& name) const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

}  // namespace fatigue
