#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "fatigue/torque.hpp"

namespace fatigue {

/// One column of the file.
struct PerTask {
  std::string name;
};
/// Row-wise maximum over all task columns.
struct MaxAcrossTasks {};
using BoundAggregation = std::variant<PerTask, MaxAcrossTasks>;

/// Torque bound file: `dof,partner,<task>...` with one row per DoF. An empty
/// partner means the DoF has no mirror.
struct BoundTableFile {
  std::vector<std::string> dofs;
  std::vector<std::string> partners;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> values;  // [dof][task], N*m
};

/// Throws ConfigError (with the line number) on malformed rows, negative
/// entries or partners that name no DoF.
BoundTableFile read_bound_table_file(std::istream& in);
BoundTableFile read_bound_table_file(const std::filesystem::path& path);

TorqueBoundTable select_bounds(const BoundTableFile& file, const BoundAggregation& aggregation);

TorqueBoundTable load_bound_table(const std::filesystem::path& path,
                                  const BoundAggregation& aggregation);

/// Writes a single-task file (column `task`) from a bound table.
void write_bound_table(std::ostream& out, const TorqueBoundTable& table,
                       const std::string& task = "calibrated");

}  // namespace fatigue
