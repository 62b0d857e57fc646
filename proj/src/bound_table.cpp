#include "fatigue/bound_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fatigue {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(std::size_t lineno, const std::string& what) {
  throw ConfigError("bound table line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

BoundTableFile read_bound_table_file(std::istream& in) {
  BoundTableFile f;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (!header) {
      if (cells.size() < 3 || cells[0] != "dof" || cells[1] != "partner") {
        fail(lineno, "header must be 'dof,partner,<task>...'");
      }
      f.tasks.assign(cells.begin() + 2, cells.end());
      header = true;
      continue;
    }
    if (cells.size() != f.tasks.size() + 2) {
      fail(lineno, "expected " + std::to_string(f.tasks.size() + 2) + " cells, got " +
                       std::to_string(cells.size()));
    }
    if (cells[0].empty()) fail(lineno, "empty DoF name");
    f.dofs.push_back(cells[0]);
    f.partners.push_back(cells[1]);
    std::vector<double> row;
    for (std::size_t i = 2; i < cells.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || *end != '\0' || !std::isfinite(v)) {
        fail(lineno, "'" + cells[i] + "' is not a number");
      }
      if (v < 0.0) fail(lineno, "negative bound for '" + cells[0] + "'");
      row.push_back(v);
    }
    f.values.push_back(std::move(row));
  }
  if (!header) throw ConfigError("bound table: missing header");
  for (std::size_t i = 0; i < f.partners.size(); ++i) {
    const auto& p = f.partners[i];
    if (!p.empty() && std::find(f.dofs.begin(), f.dofs.end(), p) == f.dofs.end()) {
      throw ConfigError("bound table: partner '" + p + "' of '" + f.dofs[i] + "' is not a DoF");
    }
  }
  return f;
}

BoundTableFile read_bound_table_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_bound_table_file(in);
}

TorqueBoundTable select_bounds(const BoundTableFile& f, const BoundAggregation& aggregation) {
  TorqueBoundTable t;
  t.names = f.dofs;
  if (const auto* p = std::get_if<PerTask>(&aggregation)) {
    auto it = std::find(f.tasks.begin(), f.tasks.end(), p->name);
    if (it == f.tasks.end()) throw ConfigError("bound table: unknown task '" + p->name + "'");
    const auto col = static_cast<std::size_t>(it - f.tasks.begin());
    for (const auto& row : f.values) t.t_max.push_back(row[col]);
  } else {
    for (const auto& row : f.values) t.t_max.push_back(*std::max_element(row.begin(), row.end()));
  }
  for (std::size_t i = 0; i < f.dofs.size(); ++i) {
    if (f.partners[i].empty()) continue;
    const std::size_t j = t.index_of(f.partners[i]);
    const std::pair<std::size_t, std::size_t> pair{std::min(i, j), std::max(i, j)};
    if (std::find(t.symmetry_pairs.begin(), t.symmetry_pairs.end(), pair) == t.symmetry_pairs.end()) {
      t.symmetry_pairs.push_back(pair);
    }
  }
  t.validate();
  return t;
}

TorqueBoundTable load_bound_table(const std::filesystem::path& path,
                                  const BoundAggregation& aggregation) {
  return select_bounds(read_bound_table_file(path), aggregation);
}

void write_bound_table(std::ostream& out, const TorqueBoundTable& table, const std::string& task) {
  table.validate();
  std::vector<std::string> partner(table.size());
  for (const auto& [l, r] : table.symmetry_pairs) {
    partner[l] = table.names[r];
    partner[r] = table.names[l];
  }
  out << "# fatigue-bounds v1\n";
  out << "dof,partner," << task << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.t_max[i]);
    out << table.names[i] << ',' << partner[i] << ',' << buf << '\n';
  }
}

}  // namespace fatigue
