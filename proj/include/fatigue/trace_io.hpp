#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fatigue/trace.hpp"

namespace fatigue {

enum class TraceFormat { Csv, Binary, Json };

TraceFormat parse_trace_format(const std::string& name);
std::string to_string(TraceFormat f);

/// Malformed, truncated or unsupported input. `location` is a 1-based line
/// for text formats and a byte offset for the binary format.
class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(const std::string& what, std::size_t location, bool is_line);
  std::size_t location() const { return location_; }
  bool is_line() const { return is_line_; }

 private:
  std::size_t location_;
  bool is_line_;
};

/// Flat column names in file order: t, then per DoF
/// <name>.{tl,ma,mr,mf,rc,torque,applied,case,drive,rest_rate,bound}
/// (+ angle, velocity with chain state), then the aux columns.
std::vector<std::string> trace_columns(const TraceMeta& meta);

void write_trace(std::ostream& out, const Trace& trace, TraceFormat format);
void write_trace(const std::filesystem::path& path, const Trace& trace, TraceFormat format);

struct TraceReadResult {
  Trace trace;
  TraceFormat format = TraceFormat::Csv;
  std::vector<std::string> warnings;  // conservation violations, one per offending row
};

/// Detects the format from the first bytes. Structural problems throw
/// TraceParseError; conservation violations are only reported as warnings.
TraceReadResult read_trace(std::istream& in);
TraceReadResult read_trace(const std::filesystem::path& path);

/// Throws TraceParseError when times are not strictly increasing or row
/// widths disagree with the metadata; returns conservation warnings.
std::vector<std::string> validate_trace(const Trace& trace, double tolerance = 1e-6);

}  // namespace fatigue
