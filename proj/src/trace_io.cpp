#include "fatigue/trace_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fatigue/config_json.hpp"

namespace fatigue {

static_assert(std::endian::native == std::endian::little, "binary traces assume little-endian hosts");

namespace {

constexpr std::array<char, 8> kMagic{'F', '3', 'C', 'C', 'T', 'R', 'C', '\0'};
constexpr const char* kCsvBanner = "# fatigue-trace v";
constexpr std::size_t kDofColumns = 11;
constexpr std::size_t kChainColumns = 2;

std::size_t per_dof(const TraceMeta& m) { return kDofColumns + (m.chain_state ? kChainColumns : 0); }

std::size_t width(const TraceMeta& m) {
  return 1 + m.dof_names.size() * per_dof(m) + m.aux_names.size();
}

void flatten(const TraceMeta& m, const TraceRow& r, std::vector<double>& out) {
  out.clear();
  out.push_back(r.t);
  for (const DofSample& s : r.dofs) {
    out.insert(out.end(), {s.target_load, s.state.active, s.state.resting, s.state.fatigued, s.rc,
                           s.torque, s.applied, static_cast<double>(s.which), s.drive, s.rest_rate,
                           s.bound});
    if (m.chain_state) out.insert(out.end(), {s.angle, s.velocity});
  }
  out.insert(out.end(), r.aux.begin(), r.aux.end());
}

// Returns an empty string on success, else the reason.
std::string unflatten(const TraceMeta& m, const double* v, std::size_t n, TraceRow& r) {
  if (n != width(m)) {
    return "expected " + std::to_string(width(m)) + " columns, got " + std::to_string(n);
  }
  r.t = v[0];
  r.dofs.resize(m.dof_names.size());
  std::size_t k = 1;
  for (DofSample& s : r.dofs) {
    s.target_load = v[k];
    s.state = {v[k + 1], v[k + 2], v[k + 3]};
    s.rc = v[k + 4];
    s.torque = v[k + 5];
    s.applied = v[k + 6];
    const double c = v[k + 7];
    if (c != 1.0 && c != 2.0 && c != 3.0) return "case column must be 1, 2 or 3";
    s.which = static_cast<DriveCase>(static_cast<int>(c));
    s.drive = v[k + 8];
    s.rest_rate = v[k + 9];
    s.bound = v[k + 10];
    k += kDofColumns;
    if (m.chain_state) {
      s.angle = v[k];
      s.velocity = v[k + 1];
      k += kChainColumns;
    }
  }
  r.aux.assign(v + k, v + n);
  return {};
}

Json meta_to_json(const TraceMeta& m) {
  return {{"schema_version", m.schema_version},
          {"params", to_json(m.params)},
          {"dt", m.dt},
          {"model_hash", m.model_hash},
          {"seed", m.seed},
          {"dof_names", m.dof_names},
          {"chain_state", m.chain_state},
          {"fatigue_enabled", m.fatigue_enabled},
          {"aux_names", m.aux_names}};
}

TraceMeta meta_from_json(const Json& j, std::size_t loc, bool is_line) {
  TraceMeta m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kTraceSchemaVersion) {
      throw TraceParseError("unsupported trace schema version " + std::to_string(m.schema_version) +
                                " (this build reads v" + std::to_string(kTraceSchemaVersion) + ")",
                            loc, is_line);
    }
    m.params = params_from_json(j.at("params"));
    m.dt = j.at("dt").get<double>();
    m.model_hash = j.at("model_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dof_names = j.at("dof_names").get<std::vector<std::string>>();
    m.chain_state = j.at("chain_state").get<bool>();
    m.fatigue_enabled = j.value("fatigue_enabled", true);
    m.aux_names = j.at("aux_names").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw TraceParseError(std::string("bad trace metadata: ") + e.what(), loc, is_line);
  } catch (const ConfigError& e) {
    throw TraceParseError(std::string("bad trace metadata: ") + e.what(), loc, is_line);
  }
  return m;
}

void put_double(std::string& s, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  s.append(buf, static_cast<std::size_t>(n));
}

void write_csv(std::ostream& out, const Trace& tr) {
  out << kCsvBanner << kTraceSchemaVersion << '\n';
  out << "# meta: " << meta_to_json(tr.meta).dump() << '\n';
  const auto cols = trace_columns(tr.meta);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  std::vector<double> v;
  std::string line;
  for (const TraceRow& r : tr.rows) {
    flatten(tr.meta, r, v);
    line.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) line.push_back(',');
      put_double(line, v[i]);
    }
    line.push_back('\n');
    out << line;
  }
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_binary(std::ostream& out, const Trace& tr) {
  const std::string meta = meta_to_json(tr.meta).dump();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kTraceSchemaVersion);
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(out, tr.rows.size());
  put<std::uint64_t>(out, width(tr.meta));
  std::vector<double> v;
  for (const TraceRow& r : tr.rows) {
    flatten(tr.meta, r, v);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
}

void write_json(std::ostream& out, const Trace& tr) {
  Json rows = Json::array();
  std::vector<double> v;
  for (const TraceRow& r : tr.rows) {
    flatten(tr.meta, r, v);
    rows.push_back(v);
  }
  const Json j{{"format", "fatigue-trace"},
               {"meta", meta_to_json(tr.meta)},
               {"columns", trace_columns(tr.meta)},
               {"rows", rows}};
  out << j.dump() << '\n';
}

std::vector<double> parse_csv_values(const std::string& line, std::size_t lineno) {
  std::vector<double> v;
  const char* p = line.c_str();
  const char* end = p + line.size();
  while (true) {
    char* stop = nullptr;
    const double x = std::strtod(p, &stop);
    if (stop == p) {
      throw TraceParseError("malformed number in column " + std::to_string(v.size() + 1), lineno, true);
    }
    v.push_back(x);
    p = stop;
    if (p == end || *p == '\r') break;
    if (*p != ',') throw TraceParseError("expected ',' after column " + std::to_string(v.size()), lineno, true);
    ++p;
  }
  return v;
}

Trace read_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line.rfind(kCsvBanner, 0) != 0) {
    throw TraceParseError("missing '# fatigue-trace v<N>' banner", lineno, true);
  }
  const int version = std::atoi(line.c_str() + std::strlen(kCsvBanner));
  if (version != kTraceSchemaVersion) {
    throw TraceParseError("unsupported trace schema version " + std::to_string(version), lineno, true);
  }
  ++lineno;
  const std::string meta_prefix = "# meta: ";
  if (!std::getline(in, line) || line.rfind(meta_prefix, 0) != 0) {
    throw TraceParseError("missing '# meta:' line", lineno, true);
  }
  Json mj;
  try {
    mj = Json::parse(line.substr(meta_prefix.size()));
  } catch (const Json::parse_error& e) {
    throw TraceParseError(std::string("metadata is not valid JSON: ") + e.what(), lineno, true);
  }
  Trace tr;
  tr.meta = meta_from_json(mj, lineno, true);
  ++lineno;
  if (!std::getline(in, line)) throw TraceParseError("missing header row", lineno, true);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected;
  for (const auto& c : trace_columns(tr.meta)) expected += (expected.empty() ? "" : ",") + c;
  if (line != expected) throw TraceParseError("header row does not match metadata", lineno, true);

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (in.eof()) {
      // a complete CSV row always ends with a newline
      throw TraceParseError("truncated row (no trailing newline)", lineno, true);
    }
    const auto v = parse_csv_values(line, lineno);
    TraceRow r;
    if (auto err = unflatten(tr.meta, v.data(), v.size(), r); !err.empty()) {
      throw TraceParseError(err, lineno, true);
    }
    if (!tr.rows.empty() && !(r.t > tr.rows.back().t)) {
      throw TraceParseError("time must be strictly increasing", lineno, true);
    }
    tr.rows.push_back(std::move(r));
  }
  return tr;
}

template <class T>
T get_raw(std::istream& in, std::size_t& offset, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != static_cast<std::streamsize>(sizeof v)) {
    throw TraceParseError(std::string("truncated binary trace while reading ") + what, offset, false);
  }
  offset += sizeof v;
  return v;
}

Trace read_binary(std::istream& in) {
  std::size_t offset = 0;
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || magic != kMagic) throw TraceParseError("bad binary trace magic", 0, false);
  offset = 8;
  const auto version = get_raw<std::uint32_t>(in, offset, "version");
  if (version != static_cast<std::uint32_t>(kTraceSchemaVersion)) {
    throw TraceParseError("unsupported trace schema version " + std::to_string(version), 8, false);
  }
  const auto meta_len = get_raw<std::uint64_t>(in, offset, "metadata length");
  if (meta_len > (1u << 26)) throw TraceParseError("implausible metadata length", offset - 8, false);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (static_cast<std::uint64_t>(in.gcount()) != meta_len) {
    throw TraceParseError("truncated binary trace in metadata", offset + static_cast<std::size_t>(in.gcount()), false);
  }
  Json mj;
  try {
    mj = Json::parse(meta);
  } catch (const Json::parse_error& e) {
    throw TraceParseError(std::string("metadata is not valid JSON: ") + e.what(), offset, false);
  }
  Trace tr;
  tr.meta = meta_from_json(mj, offset, false);
  offset += meta_len;
  const auto rows = get_raw<std::uint64_t>(in, offset, "row count");
  const auto cols = get_raw<std::uint64_t>(in, offset, "column count");
  if (cols != width(tr.meta)) {
    throw TraceParseError("column count " + std::to_string(cols) + " does not match metadata (" +
                              std::to_string(width(tr.meta)) + ")",
                          offset - 8, false);
  }
  std::vector<double> v(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const std::size_t row_start = offset;
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(cols * sizeof(double)));
    if (static_cast<std::uint64_t>(in.gcount()) != cols * sizeof(double)) {
      throw TraceParseError("truncated binary trace in row " + std::to_string(i),
                            row_start + static_cast<std::size_t>(in.gcount()), false);
    }
    offset += cols * sizeof(double);
    TraceRow r;
    if (auto err = unflatten(tr.meta, v.data(), v.size(), r); !err.empty()) {
      throw TraceParseError(err, row_start, false);
    }
    if (!tr.rows.empty() && !(r.t > tr.rows.back().t)) {
      throw TraceParseError("time must be strictly increasing", row_start, false);
    }
    tr.rows.push_back(std::move(r));
  }
  return tr;
}

Trace read_json_trace(std::istream& in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw TraceParseError(std::string("invalid JSON trace: ") + e.what(), e.byte, false);
  }
  if (!j.is_object() || j.value("format", "") != "fatigue-trace" || !j.contains("meta") ||
      !j.contains("rows")) {
    throw TraceParseError("not a fatigue-trace JSON document", 0, false);
  }
  Trace tr;
  tr.meta = meta_from_json(j["meta"], 0, false);
  const auto& rows = j["rows"];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> v;
    try {
      v = rows[i].get<std::vector<double>>();
    } catch (const Json::exception& e) {
      throw TraceParseError("row " + std::to_string(i) + ": " + e.what(), i, false);
    }
    TraceRow r;
    if (auto err = unflatten(tr.meta, v.data(), v.size(), r); !err.empty()) {
      throw TraceParseError("row " + std::to_string(i) + ": " + err, i, false);
    }
    if (!tr.rows.empty() && !(r.t > tr.rows.back().t)) {
      throw TraceParseError("row " + std::to_string(i) + ": time must be strictly increasing", i, false);
    }
    tr.rows.push_back(std::move(r));
  }
  return tr;
}

}  // namespace

TraceParseError::TraceParseError(const std::string& what, std::size_t location, bool is_line)
    : std::runtime_error(what + (is_line ? " (line " : " (byte offset ") + std::to_string(location) + ")"),
      location_(location),
      is_line_(is_line) {}

TraceFormat parse_trace_format(const std::string& name) {
  if (name == "csv") return TraceFormat::Csv;
  if (name == "binary" || name == "bin") return TraceFormat::Binary;
  if (name == "json") return TraceFormat::Json;
  throw ConfigError("unknown trace format '" + name + "' (csv, binary, json)");
}

std::string to_string(TraceFormat f) {
  switch (f) {
    case TraceFormat::Csv: return "csv";
    case TraceFormat::Binary: return "binary";
    case TraceFormat::Json: return "json";
  }
  return "?";
}

std::vector<std::string> trace_columns(const TraceMeta& meta) {
  static const char* dof_cols[] = {"tl", "ma", "mr", "mf", "rc", "torque", "applied", "case",
                                   "drive", "rest_rate", "bound"};
  std::vector<std::string> c{"t"};
  for (const auto& d : meta.dof_names) {
    for (const char* s : dof_cols) c.push_back(d + "." + s);
    if (meta.chain_state) {
      c.push_back(d + ".angle");
      c.push_back(d + ".velocity");
    }
  }
  c.insert(c.end(), meta.aux_names.begin(), meta.aux_names.end());
  return c;
}

void write_trace(std::ostream& out, const Trace& trace, TraceFormat format) {
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    if (trace.rows[i].dofs.size() != trace.dof_count() || trace.rows[i].aux.size() != trace.meta.aux_names.size()) {
      throw ConfigError("write_trace: row " + std::to_string(i) + " does not match the metadata");
    }
  }
  switch (format) {
    case TraceFormat::Csv: write_csv(out, trace); break;
    case TraceFormat::Binary: write_binary(out, trace); break;
    case TraceFormat::Json: write_json(out, trace); break;
  }
  if (!out) throw std::runtime_error("write_trace: stream error");
}

void write_trace(const std::filesystem::path& path, const Trace& trace, TraceFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_trace(out, trace, format);
}

TraceReadResult read_trace(std::istream& in) {
  TraceReadResult res;
  const int c = in.peek();
  if (c == std::char_traits<char>::eof()) throw TraceParseError("empty input", 1, true);
  if (c == '#') {
    res.format = TraceFormat::Csv;
    res.trace = read_csv(in);
  } else if (c == 'F') {
    res.format = TraceFormat::Binary;
    res.trace = read_binary(in);
  } else if (c == '{') {
    res.format = TraceFormat::Json;
    res.trace = read_json_trace(in);
  } else {
    throw TraceParseError("unrecognised trace format", 0, false);
  }
  res.warnings = validate_trace(res.trace);
  return res;
}

TraceReadResult read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_trace(in);
}

std::vector<std::string> validate_trace(const Trace& trace, double tolerance) {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    if (r.dofs.size() != trace.dof_count() || r.aux.size() != trace.meta.aux_names.size()) {
      throw TraceParseError("row width does not match the metadata", i, false);
    }
    if (i > 0 && !(r.t > trace.rows[i - 1].t)) {
      throw TraceParseError("time must be strictly increasing at row " + std::to_string(i), i, false);
    }
    for (std::size_t d = 0; d < r.dofs.size(); ++d) {
      const double dev = r.dofs[d].state.sum() - 100.0;
      if (!(std::abs(dev) <= tolerance)) {
        std::ostringstream w;
        w << "row " << i << " (t=" << r.t << "), DoF '" << trace.meta.dof_names[d]
          << "': compartments sum to " << r.dofs[d].state.sum();
        warnings.push_back(w.str());
      }
    }
  }
  return warnings;
}

}  // namespace fatigue
