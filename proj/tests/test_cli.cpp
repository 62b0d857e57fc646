#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fatigue/bound_table.hpp"
#include "fatigue/cli.hpp"
#include "fatigue/trace_io.hpp"

using namespace fatigue;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / "fatigue_cli";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("endurance") {
  const Run r = cli({"endurance", "--tl", "50", "--f", "1", "--r-coef", "0.2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("endurance_time ", 0) == 0);
  const double et = std::stod(r.out.substr(15));
  CHECK(et >= 1.0);
  CHECK(et <= 5.0);

  CHECK(cli({"endurance", "--tl", "10", "--f", "1", "--r-coef", "0.2"}).out.find("unbounded") !=
        std::string::npos);

  const Run zero = cli({"endurance", "--tl", "0"});
  CHECK(zero.code == kExitUsage);
  CHECK(zero.err.find("TL must be positive") != std::string::npos);
  CHECK(cli({"endurance", "--tl", "50", "--f", "-1"}).code == kExitUsage);
}

TEST_CASE("endurance writes its trace") {
  const auto path = scratch() / "end.json";
  const Run r = cli({"endurance", "--tl", "60", "--out", path.string(), "--format", "json"});
  REQUIRE(r.code == kExitOk);
  const auto t = read_trace(path);
  CHECK(t.format == TraceFormat::Json);
  CHECK_FALSE(t.trace.rows.empty());
}

TEST_CASE("sweep") {
  const Run r = cli({"sweep", "--f", "0.5,1,2", "--r-coef", "0.01,0.2", "--rest-mult", "1,15", "--tl", "40"});
  CHECK(r.code == kExitOk);
  CHECK(count_lines(r.out) == 13);
}

TEST_CASE("simulate, rank and calibrate") {
  const auto dir = scratch();
  const auto trace = dir / "hold.bin";
  Run r = cli({"simulate", "--model", "arm4", "--task", "shoulder_hold", "--duration", "3", "--out",
               trace.string(), "--format", "binary"});
  REQUIRE(r.code == kExitOk);
  const auto t = read_trace(trace);
  CHECK(t.trace.rows.size() == 91);
  CHECK(t.trace.meta.dof_names.size() == 4);

  r = cli({"rank", trace.string()});
  CHECK(r.code == kExitOk);
  CHECK(count_lines(r.out) == 5);
  CHECK(r.out.find("Shoulder") != std::string::npos);

  const auto bounds = dir / "bounds.csv";
  r = cli({"calibrate", "--model", "hopper", "--task", "hop", "--duration", "2", "--out", bounds.string()});
  REQUIRE(r.code == kExitOk);
  const auto table = read_bound_table_file(bounds);
  CHECK(table.dofs.size() == 8);

  r = cli({"simulate", "--model", "hopper", "--task", "hop", "--duration", "1", "--bounds", bounds.string(),
           "--out", (dir / "hop.csv").string()});
  CHECK(r.code == kExitOk);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"fly"}).code == kExitUsage);
  CHECK(cli({"endurance", "--tl", "50", "--wings", "2"}).code == kExitUsage);
  CHECK(cli({"sweep", "--f", "1"}).code == kExitUsage);
  CHECK(cli({"simulate", "--model", "octopus"}).code == kExitUsage);
  CHECK(cli({"endurance", "--tl", "50", "--format", "xml"}).code == kExitUsage);
  CHECK(cli({"rank", (scratch() / "missing.csv").string()}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("runtime errors") {
  const auto bad = scratch() / "garbage.csv";
  {
    std::ofstream f(bad);
    f << "not a trace\n";
  }
  const Run r = cli({"rank", bad.string()});
  CHECK(r.code == kExitRuntime);
  CHECK_FALSE(r.err.empty());
}
