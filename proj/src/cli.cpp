#include "fatigue/cli.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "fatigue/bound_table.hpp"
#include "fatigue/config_json.hpp"
#include "fatigue/endurance.hpp"
#include "fatigue/harness.hpp"
#include "fatigue/live_server.hpp"
#include "fatigue/live_session.hpp"
#include "fatigue/presets.hpp"
#include "fatigue/profile.hpp"
#include "fatigue/trace_io.hpp"

namespace fatigue {

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Common {
  double dt = kControlDt;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  double horizon = kDefaultHorizon;
};

void add_common(CLI::App* app, Common& c, bool with_horizon) {
  app->add_option("--dt", c.dt, "Control step in seconds")->capture_default_str();
  app->add_option("--seed", c.seed, "Seed for randomized initial compartments");
  app->add_option("--out", c.out, "Output file (stdout when omitted)");
  app->add_option("--format", c.format, "Trace format")
      ->check(CLI::IsMember({"csv", "binary", "json"}))
      ->capture_default_str();
  if (with_horizon) app->add_option("--horizon", c.horizon, "Seconds to simulate at most")->capture_default_str();
}

struct ParamFlags {
  double f = 1.0;
  double r_coef = 0.2;
  double rest_mult = 1.0;
  double ld = 10.0;
  double lr = 10.0;
};

void add_params(CLI::App* app, ParamFlags& p) {
  app->add_option("--f", p.f, "Fatigue rate F (1/s)")->capture_default_str();
  app->add_option("--r-coef", p.r_coef, "Recovery rate R (1/s)")->capture_default_str();
  app->add_option("--rest-mult", p.rest_mult, "Rest recovery multiplier r")->capture_default_str();
  app->add_option("--ld", p.ld, "Force development factor L_D")->capture_default_str();
  app->add_option("--lr", p.lr, "Force relaxation factor L_R")->capture_default_str();
}

ThreeCCParams to_params(const ParamFlags& f) {
  ThreeCCParams p{f.f, f.r_coef, f.rest_mult, f.ld, f.lr};
  p.validate();
  return p;
}

void check_common(const Common& c) {
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw UsageError("--dt must be positive");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw UsageError("--horizon must be positive");
}

/// Writes through `fn` to --out or to stdout.
template <class Fn>
void emit(const Common& c, std::ostream& out, Fn&& fn) {
  if (c.out.empty()) {
    fn(out);
    return;
  }
  std::ofstream file(c.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + c.out + "'");
  fn(file);
  if (!file) throw std::runtime_error("write to '" + c.out + "' failed");
}

ChainModel load_model_arg(const std::string& arg) {
  if (std::filesystem::exists(arg)) return load_model(arg);
  return model_preset(arg);
}

TaskScript load_task_arg(const std::string& arg, const ChainModel& model) {
  if (std::filesystem::exists(arg)) return load_task(arg);
  return task_preset(arg, model);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// endurance ------------------------------------------------------------------

struct EnduranceArgs {
  Common common;
  ParamFlags params;
  double tl = 0.0;
};

int run_endurance(const EnduranceArgs& a, std::ostream& out) {
  check_common(a.common);
  if (!(a.tl > 0.0)) throw UsageError("TL must be positive");
  if (a.tl > 100.0) throw UsageError("TL must be at most 100 %MVC");
  const ThreeCCParams p = to_params(a.params);
  const EnduranceResult r = endurance_time(a.tl, p, a.common.dt, a.common.horizon);
  if (r.endurance_time) {
    out << "endurance_time " << fmt(*r.endurance_time) << " s\n";
  } else {
    out << "endurance_time unbounded (horizon " << fmt(r.horizon) << " s)\n";
  }
  out << "final M_A " << fmt(r.final_state.active) << " M_R " << fmt(r.final_state.resting) << " M_F "
      << fmt(r.final_state.fatigued) << '\n';
  if (!a.common.out.empty()) {
    // trace covers the failure and as long again afterwards
    const double end = r.endurance_time ? std::min(a.common.horizon, 2.0 * *r.endurance_time + 1.0)
                                        : a.common.horizon;
    const std::vector<LoadSample> profile{{0.0, a.tl}, {end, a.tl}};
    const Trace trace = integrate_profile(profile, p, a.common.dt);
    write_trace(a.common.out, trace, parse_trace_format(a.common.format));
  }
  return kExitOk;
}

// sweep ----------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::vector<double> f;
  std::vector<double> r_coef;
  std::vector<double> rest_mult{1.0};
  double ld = 10.0;
  double lr = 10.0;
  double tl = 0.0;
  unsigned threads = 0;
};

int run_sweep(const SweepArgs& a, std::ostream& out) {
  check_common(a.common);
  if (!(a.tl > 0.0)) throw UsageError("TL must be positive");
  if (a.tl > 100.0) throw UsageError("TL must be at most 100 %MVC");
  SweepSpec spec{a.f, a.r_coef, a.rest_mult, a.ld, a.lr};
  for (const auto& p : sweep_params(spec)) p.validate();
  const SweepGrid grid = sweep(spec, a.tl, a.common.dt, a.common.horizon, a.threads);
  emit(a.common, out, [&](std::ostream& o) { write_sweep_csv(o, grid); });
  return kExitOk;
}

// simulate / calibrate -------------------------------------------------------

struct SimulateArgs {
  Common common;
  ParamFlags params;
  std::string model = "arm4";
  std::string task = "shoulder_hold";
  std::string config;
  std::string bounds;
  std::string bounds_task;
  double duration = 10.0;
  bool no_fatigue = false;
};

void apply_bounds_file(ChainModel& model, const SimulateArgs& a) {
  if (a.bounds.empty()) return;
  BoundAggregation agg = MaxAcrossTasks{};
  if (!a.bounds_task.empty()) agg = PerTask{a.bounds_task};
  const TorqueBoundTable table = load_bound_table(a.bounds, agg);
  for (std::size_t i = 0; i < model.bounds.size(); ++i) {
    model.bounds.t_max[i] = table.t_max[table.index_of(model.bounds.names[i])];
  }
}

SimConfig sim_config(const SimulateArgs& a, const CLI::App& app) {
  SimConfig cfg = a.config.empty() ? SimConfig{} : load_sim_config(a.config);
  if (a.config.empty() || app.count("--f") + app.count("--r-coef") + app.count("--rest-mult") +
                                  app.count("--ld") + app.count("--lr") > 0) {
    cfg.params = to_params(a.params);
  }
  if (a.config.empty() || app.count("--duration")) cfg.duration = a.duration;
  if (a.config.empty() || app.count("--dt")) cfg.control_dt = a.common.dt;
  if (a.no_fatigue) cfg.fatigue_enabled = false;
  if (a.common.seed) {
    cfg.randomized_init = true;
    cfg.seed = *a.common.seed;
  }
  cfg.validate();
  return cfg;
}

int run_simulate(const SimulateArgs& a, const CLI::App& app, std::ostream& out, std::ostream& err) {
  check_common(a.common);
  ChainModel model = load_model_arg(a.model);
  const TaskScript task = load_task_arg(a.task, model);
  task.validate(model);
  const SimConfig cfg = sim_config(a, app);
  apply_bounds_file(model, a);
  if (!bounds_ready(model)) {
    err << "note: model has no torque bounds; calibrating on the task with fatigue off\n";
    model.bounds = calibrate_bounds(model, task, cfg);
  }
  const Trace trace = simulate(model, task, cfg);
  const TraceFormat format = parse_trace_format(a.common.format);
  emit(a.common, out, [&](std::ostream& o) { write_trace(o, trace, format); });
  const TorqueAudit audit = audit_torque_ceiling(trace, model.bounds);
  if (audit.violations > 0) {
    err << "torque audit: " << audit.violations << " violations, worst excess "
        << fmt(audit.worst_excess) << " N*m\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_calibrate(const SimulateArgs& a, const CLI::App& app, std::ostream& out) {
  check_common(a.common);
  const ChainModel model = load_model_arg(a.model);
  const TaskScript task = load_task_arg(a.task, model);
  task.validate(model);
  const TorqueBoundTable table = calibrate_bounds(model, task, sim_config(a, app));
  emit(a.common, out, [&](std::ostream& o) { write_bound_table(o, table, task.name); });
  return kExitOk;
}

// rank -----------------------------------------------------------------------

struct RankArgs {
  Common common;
  std::string trace;
};

int run_rank(const RankArgs& a, std::ostream& out, std::ostream& err) {
  const TraceReadResult r = read_trace(std::filesystem::path(a.trace));
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  const auto ranking = joint_fatigue_ranking(r.trace);
  emit(a.common, out, [&](std::ostream& o) { write_ranking_csv(o, ranking); });
  return kExitOk;
}

// serve ----------------------------------------------------------------------

live::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<std::uint16_t> port;
  double fps = live::kFrameRate;
};

int run_serve(const ServeArgs& a, std::ostream& out) {
  live::ServerOptions o = live::options_from_env();
  if (a.host) o.host = *a.host;
  if (a.port) o.port = *a.port;
  if (!(a.fps > 0.0)) throw UsageError("--fps must be positive");
  o.frame_rate = a.fps;
  live::Server server(o);
  out << "listening on ws://" << o.host << ':' << server.port() << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-compartment muscle fatigue tools", "fatigue3cc"};
  app.require_subcommand(1);

  EnduranceArgs endurance;
  auto* c_end = app.add_subcommand("endurance", "Endurance time of a constant load from rested");
  c_end->add_option("--tl", endurance.tl, "Target load, %MVC")->required();
  add_params(c_end, endurance.params);
  add_common(c_end, endurance.common, true);

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Endurance time over an (F, R, r) grid as CSV");
  c_sweep->add_option("--f", sw.f, "Fatigue rates")->delimiter(',')->required();
  c_sweep->add_option("--r-coef", sw.r_coef, "Recovery rates")->delimiter(',')->required();
  c_sweep->add_option("--rest-mult", sw.rest_mult, "Rest multipliers")->delimiter(',');
  c_sweep->add_option("--ld", sw.ld, "L_D")->capture_default_str();
  c_sweep->add_option("--lr", sw.lr, "L_R")->capture_default_str();
  c_sweep->add_option("--tl", sw.tl, "Target load, %MVC")->required();
  c_sweep->add_option("--threads", sw.threads, "Worker threads (0 = all cores)");
  add_common(c_sweep, sw.common, true);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a scripted task on a chain and write the trace");
  SimulateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Max |torque| per DoF with fatigue off, as a bound table");
  for (auto [cmd, a] : {std::pair{c_sim, &sim}, std::pair{c_cal, &cal}}) {
    cmd->add_option("--model", a->model, "Model preset (arm4, hopper) or JSON file")->capture_default_str();
    cmd->add_option("--task", a->task, "Task preset (rest_hold, shoulder_hold, reach, hop) or JSON file")
        ->capture_default_str();
    cmd->add_option("--config", a->config, "SimConfig JSON file");
    cmd->add_option("--duration", a->duration, "Seconds")->capture_default_str();
    add_params(cmd, a->params);
    add_common(cmd, a->common, false);
  }
  c_sim->add_option("--bounds", sim.bounds, "Bound table CSV overriding the model's bounds");
  c_sim->add_option("--bounds-task", sim.bounds_task, "Task column of --bounds (default: max across tasks)");
  c_sim->add_flag("--no-fatigue", sim.no_fatigue, "Clip at T_max instead of RC * T_max");

  RankArgs rank;
  auto* c_rank = app.add_subcommand("rank", "Rank joints of a trace by fatigue");
  c_rank->add_option("trace", rank.trace, "Trace file")->required()->check(CLI::ExistingFile);
  add_common(c_rank, rank.common, false);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Start the live WebSocket service");
  c_serve->add_option("--host", serve.host, "Bind address (env FATIGUE_LIVE_HOST, default 127.0.0.1)");
  c_serve->add_option("--port", serve.port, "Port (env FATIGUE_LIVE_PORT, default 8765)");
  c_serve->add_option("--fps", serve.fps, "Control frames per second")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << sub->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kExitUsage;
  }

  try {
    if (*c_end) return run_endurance(endurance, out);
    if (*c_sweep) return run_sweep(sw, out);
    if (*c_sim) return run_simulate(sim, *c_sim, out, err);
    if (*c_cal) return run_calibrate(cal, *c_cal, out);
    if (*c_rank) return run_rank(rank, out, err);
    if (*c_serve) return run_serve(serve, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fatigue
