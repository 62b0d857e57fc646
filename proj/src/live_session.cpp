#include "fatigue/live_session.hpp"

#include <cmath>

#include "fatigue/presets.hpp"
#include "fatigue/profile.hpp"

namespace fatigue::live {

namespace {

InitMode init_from(const Json& j) {
  const std::string mode = j.value("init", std::string("rested"));
  if (mode == "rested") return RestedInit{};
  if (mode == "random") return RandomizedInit{j.value("seed", std::uint64_t{0})};
  throw ConfigError("unknown init mode '" + mode + "'");
}

ChainModel resolve_model(const Json& j) {
  if (j.is_string()) return model_preset(j.get<std::string>());
  return model_from_json(j);
}

TaskScript resolve_task(const Json& j, const ChainModel& model) {
  if (j.is_string()) return task_preset(j.get<std::string>(), model);
  return task_from_json(j);
}

ProfileScenario parse_profile(const Json& j) {
  ProfileScenario s;
  s.params = params_from_json(j.at("params"));
  s.target_load = j.at("tl").get<double>();
  if (!std::isfinite(s.target_load) || s.target_load < 0.0 || s.target_load > 100.0) {
    throw ConfigError("tl must be in [0, 100]");
  }
  s.dt = j.value("dt", s.dt);
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ConfigError("dt must be finite and > 0");
  s.dof_name = j.value("dof", s.dof_name);
  s.init = init_from(j);
  return s;
}

TaskScenario parse_task(const Json& j) {
  TaskScenario s;
  s.model = resolve_model(j.at("model"));
  s.task = resolve_task(j.at("task"), s.model);
  s.task.validate(s.model);
  s.config.params = params_from_json(j.at("params"));
  s.config.fatigue_enabled = j.value("fatigue_enabled", true);
  const InitMode init = init_from(j);
  if (const auto* r = std::get_if<RandomizedInit>(&init)) {
    s.config.randomized_init = true;
    s.config.seed = r->seed;
  }
  s.config.validate();
  if (j.contains("bounds")) {
    s.model.bounds.t_max = j.at("bounds").get<std::vector<double>>();
    s.model.bounds.validate();
  }
  if (!bounds_ready(s.model)) {
    SimConfig cal = s.config;
    cal.duration = s.task.cyclic() ? 4.0 * s.task.period : 5.0;
    s.model.bounds = calibrate_bounds(s.model, s.task, cal);
  }
  return s;
}

double number(const Json& msg, const char* key) {
  const auto& v = msg.at(key);
  if (!v.is_number()) throw ProtocolError("bad_message", std::string("'") + key + "' must be a number");
  return v.get<double>();
}

Json point_json(const Point2& p) { return Json::array({p.x, p.y}); }

Point2 point_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ProtocolError("bad_frame", "point needs two numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Scenario parse_scenario(const Json& j) {
  try {
    if (!j.is_object()) throw ConfigError("scenario must be an object");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "profile") return parse_profile(j);
    if (kind == "task") return parse_task(j);
    throw ConfigError("unknown scenario kind '" + kind + "'");
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError("invalid_scenario", e.what());
  }
}

Json to_json(const Frame& f) {
  Json dofs = Json::array();
  for (const auto& d : f.dofs) {
    dofs.push_back({{"name", d.name}, {"ma", d.ma}, {"mr", d.mr}, {"mf", d.mf},
                    {"rc", d.rc}, {"tl", d.tl}, {"torque", d.torque}});
  }
  Json j = {{"type", "frame"},
            {"i", f.index},
            {"t", f.t},
            {"params", {{"F", f.params.fatigue}, {"R", f.params.recovery},
                        {"r", f.params.rest_multiplier}, {"L_D", f.params.develop},
                        {"L_R", f.params.relax}}},
            {"dofs", dofs},
            {"mean_rc", f.mean_rc},
            {"lag", f.lag}};
  if (f.pose) {
    Json joints = Json::array();
    Json tips = Json::array();
    for (const auto& p : f.pose->joints) joints.push_back(point_json(p));
    for (const auto& p : f.pose->tips) tips.push_back(point_json(p));
    j["pose"] = {{"root_y", f.pose->root_y}, {"angles", f.pose->angles}, {"joints", joints},
                 {"tips", tips}};
  }
  return j;
}

Frame frame_from_json(const Json& j) {
  try {
    if (j.at("type").get<std::string>() != "frame") throw ProtocolError("bad_frame", "not a frame");
    Frame f;
    f.index = j.at("i").get<std::uint64_t>();
    f.t = j.at("t").get<double>();
    const Json& p = j.at("params");
    f.params.fatigue = p.at("F").get<double>();
    f.params.recovery = p.at("R").get<double>();
    f.params.rest_multiplier = p.at("r").get<double>();
    f.params.develop = p.value("L_D", f.params.develop);
    f.params.relax = p.value("L_R", f.params.relax);
    for (const auto& d : j.at("dofs")) {
      f.dofs.push_back({d.at("name").get<std::string>(), d.at("ma").get<double>(),
                        d.at("mr").get<double>(), d.at("mf").get<double>(),
                        d.at("rc").get<double>(), d.at("tl").get<double>(),
                        d.at("torque").get<double>()});
    }
    f.mean_rc = j.at("mean_rc").get<double>();
    f.lag = j.value("lag", 0.0);
    if (j.contains("pose")) {
      const Json& q = j.at("pose");
      Pose pose;
      pose.root_y = q.at("root_y").get<double>();
      pose.angles = q.at("angles").get<std::vector<double>>();
      for (const auto& p2 : q.at("joints")) pose.joints.push_back(point_from(p2));
      for (const auto& p2 : q.at("tips")) pose.tips.push_back(point_from(p2));
      f.pose = std::move(pose);
    }
    return f;
  } catch (const Json::exception& e) {
    throw ProtocolError("bad_frame", e.what());
  }
}

Json ack_json(std::uint64_t applies_at) { return {{"type", "ack"}, {"applies_at", applies_at}}; }

Json error_json(const std::string& code, const std::string& msg) {
  return {{"type", "error"}, {"code", code}, {"msg", msg}};
}

Session::Session(std::string id, Scenario scenario) : id_(std::move(id)), scenario_(std::move(scenario)) {
  if (auto* p = std::get_if<ProfileScenario>(&scenario_)) {
    params_ = p->params;
    target_load_ = p->target_load;
    state_ = init_state(p->init);
  } else {
    auto& t = std::get<TaskScenario>(scenario_);
    params_ = t.config.params;
    harness_ = std::make_unique<Harness>(t.model, t.task, t.config);
  }
  history_.push_back({0, params_, target_load_, std::nullopt});
}

Session::~Session() = default;
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

bool Session::is_task() const { return harness_ != nullptr; }

const ThreeCCParams& Session::params() const { return params_; }

double Session::time() const {
  if (harness_) return harness_->time();
  return static_cast<double>(steps_) * std::get<ProfileScenario>(scenario_).dt;
}

Frame Session::frame() const {
  Frame f;
  f.index = index_;
  f.t = time();
  f.params = params_;
  if (harness_) {
    const TraceRow row = harness_->row();
    const auto& names = harness_->model().bounds.names;
    for (std::size_t i = 0; i < row.dofs.size(); ++i) {
      const DofSample& d = row.dofs[i];
      f.dofs.push_back({names[i], d.state.active, d.state.resting, d.state.fatigued, d.rc,
                        d.target_load, d.applied});
    }
    const ChainState& c = harness_->chain();
    const Kinematics k = forward_kinematics(harness_->model(), c.q);
    Pose pose;
    pose.root_y = k.root.y;
    const auto o = static_cast<Eigen::Index>(c.q.size()) - static_cast<Eigen::Index>(row.dofs.size());
    for (Eigen::Index i = o; i < c.q.size(); ++i) pose.angles.push_back(c.q[i]);
    pose.joints = k.joint;
    pose.tips = k.tip;
    f.pose = std::move(pose);
  } else {
    const auto& p = std::get<ProfileScenario>(scenario_);
    f.dofs.push_back({p.dof_name, state_.active, state_.resting, state_.fatigued,
                      residual_capacity(state_), target_load_, 0.0});
  }
  double sum = 0.0;
  for (const auto& d : f.dofs) sum += d.rc;
  f.mean_rc = f.dofs.empty() ? 1.0 : sum / static_cast<double>(f.dofs.size());
  return f;
}

Json Session::handle(const Json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw ProtocolError("bad_message", "message needs a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    if (type == "set_params") {
      ThreeCCParams p = pending_.params.value_or(params_);
      bool any = false;
      for (auto [key, field] : {std::pair{"F", &ThreeCCParams::fatigue},
                                std::pair{"R", &ThreeCCParams::recovery},
                                std::pair{"r", &ThreeCCParams::rest_multiplier},
                                std::pair{"L_D", &ThreeCCParams::develop},
                                std::pair{"L_R", &ThreeCCParams::relax}}) {
        if (msg.contains(key)) {
          p.*field = number(msg, key);
          any = true;
        }
      }
      if (!any) throw ProtocolError("invalid_params", "set_params needs at least one of F, R, r");
      try {
        p.validate();
      } catch (const ConfigError& e) {
        throw ProtocolError("invalid_params", e.what());
      }
      pending_.params = p;
    } else if (type == "set_load") {
      if (harness_) throw ProtocolError("unsupported", "task scenarios derive the load from torque");
      const double tl = number(msg, "tl");
      if (!std::isfinite(tl) || tl < 0.0 || tl > 100.0) {
        throw ProtocolError("invalid_load", "tl must be in [0, 100]");
      }
      pending_.target_load = tl;
    } else if (type == "pause") {
      paused_ = true;
    } else if (type == "resume") {
      paused_ = false;
    } else if (type == "reset") {
      const std::string mode = msg.value("mode", std::string("rested"));
      if (mode == "rested") {
        pending_.reset = RestedInit{};
      } else if (mode == "random") {
        const bool ok = msg.contains("seed") && msg["seed"].is_number_integer() &&
                        msg["seed"].get<std::int64_t>() >= 0;
        if (!ok) {
          throw ProtocolError("bad_message", "random reset needs a non-negative integer 'seed'");
        }
        pending_.reset = RandomizedInit{msg["seed"].get<std::uint64_t>()};
      } else {
        throw ProtocolError("bad_message", "unknown reset mode '" + mode + "'");
      }
    } else {
      throw ProtocolError("unknown_type", "unknown message type '" + type + "'");
    }
    return ack_json(index_ + 1);
  } catch (const ProtocolError& e) {
    return error_json(e.code(), e.what());
  } catch (const Json::exception& e) {
    return error_json("bad_message", e.what());
  }
}

void Session::apply_pending() {
  if (!pending_.params && !pending_.target_load && !pending_.reset) return;
  if (pending_.params) {
    params_ = *pending_.params;
    if (harness_) harness_->set_params(params_);
  }
  if (pending_.target_load) target_load_ = *pending_.target_load;
  if (pending_.reset) {
    if (harness_) {
      harness_->reset(*pending_.reset);
    } else {
      state_ = init_state(*pending_.reset);
    }
    steps_ = 0;
  }
  history_.push_back({index_ + 1, params_, target_load_, pending_.reset});
  pending_ = {};
}

std::optional<Frame> Session::step(double lag) {
  if (paused_) return std::nullopt;
  const bool resetting = pending_.reset.has_value();
  apply_pending();
  if (!resetting) {
    if (harness_) {
      harness_->advance();
    } else {
      const double dt = std::get<ProfileScenario>(scenario_).dt;
      state_ = fatigue::step(state_, target_load_, params_, dt).state;
      ++steps_;
    }
  }
  ++index_;
  Frame f = frame();
  f.lag = lag;
  return f;
}

Trace replay(const Scenario& scenario, const std::vector<AppliedUpdate>& history,
             std::uint64_t last_frame) {
  for (const auto& u : history) {
    if (u.reset) throw ConfigError("cannot replay a session that was reset");
  }
  if (const auto* p = std::get_if<ProfileScenario>(&scenario)) {
    // an update applied at frame i governs the step from t_{i-1} to t_i
    std::vector<LoadSample> loads;
    std::vector<ParamSample> params;
    for (const auto& u : history) {
      if (u.frame > last_frame) break;
      const double t = u.frame == 0 ? 0.0 : static_cast<double>(u.frame - 1) * p->dt;
      if (!loads.empty() && loads.back().t == t) {
        loads.back().target_load = u.target_load;
        params.back().params = u.params;
      } else {
        loads.push_back({t, u.target_load});
        params.push_back({t, u.params});
      }
    }
    const double end = static_cast<double>(last_frame) * p->dt;
    if (loads.back().t < end) loads.push_back({end, loads.back().target_load});
    Trace trace = integrate_profile(loads, params, p->dt, p->init);
    trace.meta.dof_names = {p->dof_name};
    return trace;
  }
  const auto& t = std::get<TaskScenario>(scenario);
  SimConfig cfg = t.config;
  cfg.duration = static_cast<double>(last_frame) * cfg.control_dt;
  std::vector<ParamChange> changes;
  for (const auto& u : history) {
    if (u.frame == 0 || u.frame > last_frame) continue;
    changes.push_back({u.frame - 1, u.params});
  }
  return simulate(t.model, t.task, cfg, changes);
}

}  // namespace fatigue::live
