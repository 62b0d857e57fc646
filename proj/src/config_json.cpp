#include "fatigue/config_json.hpp"

#include <cstdio>
#include <fstream>

namespace fatigue {

namespace {

template <class T>
T get(const Json& j, const char* key) {
  if (!j.is_object()) throw ConfigError(std::string("expected a JSON object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

const char* kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::StaticHold: return "static_hold";
    case TaskKind::RepetitiveReach: return "repetitive_reach";
    case TaskKind::Hop: return "hop";
    case TaskKind::IntermittentHold: return "intermittent_hold";
  }
  return "?";
}

TaskKind kind_from(const std::string& s) {
  for (TaskKind k : {TaskKind::StaticHold, TaskKind::RepetitiveReach, TaskKind::Hop,
                     TaskKind::IntermittentHold}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("unknown task kind '" + s + "'");
}

}  // namespace

Json to_json(const ThreeCCParams& p) {
  return {{"F", p.fatigue}, {"R", p.recovery}, {"r", p.rest_multiplier}, {"L_D", p.develop},
          {"L_R", p.relax}};
}

ThreeCCParams params_from_json(const Json& j) {
  ThreeCCParams p;
  p.fatigue = get<double>(j, "F");
  p.recovery = get<double>(j, "R");
  p.rest_multiplier = get_or(j, "r", 1.0);
  p.develop = get_or(j, "L_D", 10.0);
  p.relax = get_or(j, "L_R", 10.0);
  p.validate();
  return p;
}

Json to_json(const TorqueBoundTable& b) {
  Json pairs = Json::array();
  for (const auto& [l, r] : b.symmetry_pairs) pairs.push_back({l, r});
  return {{"names", b.names}, {"t_max", b.t_max}, {"symmetry_pairs", pairs}};
}

TorqueBoundTable bounds_from_json(const Json& j) {
  TorqueBoundTable b;
  b.names = get<std::vector<std::string>>(j, "names");
  b.t_max = get<std::vector<double>>(j, "t_max");
  for (const auto& p : get_or(j, "symmetry_pairs", Json::array())) {
    const auto v = p.get<std::vector<std::size_t>>();
    if (v.size() != 2) throw ConfigError("symmetry pair needs two indices");
    b.symmetry_pairs.emplace_back(v[0], v[1]);
  }
  b.validate();
  return b;
}

Json to_json(const ChainModel& m) {
  Json links = Json::array();
  for (const Link& l : m.links) {
    links.push_back({{"name", l.name},
                     {"parent", l.parent},
                     {"length", l.length},
                     {"mass", l.mass},
                     {"inertia", l.inertia},
                     {"armature", l.armature},
                     {"com", l.com},
                     {"zero_angle", l.zero_angle},
                     {"attach", {l.attach_x, l.attach_y}},
                     {"limits", {l.lower, l.upper}},
                     {"gains", {{"kp", l.gains.stiffness}, {"kd", l.gains.damping}}},
                     {"tip_contact", l.tip_contact}});
  }
  return {{"name", m.name},
          {"root", m.root == RootMode::Fixed ? "fixed" : "prismatic_vertical"},
          {"root_mass", m.root_mass},
          {"root_height", m.root_height},
          {"root_contact", m.root_contact},
          {"gravity", m.gravity},
          {"ground", {{"stiffness", m.ground_stiffness}, {"damping", m.ground_damping}}},
          {"joint_limit", {{"stiffness", m.limit_stiffness}, {"damping", m.limit_damping}}},
          {"links", links},
          {"bounds", to_json(m.bounds)},
          {"initial_angles", m.initial_angles}};
}

ChainModel model_from_json(const Json& j) {
  ChainModel m;
  m.name = get<std::string>(j, "name");
  const auto root = get_or<std::string>(j, "root", "fixed");
  if (root == "fixed") {
    m.root = RootMode::Fixed;
  } else if (root == "prismatic_vertical") {
    m.root = RootMode::PrismaticVertical;
  } else {
    throw ConfigError("unknown root mode '" + root + "'");
  }
  m.root_mass = get_or(j, "root_mass", 0.0);
  m.root_height = get_or(j, "root_height", 0.0);
  m.root_contact = get_or(j, "root_contact", false);
  m.gravity = get_or(j, "gravity", 9.81);
  if (j.contains("ground")) {
    m.ground_stiffness = get<double>(j["ground"], "stiffness");
    m.ground_damping = get<double>(j["ground"], "damping");
  }
  if (j.contains("joint_limit")) {
    m.limit_stiffness = get<double>(j["joint_limit"], "stiffness");
    m.limit_damping = get<double>(j["joint_limit"], "damping");
  }
  for (const auto& jl : get<Json>(j, "links")) {
    Link l;
    l.name = get<std::string>(jl, "name");
    l.parent = get_or(jl, "parent", -1);
    l.length = get<double>(jl, "length");
    l.mass = get<double>(jl, "mass");
    l.inertia = get<double>(jl, "inertia");
    l.armature = get_or(jl, "armature", 0.0);
    l.com = get_or(jl, "com", 0.5);
    l.zero_angle = get_or(jl, "zero_angle", 0.0);
    const auto attach = get_or(jl, "attach", std::vector<double>{0.0, 0.0});
    const auto limits = get_or(jl, "limits", std::vector<double>{l.lower, l.upper});
    if (attach.size() != 2 || limits.size() != 2) {
      throw ConfigError("link '" + l.name + "': attach and limits need two values");
    }
    l.attach_x = attach[0];
    l.attach_y = attach[1];
    l.lower = limits[0];
    l.upper = limits[1];
    const Json g = get<Json>(jl, "gains");
    l.gains = {get<double>(g, "kp"), get<double>(g, "kd")};
    l.tip_contact = get_or(jl, "tip_contact", false);
    m.links.push_back(std::move(l));
  }
  if (j.contains("bounds")) {
    m.bounds = bounds_from_json(j["bounds"]);
  } else {
    for (const Link& l : m.links) m.bounds.names.push_back(l.name);
    m.bounds.t_max.assign(m.links.size(), 0.0);
  }
  m.initial_angles = get_or(j, "initial_angles", std::vector<double>{});
  m.validate();
  return m;
}

Json to_json(const TaskScript& t) {
  Json kfs = Json::array();
  for (const auto& k : t.keyframes) kfs.push_back({{"t", k.t}, {"targets", k.targets}, {"beta", k.beta}});
  Json rest = Json::array();
  for (const auto& w : t.rest) rest.push_back({{"start", w.start}, {"duration", w.duration}});
  return {{"name", t.name},
          {"kind", kind_name(t.kind)},
          {"period", t.period},
          {"interpolation", t.interpolation == Interpolation::Step ? "step" : "linear"},
          {"keyframes", kfs},
          {"rest", rest},
          {"rest_pose", t.rest_pose},
          {"rest_beta", t.rest_beta},
          {"rest_mode", t.rest_mode == RestMode::Hold ? "hold" : "limp"},
          {"metric_link", t.metric_link},
          {"start_pose", t.start_pose}};
}

TaskScript task_from_json(const Json& j) {
  TaskScript t;
  t.name = get<std::string>(j, "name");
  t.kind = kind_from(get<std::string>(j, "kind"));
  t.period = get_or(j, "period", 0.0);
  const auto interp = get_or<std::string>(j, "interpolation", "step");
  if (interp == "step") {
    t.interpolation = Interpolation::Step;
  } else if (interp == "linear") {
    t.interpolation = Interpolation::Linear;
  } else {
    throw ConfigError("unknown interpolation '" + interp + "'");
  }
  for (const auto& k : get<Json>(j, "keyframes")) {
    t.keyframes.push_back(
        {get<double>(k, "t"), get<std::vector<double>>(k, "targets"), get_or(k, "beta", 1.0)});
  }
  for (const auto& w : get_or(j, "rest", Json::array())) {
    t.rest.push_back({get<double>(w, "start"), get<double>(w, "duration")});
  }
  t.rest_pose = get_or(j, "rest_pose", std::vector<double>{});
  t.rest_beta = get_or(j, "rest_beta", 0.1);
  const auto rest_mode = get_or<std::string>(j, "rest_mode", "hold");
  if (rest_mode == "hold") {
    t.rest_mode = RestMode::Hold;
  } else if (rest_mode == "limp") {
    t.rest_mode = RestMode::Limp;
  } else {
    throw ConfigError("unknown rest mode '" + rest_mode + "'");
  }
  t.metric_link = get_or(j, "metric_link", -1);
  t.start_pose = get_or(j, "start_pose", std::vector<double>{});
  return t;
}

Json to_json(const SimConfig& c) {
  return {{"sim_dt", c.sim_dt},
          {"control_dt", c.control_dt},
          {"duration", c.duration},
          {"params", to_json(c.params)},
          {"fatigue_enabled", c.fatigue_enabled},
          {"seed", c.seed},
          {"init", c.randomized_init ? "random" : "rested"}};
}

SimConfig sim_config_from_json(const Json& j) {
  SimConfig c;
  c.sim_dt = get_or(j, "sim_dt", c.sim_dt);
  c.control_dt = get_or(j, "control_dt", c.control_dt);
  c.duration = get_or(j, "duration", c.duration);
  if (j.contains("params")) c.params = params_from_json(j["params"]);
  c.fatigue_enabled = get_or(j, "fatigue_enabled", true);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  const auto init = get_or<std::string>(j, "init", "rested");
  if (init != "rested" && init != "random") throw ConfigError("unknown init mode '" + init + "'");
  c.randomized_init = init == "random";
  c.validate();
  return c;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

ChainModel load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }
TaskScript load_task(const std::filesystem::path& path) { return task_from_json(read_json_file(path)); }
SimConfig load_sim_config(const std::filesystem::path& path) {
  return sim_config_from_json(read_json_file(path));
}

std::string ChainModel::hash() const {
  // FNV-1a over the canonical JSON dump
  const std::string s = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fatigue
