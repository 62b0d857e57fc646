#include "fatigue/presets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fatigue {

namespace {

constexpr double kPi = std::numbers::pi;

Link make_link(std::string name, int parent, double length, double mass, double armature,
               double zero_angle, double lower, double upper, double com = 0.5) {
  Link l;
  l.name = std::move(name);
  l.parent = parent;
  l.length = length;
  l.mass = mass;
  l.inertia = mass * length * length / 12.0;
  l.armature = armature;
  l.com = com;
  l.zero_angle = zero_angle;
  l.lower = lower;
  l.upper = upper;
  l.gains = {1.0, 0.1};  // replaced by explicit_pd_gains
  return l;
}

Eigen::VectorXd coordinates(const ChainModel& m, const std::vector<double>& pose) {
  ChainState s = initial_state(m);
  const std::size_t o = m.coordinate_count() - m.dof_count();
  for (std::size_t i = 0; i < pose.size(); ++i) s.q[static_cast<Eigen::Index>(o + i)] = pose[i];
  return s.q;
}

void assign_gains(ChainModel& m, const std::vector<std::vector<double>>& poses) {
  const auto gains = explicit_pd_gains(m, poses, 1.0 / 30.0);
  for (std::size_t i = 0; i < gains.size(); ++i) m.links[i].gains = gains[i];
}

}  // namespace

std::vector<PdGains> explicit_pd_gains(const ChainModel& model,
                                       const std::vector<std::vector<double>>& poses,
                                       double control_dt, double damping_ratio,
                                       double stiffness_ratio) {
  const std::size_t n = model.dof_count();
  const auto o = static_cast<Eigen::Index>(model.coordinate_count() - n);
  const auto nn = static_cast<Eigen::Index>(n);
  std::vector<double> inertia(n, std::numeric_limits<double>::infinity());
  std::vector<Eigen::MatrixXd> mobility;  // joint block of M^-1 per pose
  for (const auto& pose : poses) {
    const Eigen::MatrixXd minv = mass_matrix(model, coordinates(model, pose)).inverse();
    mobility.push_back(minv.block(o, o, nn, nn));
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      inertia[j] = std::min(inertia[j], 1.0 / mobility.back()(jj, jj));
    }
  }
  // With K_d = c * diag(I) / T the discrete modes are c * eig(M^-1 diag(I)).
  double lambda = 1.0;
  const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(inertia.data(), nn).cwiseSqrt();
  for (const auto& mob : mobility) {
    const Eigen::MatrixXd s = d.asDiagonal() * mob * d.asDiagonal();
    lambda = std::max(lambda, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().maxCoeff());
  }
  std::vector<PdGains> g(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double kd = damping_ratio * inertia[j] / (lambda * control_dt);
    g[j] = {stiffness_ratio * kd / control_dt, kd};
  }
  return g;
}

TorqueBoundTable arm_chain_bounds() {
  return {{"Abdomen", "Shoulder", "Elbow", "Wrist"}, {150.0, 50.0, 40.0, 10.0}, {}};
}

ChainModel arm_chain() {
  ChainModel m;
  m.name = "arm4";
  m.root = RootMode::Fixed;
  m.root_height = 1.0;
  m.links.push_back(make_link("Abdomen", -1, 0.5, 20.0, 1.0, kPi / 2, -0.6, 0.6));
  m.links.push_back(make_link("Shoulder", 0, 0.30, 2.0, 0.5, -kPi, -0.5, 2.8));
  m.links.push_back(make_link("Elbow", 1, 0.28, 1.5, 0.3, 0.0, -0.1, 2.6));
  m.links.push_back(make_link("Wrist", 2, 0.12, 2.5, 0.2, 0.0, -1.2, 1.2, 0.6));  // hand plus weight
  m.limit_stiffness = 200.0;
  m.limit_damping = 2.0;
  m.bounds = arm_chain_bounds();
  m.initial_angles = {0.0, 0.0, 0.0, 0.0};
  assign_gains(m, {{0.0, 0.0, 0.0, 0.0}, {0.0, kPi / 2, 0.0, 0.0}, {0.0, 1.8, 0.4, 0.0}});
  return m;
}

ChainModel hopper() {
  ChainModel m;
  m.name = "hopper";
  m.root = RootMode::PrismaticVertical;
  m.root_mass = 30.0;
  m.root_contact = true;
  m.ground_stiffness = 3.0e4;
  m.ground_damping = 300.0;
  m.limit_stiffness = 2.0e3;
  m.limit_damping = 20.0;
  for (const char* side : {"L", "R"}) {
    const int hip = static_cast<int>(m.links.size());
    m.links.push_back(make_link(std::string("Hip_") + side, -1, 0.45, 7.0, 3.0, -kPi / 2, -0.5, 2.0));
    Link knee = make_link(std::string("Knee_") + side, hip, 0.45, 4.0, 3.0, 0.0, -2.4, 0.0);
    knee.tip_contact = true;
    m.links.push_back(knee);
  }
  for (const char* side : {"L", "R"}) {
    const int shoulder = static_cast<int>(m.links.size());
    Link s = make_link(std::string("Shoulder_") + side, -1, 0.30, 2.5, 0.3, -kPi / 2, -1.0, 3.0);
    s.attach_y = 0.5;
    m.links.push_back(s);
    m.links.push_back(make_link(std::string("Elbow_") + side, shoulder, 0.30, 1.5, 0.2, 0.0, -0.1, 2.5));
  }
  for (const Link& l : m.links) m.bounds.names.push_back(l.name);
  m.bounds.t_max.assign(m.links.size(), 0.0);
  m.bounds.symmetry_pairs = {{0, 2}, {1, 3}, {4, 6}, {5, 7}};

  const std::vector<double> stand{0.3, -0.6, 0.3, -0.6, 0.0, 0.3, 0.0, 0.3};
  m.initial_angles = stand;
  // feet on the ground, sunk by the static load
  double weight = m.root_mass;
  for (const Link& l : m.links) weight += l.mass;
  m.root_height = 2.0 * 0.45 * std::cos(0.3) - weight * m.gravity / (2.0 * m.ground_stiffness);
  assign_gains(m, {stand,
                   {0.9, -1.8, 0.9, -1.8, -0.3, 0.3, -0.3, 0.3},
                   {0.0, 0.0, 0.0, 0.0, 1.0, 0.3, 1.0, 0.3}});
  return m;
}

TaskScript rest_hold(const ChainModel& model) {
  TaskScript t;
  t.name = model.name + "_rest_hold";
  t.kind = TaskKind::StaticHold;
  t.keyframes = {{0.0, model.initial_angles.empty() ? std::vector<double>(model.dof_count(), 0.0)
                                                     : model.initial_angles,
                  1.0}};
  return t;
}

TaskScript shoulder_hold() {
  TaskScript t;
  t.name = "shoulder_hold";
  t.kind = TaskKind::StaticHold;
  t.keyframes = {{0.0, {0.0, kPi / 2, 0.0, 0.0}, 1.0}};
  t.start_pose = t.keyframes.front().targets;
  return t;
}

TaskScript reach_task() {
  TaskScript t;
  t.name = "reach";
  t.kind = TaskKind::RepetitiveReach;
  t.period = 2.0;
  t.interpolation = Interpolation::Linear;
  t.keyframes = {{0.0, {0.0, 0.2, 0.2, 0.0}, 1.0}, {1.0, {0.0, 1.8, 0.4, 0.0}, 1.0}};
  t.rest_pose = {0.0, 0.0, 0.0, 0.0};
  return t;
}

TaskScript hop_task(std::vector<RestWindow> rest) {
  TaskScript t;
  t.name = "hop";
  t.kind = TaskKind::Hop;
  t.period = 1.5;
  t.interpolation = Interpolation::Step;
  t.keyframes = {
      {0.0, {0.3, -0.6, 0.3, -0.6, 0.0, 0.3, 0.0, 0.3}, 1.0},
      {0.25, {0.9, -1.8, 0.9, -1.8, -0.3, 0.3, -0.3, 0.3}, 1.0},
      {0.55, {0.0, 0.0, 0.0, 0.0, 1.0, 0.3, 1.0, 0.3}, 2.0},
      {0.75, {0.3, -0.6, 0.3, -0.6, 0.0, 0.3, 0.0, 0.3}, 1.0},
  };
  t.rest = std::move(rest);
  t.rest_mode = RestMode::Limp;
  return t;
}

std::vector<std::string> model_preset_names() { return {"arm4", "hopper"}; }

std::vector<std::string> task_preset_names() { return {"rest_hold", "shoulder_hold", "reach", "hop"}; }

ChainModel model_preset(const std::string& name) {
  if (name == "arm4") return arm_chain();
  if (name == "hopper") return hopper();
  throw ConfigError("unknown model preset '" + name + "'");
}

TaskScript task_preset(const std::string& name, const ChainModel& model) {
  if (name == "rest_hold") return rest_hold(model);
  if (name == "shoulder_hold") return shoulder_hold();
  if (name == "reach") return reach_task();
  if (name == "hop") return hop_task();
  throw ConfigError("unknown task preset '" + name + "'");
}

bool bounds_ready(const ChainModel& model) {
  return !model.bounds.t_max.empty() &&
         std::all_of(model.bounds.t_max.begin(), model.bounds.t_max.end(),
                     [](double b) { return b > 0.0; });
}

}  // namespace fatigue
