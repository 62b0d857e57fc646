#include "fatigue/chain.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

namespace fatigue {

namespace {

struct Motion {
  Kinematics kin;
  std::vector<double> omega;
  std::vector<Point2> tip_vel;
  std::vector<Point2> tip_acc0;  // tip acceleration with zero joint accelerations
  std::vector<Point2> com_acc0;
  Point2 root_vel;
};

std::size_t offset(const ChainModel& m) { return m.root == RootMode::PrismaticVertical ? 1 : 0; }

double root_y(const ChainModel& m, const Eigen::VectorXd& q) {
  return m.root == RootMode::PrismaticVertical ? q[0] : m.root_height;
}

Motion compute_motion(const ChainModel& m, const Eigen::VectorXd& q, const Eigen::VectorXd* qd) {
  const std::size_t n = m.links.size();
  const std::size_t o = offset(m);
  Motion mo;
  auto& k = mo.kin;
  k.root = {0.0, root_y(m, q)};
  k.world_angle.resize(n);
  k.joint.resize(n);
  k.tip.resize(n);
  k.com.resize(n);
  mo.omega.assign(n, 0.0);
  mo.tip_vel.assign(n, {});
  mo.tip_acc0.assign(n, {});
  mo.com_acc0.assign(n, {});
  if (qd != nullptr && o == 1) mo.root_vel = {0.0, (*qd)[0]};

  for (std::size_t i = 0; i < n; ++i) {
    const Link& l = m.links[i];
    const double base_angle = l.parent < 0 ? 0.0 : k.world_angle[l.parent];
    const double phi = base_angle + l.zero_angle + q[o + i];
    k.world_angle[i] = phi;
    k.joint[i] = l.parent < 0 ? Point2{k.root.x + l.attach_x, k.root.y + l.attach_y}
                              : k.tip[l.parent];
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    k.tip[i] = {k.joint[i].x + l.length * c, k.joint[i].y + l.length * s};
    k.com[i] = {k.joint[i].x + l.com * l.length * c, k.joint[i].y + l.com * l.length * s};

    if (qd == nullptr) continue;
    const double w = (l.parent < 0 ? 0.0 : mo.omega[l.parent]) + (*qd)[o + i];
    mo.omega[i] = w;
    const Point2 vj = l.parent < 0 ? mo.root_vel : mo.tip_vel[l.parent];
    const Point2 aj = l.parent < 0 ? Point2{} : mo.tip_acc0[l.parent];
    const Point2 rt{k.tip[i].x - k.joint[i].x, k.tip[i].y - k.joint[i].y};
    const Point2 rc{k.com[i].x - k.joint[i].x, k.com[i].y - k.joint[i].y};
    mo.tip_vel[i] = {vj.x - w * rt.y, vj.y + w * rt.x};
    mo.tip_acc0[i] = {aj.x - w * w * rt.x, aj.y - w * w * rt.y};
    mo.com_acc0[i] = {aj.x - w * w * rc.x, aj.y - w * w * rc.y};
  }
  return mo;
}

/// Jacobian (2 x N) of a point rigidly attached to link i.
Eigen::Matrix2Xd point_jacobian(const ChainModel& m, const Kinematics& k, std::size_t i, Point2 p) {
  const std::size_t o = offset(m);
  Eigen::Matrix2Xd J = Eigen::Matrix2Xd::Zero(2, static_cast<Eigen::Index>(m.coordinate_count()));
  if (o == 1) J(1, 0) = 1.0;
  for (int a = static_cast<int>(i); a >= 0; a = m.links[a].parent) {
    const auto col = static_cast<Eigen::Index>(o + a);
    J(0, col) = -(p.y - k.joint[a].y);
    J(1, col) = p.x - k.joint[a].x;
  }
  return J;
}

Eigen::RowVectorXd angular_jacobian(const ChainModel& m, std::size_t i) {
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(m.coordinate_count()));
  for (int a = static_cast<int>(i); a >= 0; a = m.links[a].parent) {
    w(static_cast<Eigen::Index>(offset(m) + a)) = 1.0;
  }
  return w;
}

Eigen::MatrixXd mass_matrix_from(const ChainModel& m, const Kinematics& k) {
  const auto N = static_cast<Eigen::Index>(m.coordinate_count());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  if (m.root == RootMode::PrismaticVertical) M(0, 0) += m.root_mass;
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    const auto J = point_jacobian(m, k, i, k.com[i]);
    const auto w = angular_jacobian(m, i);
    M.noalias() += m.links[i].mass * J.transpose() * J;
    M.noalias() += m.links[i].inertia * w.transpose() * w;
    const auto jj = static_cast<Eigen::Index>(offset(m) + i);
    M(jj, jj) += m.links[i].armature;
  }
  return M;
}

}  // namespace

void ChainModel::validate() const {
  if (links.empty()) throw ConfigError("chain model needs at least one link");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.parent >= static_cast<int>(i) || l.parent < -1) {
      throw ConfigError("link '" + l.name + "': parent must precede the link");
    }
    if (!(l.length > 0.0) || !(l.mass > 0.0) || l.inertia < 0.0 || l.armature < 0.0) {
      throw ConfigError("link '" + l.name + "': length and mass must be > 0, inertia and armature >= 0");
    }
    if (!(l.lower < l.upper)) throw ConfigError("link '" + l.name + "': joint limits inverted");
    l.gains.validate();
  }
  if (root == RootMode::PrismaticVertical && !(root_mass > 0.0)) {
    throw ConfigError("prismatic root needs a positive root mass");
  }
  if (!(gravity >= 0.0)) throw ConfigError("gravity must be >= 0");
  if (!initial_angles.empty() && initial_angles.size() != links.size()) {
    throw ConfigError("initial_angles must have one entry per link");
  }
  bounds.validate();
  if (bounds.size() != links.size()) {
    throw ConfigError("bound table must have one entry per link");
  }
}

ChainState initial_state(const ChainModel& m) {
  const auto N = static_cast<Eigen::Index>(m.coordinate_count());
  ChainState s{Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(N)};
  const std::size_t o = offset(m);
  if (o == 1) s.q[0] = m.root_height;
  for (std::size_t i = 0; i < m.initial_angles.size(); ++i) {
    s.q[static_cast<Eigen::Index>(o + i)] = m.initial_angles[i];
  }
  return s;
}

Kinematics forward_kinematics(const ChainModel& m, const Eigen::VectorXd& q) {
  return compute_motion(m, q, nullptr).kin;
}

Eigen::MatrixXd mass_matrix(const ChainModel& m, const Eigen::VectorXd& q) {
  return mass_matrix_from(m, forward_kinematics(m, q));
}

Eigen::VectorXd limit_torques(const ChainModel& m, const ChainState& s) {
  const std::size_t o = offset(m);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.links.size()));
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    const double q = s.q[static_cast<Eigen::Index>(o + i)];
    const double qd = s.qd[static_cast<Eigen::Index>(o + i)];
    const Link& l = m.links[i];
    if (q < l.lower) {
      tau[static_cast<Eigen::Index>(i)] = m.limit_stiffness * (l.lower - q) - m.limit_damping * qd;
    } else if (q > l.upper) {
      tau[static_cast<Eigen::Index>(i)] = m.limit_stiffness * (l.upper - q) - m.limit_damping * qd;
    }
  }
  return tau;
}

Eigen::VectorXd forward_dynamics(const ChainModel& m, const ChainState& s,
                                 const Eigen::VectorXd& joint_torque) {
  const Motion mo = compute_motion(m, s.q, &s.qd);
  const auto& k = mo.kin;
  const std::size_t o = offset(m);
  const auto N = static_cast<Eigen::Index>(m.coordinate_count());

  Eigen::VectorXd Q = Eigen::VectorXd::Zero(N);
  Q.segment(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(m.links.size())) =
      joint_torque + limit_torques(m, s);
  if (o == 1) {
    Q[0] -= m.root_mass * m.gravity;
    if (m.root_contact && s.q[0] < 0.0) {
      Q[0] += std::max(0.0, -m.ground_stiffness * s.q[0] - m.ground_damping * s.qd[0]);
    }
  }

  for (std::size_t i = 0; i < m.links.size(); ++i) {
    const Link& l = m.links[i];
    const auto J = point_jacobian(m, k, i, k.com[i]);
    const Eigen::Vector2d f{-l.mass * mo.com_acc0[i].x, -l.mass * (mo.com_acc0[i].y + m.gravity)};
    Q.noalias() += J.transpose() * f;

    if (l.tip_contact && k.tip[i].y < 0.0) {
      const double fy =
          std::max(0.0, -m.ground_stiffness * k.tip[i].y - m.ground_damping * mo.tip_vel[i].y);
      const auto Jt = point_jacobian(m, k, i, k.tip[i]);
      Q.noalias() += Jt.transpose() * Eigen::Vector2d{0.0, fy};
    }
  }

  const Eigen::MatrixXd M = mass_matrix_from(m, k);
  return M.ldlt().solve(Q);
}

namespace {

// d/dt (M qd) = M qdd + (dM/dt) qd; dM/dt by a central difference along qd.
Eigen::VectorXd momentum_rate(const ChainModel& m, const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qd, const Eigen::VectorXd& joint_torque) {
  const Eigen::VectorXd qdd = forward_dynamics(m, ChainState{q, qd}, joint_torque);
  const double h = 1e-6 / std::max(1.0, qd.lpNorm<Eigen::Infinity>());
  const Eigen::MatrixXd dM = (mass_matrix(m, q + h * qd) - mass_matrix(m, q - h * qd)) / (2.0 * h);
  return M * qdd + dM * qd;
}

}  // namespace

void integrate(const ChainModel& m, ChainState& s, const Eigen::VectorXd& joint_torque, double dt) {
  // Symplectic Euler on (q, p = M qd): the momentum update is implicit in the
  // new velocity and solved by fixed-point iteration, then q moves with it.
  const Eigen::MatrixXd M = mass_matrix(m, s.q);
  const auto solver = M.ldlt();
  const Eigen::VectorXd p = M * s.qd;
  Eigen::VectorXd v = s.qd;
  for (int it = 0; it < 8; ++it) {
    const Eigen::VectorXd next = solver.solve(p + dt * momentum_rate(m, M, s.q, v, joint_torque));
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    if (change <= 1e-10 * (1.0 + v.lpNorm<Eigen::Infinity>())) break;
  }
  s.q += dt * v;
  s.qd = mass_matrix(m, s.q).ldlt().solve(M * v);
}

Energy mechanical_energy(const ChainModel& m, const ChainState& s) {
  const Kinematics k = forward_kinematics(m, s.q);
  Energy e;
  e.kinetic = 0.5 * s.qd.dot(mass_matrix_from(m, k) * s.qd);
  if (m.root == RootMode::PrismaticVertical) {
    e.potential += m.root_mass * m.gravity * k.root.y;
    if (m.root_contact && k.root.y < 0.0) e.potential += 0.5 * m.ground_stiffness * k.root.y * k.root.y;
  }
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    e.potential += m.links[i].mass * m.gravity * k.com[i].y;
    if (m.links[i].tip_contact && k.tip[i].y < 0.0) {
      e.potential += 0.5 * m.ground_stiffness * k.tip[i].y * k.tip[i].y;
    }
  }
  return e;
}

}  // namespace fatigue
