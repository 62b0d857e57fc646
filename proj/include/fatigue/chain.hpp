#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fatigue/torque.hpp"

namespace fatigue {

enum class RootMode {
  Fixed,              // root body welded at its initial height
  PrismaticVertical,  // root body slides on a vertical rail (hopping)
};

/// One revolute joint plus the rigid link it drives. The joint sits at the tip
/// of the parent link, or at `attach` in the root frame for root children.
struct Link {
  std::string name;  // DoF name
  int parent = -1;
  double length = 0.0;
  double mass = 0.0;
  double inertia = 0.0;  // about the centre of mass
  double armature = 0.0;  // reflected actuator inertia on the joint axis
  double com = 0.5;      // centre of mass as a fraction of length
  double zero_angle = 0.0;  // link direction relative to parent at q = 0
  double attach_x = 0.0;
  double attach_y = 0.0;
  double lower = -3.14159265358979;  // joint limits, rad
  double upper = 3.14159265358979;
  PdGains gains;
  bool tip_contact = false;  // tip point collides with the ground y = 0

  friend bool operator==(const Link&, const Link&) = default;
};

struct ChainModel {
  std::string name;
  std::vector<Link> links;
  RootMode root = RootMode::Fixed;
  double root_mass = 0.0;
  double root_height = 0.0;  // initial root y
  bool root_contact = false;  // prismatic root collides with the ground
  double gravity = 9.81;
  double ground_stiffness = 3.0e4;
  double ground_damping = 1.5e3;
  double limit_stiffness = 2.0e3;
  double limit_damping = 50.0;
  TorqueBoundTable bounds;
  std::vector<double> initial_angles;

  std::size_t dof_count() const { return links.size(); }
  std::size_t coordinate_count() const { return links.size() + (root == RootMode::PrismaticVertical); }
  /// Throws ConfigError when the model is inconsistent.
  void validate() const;
  /// Stable hash of the JSON form, recorded in trace metadata.
  std::string hash() const;

  friend bool operator==(const ChainModel&, const ChainModel&) = default;
};

/// Generalised coordinates: [root_y (prismatic only), joint angles...].
struct ChainState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Kinematics {
  Point2 root;
  std::vector<double> world_angle;
  std::vector<Point2> joint;  // joint position of each link
  std::vector<Point2> tip;
  std::vector<Point2> com;
};

ChainState initial_state(const ChainModel& model);

Kinematics forward_kinematics(const ChainModel& model, const Eigen::VectorXd& q);

/// Joint-space mass matrix.
Eigen::MatrixXd mass_matrix(const ChainModel& model, const Eigen::VectorXd& q);

/// Generalised accelerations for the given joint actuation (one per DoF).
/// Includes gravity, ground contact and joint-limit penalties.
Eigen::VectorXd forward_dynamics(const ChainModel& model, const ChainState& s,
                                 const Eigen::VectorXd& joint_torque);

/// Penalty torques pushing joints back inside their limits.
Eigen::VectorXd limit_torques(const ChainModel& model, const ChainState& s);

/// One semi-implicit (symplectic) Euler step in momentum form.
void integrate(const ChainModel& model, ChainState& s, const Eigen::VectorXd& joint_torque,
               double dt);

struct Energy {
  double kinetic = 0.0;
  double potential = 0.0;  // gravity plus ground springs
  double total() const { return kinetic + potential; }
};

Energy mechanical_energy(const ChainModel& model, const ChainState& s);

}  // namespace fatigue
