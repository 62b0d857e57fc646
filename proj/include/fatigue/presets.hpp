#pragma once

#include <string>
#include <vector>

#include "fatigue/chain.hpp"
#include "fatigue/harness.hpp"

namespace fatigue {

/// PD gains that keep an explicit controller held for `control_dt` stable at
/// every listed pose, up to beta = 2. Damping is sized per joint from the
/// joint's effective inertia, then both gains are scaled down by the largest
/// coupled mode; stiffness is kept proportional to damping so the modes of
/// the stiffness and damping terms coincide.
std::vector<PdGains> explicit_pd_gains(const ChainModel& model,
                                       const std::vector<std::vector<double>>& poses,
                                       double control_dt, double damping_ratio = 0.6,
                                       double stiffness_ratio = 1.0 / 3.0);

/// Upright trunk with a three-link arm holding a weight in the hand.
/// DoFs: Abdomen, Shoulder, Elbow, Wrist.
ChainModel arm_chain();

/// Torso on a vertical rail with two legs (hip, knee) and two arms
/// (shoulder, elbow). Left and right sides are symmetry pairs.
ChainModel hopper();

/// Holds the model's initial pose.
TaskScript rest_hold(const ChainModel& model);

/// Arm raised to horizontal and held.
TaskScript shoulder_hold();

/// Arm raised and lowered every two seconds.
TaskScript reach_task();

/// Crouch and jump once per second; `rest` windows stand still.
TaskScript hop_task(std::vector<RestWindow> rest = {});

/// The shoulder_hold pose is the arm chain's initial pose and these bounds
/// make the hold cost about half of the shoulder's capacity.
TorqueBoundTable arm_chain_bounds();

/// Named presets: models "arm4", "hopper"; tasks "rest_hold" (for the
/// given model), "shoulder_hold", "reach", "hop". Unknown names throw
/// ConfigError.
std::vector<std::string> model_preset_names();
std::vector<std::string> task_preset_names();
ChainModel model_preset(const std::string& name);
TaskScript task_preset(const std::string& name, const ChainModel& model);

/// True when every DoF has a positive bound.
bool bounds_ready(const ChainModel& model);

}  // namespace fatigue
