#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fatigue/chain.hpp"
#include "fatigue/config_json.hpp"
#include "fatigue/harness.hpp"
#include "fatigue/three_cc.hpp"
#include "fatigue/trace.hpp"

namespace fatigue::live {

inline constexpr int kWireVersion = 1;
inline constexpr double kFrameRate = 30.0;

/// Structured error reply: `code` is machine-readable, `msg` for people.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Single pool driven by a live target load.
struct ProfileScenario {
  ThreeCCParams params;
  double target_load = 0.0;
  double dt = 1.0 / kFrameRate;
  std::string dof_name = "dof0";
  InitMode init = RestedInit{};
};

/// Scripted chain task. Bounds are calibrated at start when the model has none.
struct TaskScenario {
  ChainModel model;
  TaskScript task;
  SimConfig config;
};

using Scenario = std::variant<ProfileScenario, TaskScenario>;

/// Parses the `scenario` object of a start message. Throws ProtocolError
/// with code "invalid_scenario".
///
/// Profile: {"kind":"profile","params":{F,R[,r,L_D,L_R]},"tl":..,
///           "dt"?,"dof"?,"init"?:"rested"|"random","seed"?}
/// Task:    {"kind":"task","model":<preset name or model JSON>,
///           "task":<preset name or task JSON>,"params":{...},
///           "fatigue_enabled"?,"init"?,"seed"?,"bounds"?:[..]}
Scenario parse_scenario(const Json& j);

struct FrameDof {
  std::string name;
  double ma = 0.0;
  double mr = 0.0;
  double mf = 0.0;
  double rc = 1.0;
  double tl = 0.0;
  double torque = 0.0;  // applied (clipped) torque

  friend bool operator==(const FrameDof&, const FrameDof&) = default;
};

struct Pose {
  double root_y = 0.0;
  std::vector<double> angles;
  std::vector<Point2> joints;
  std::vector<Point2> tips;

  friend bool operator==(const Pose& a, const Pose& b) {
    auto same = [](const std::vector<Point2>& x, const std::vector<Point2>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].x != y[i].x || x[i].y != y[i].y) return false;
      }
      return true;
    };
    return a.root_y == b.root_y && a.angles == b.angles && same(a.joints, b.joints) &&
           same(a.tips, b.tips);
  }
};

struct Frame {
  std::uint64_t index = 0;
  double t = 0.0;
  ThreeCCParams params;
  std::vector<FrameDof> dofs;
  double mean_rc = 1.0;
  std::optional<Pose> pose;
  double lag = 0.0;  // seconds behind the wall-clock slot of this frame

  friend bool operator==(const Frame&, const Frame&) = default;
};

Json to_json(const Frame& f);
/// Throws ProtocolError("bad_frame") on missing or mistyped fields.
Frame frame_from_json(const Json& j);

Json ack_json(std::uint64_t applies_at);
Json error_json(const std::string& code, const std::string& msg);

/// Update as it took effect: the first frame it governed and the values in
/// force from then on.
struct AppliedUpdate {
  std::uint64_t frame = 0;
  ThreeCCParams params;
  double target_load = 0.0;  // profile scenarios only
  std::optional<InitMode> reset;
};

/// One running scenario. Messages are validated on arrival and queued; the
/// queue drains at the start of the next step(), so every frame is computed
/// under a single consistent set of values.
class Session {
 public:
  Session(std::string id, Scenario scenario);
  ~Session();
  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;

  const std::string& id() const { return id_; }

  /// Frame for the current state without stepping.
  Frame frame() const;

  /// Handles set_params, set_load, pause, resume and reset. Returns the
  /// reply (ack or error); rejected messages leave the session untouched.
  Json handle(const Json& msg);

  /// Drains queued updates and advances one control step. Returns nothing
  /// while paused. A pending reset produces the reset state at t = 0
  /// instead of a step.
  std::optional<Frame> step(double lag = 0.0);

  bool paused() const { return paused_; }
  std::uint64_t frame_index() const { return index_; }
  double time() const;
  const ThreeCCParams& params() const;
  bool is_task() const;

  /// The scenario as resolved at start (bounds calibrated, defaults filled).
  const Scenario& scenario() const { return scenario_; }
  /// Every update in the order it took effect.
  const std::vector<AppliedUpdate>& history() const { return history_; }

 private:
  struct Pending {
    std::optional<ThreeCCParams> params;
    std::optional<double> target_load;
    std::optional<InitMode> reset;
  };
  void apply_pending();

  std::string id_;
  Scenario scenario_;
  std::unique_ptr<Harness> harness_;  // task scenarios
  CompartmentState state_;            // profile scenarios
  ThreeCCParams params_;
  double target_load_ = 0.0;
  std::uint64_t steps_ = 0;  // since the last reset
  std::uint64_t index_ = 0;
  bool paused_ = false;
  Pending pending_;
  std::vector<AppliedUpdate> history_;
};

/// Offline replay of a session that was never reset: frames 0..last_frame
/// computed with integrate_profile or simulate under the recorded schedule.
/// Throws ConfigError when the history contains a reset.
Trace replay(const Scenario& scenario, const std::vector<AppliedUpdate>& history,
             std::uint64_t last_frame);

}  // namespace fatigue::live
