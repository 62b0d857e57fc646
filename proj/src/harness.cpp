#include "fatigue/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fatigue {

namespace {

bool needs_period(TaskKind k) { return k != TaskKind::StaticHold; }

Point2 end_effector(const ChainModel& model, const TaskScript& task, const Kinematics& k) {
  const int link = task.metric_link < 0 ? static_cast<int>(model.links.size()) - 1 : task.metric_link;
  return k.tip[static_cast<std::size_t>(link)];
}

}  // namespace

bool TaskScript::resting(double t) const {
  return std::any_of(rest.begin(), rest.end(),
                     [t](const RestWindow& w) { return t >= w.start && t < w.end(); });
}

void TaskScript::validate(const ChainModel& model) const {
  const std::size_t n = model.dof_count();
  if (keyframes.empty()) throw ConfigError("task '" + name + "': no keyframes");
  if (keyframes.front().t != 0.0) throw ConfigError("task '" + name + "': first keyframe must be at t = 0");
  if (needs_period(kind) && !(period > 0.0)) {
    throw ConfigError("task '" + name + "': cyclic task needs period > 0");
  }
  if (period < 0.0 || !std::isfinite(period)) throw ConfigError("task '" + name + "': bad period");
  const BetaRange range;
  auto check_pose = [&](const std::vector<double>& pose, const std::string& what) {
    if (pose.size() != n) {
      throw ConfigError("task '" + name + "': " + what + " has " + std::to_string(pose.size()) +
                        " targets, model has " + std::to_string(n) + " DoFs");
    }
    for (std::size_t d = 0; d < n; ++d) {
      const Link& l = model.links[d];
      if (!(pose[d] >= l.lower && pose[d] <= l.upper)) {
        throw ConfigError("task '" + name + "': " + what + " target for '" + l.name +
                          "' outside joint limits");
      }
    }
  };
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    const Keyframe& kf = keyframes[i];
    if (i > 0 && !(kf.t > keyframes[i - 1].t)) {
      throw ConfigError("task '" + name + "': keyframe times must increase");
    }
    if (cyclic() && kf.t >= period) throw ConfigError("task '" + name + "': keyframe beyond period");
    if (kf.beta < range.min || kf.beta > range.max) {
      throw ConfigError("task '" + name + "': keyframe beta outside [0.1, 2]");
    }
    check_pose(kf.targets, "keyframe " + std::to_string(i));
  }
  for (const RestWindow& w : rest) {
    if (!(w.duration > 0.0) || !(w.start >= 0.0)) {
      throw ConfigError("task '" + name + "': rest window needs start >= 0 and duration > 0");
    }
  }
  if (!rest.empty() && rest_mode == RestMode::Hold) {
    check_pose(rest_pose, "rest pose");
    if (rest_beta < range.min || rest_beta > range.max) {
      throw ConfigError("task '" + name + "': rest beta outside [0.1, 2]");
    }
  }
  if (!start_pose.empty()) check_pose(start_pose, "start pose");
  if (metric_link >= static_cast<int>(n) || metric_link < -1) {
    throw ConfigError("task '" + name + "': metric_link out of range");
  }
}

Command command_at(const TaskScript& task, double t) {
  if (task.resting(t)) return {task.rest_pose, task.rest_beta, true, task.rest_mode == RestMode::Limp};
  const auto& kfs = task.keyframes;
  const double phase = task.cyclic() ? std::fmod(t, task.period) : t;
  auto next = std::upper_bound(kfs.begin(), kfs.end(), phase,
                               [](double p, const Keyframe& k) { return p < k.t; });
  const Keyframe& cur = *std::prev(next);
  if (task.interpolation == Interpolation::Step) return {cur.targets, cur.beta, false};

  const Keyframe* to = nullptr;
  double t_to = 0.0;
  if (next != kfs.end()) {
    to = &*next;
    t_to = next->t;
  } else if (task.cyclic()) {
    to = &kfs.front();
    t_to = task.period;
  } else {
    return {cur.targets, cur.beta, false};
  }
  const double a = (phase - cur.t) / (t_to - cur.t);
  Command c{cur.targets, cur.beta + a * (to->beta - cur.beta), false};
  for (std::size_t d = 0; d < c.targets.size(); ++d) {
    c.targets[d] += a * (to->targets[d] - cur.targets[d]);
  }
  return c;
}

int SimConfig::substeps() const {
  if (!(sim_dt > 0.0) || !(control_dt > 0.0)) throw ConfigError("sim_dt and control_dt must be > 0");
  const double ratio = control_dt / sim_dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * n) {
    throw ConfigError("control_dt must be an integer multiple of sim_dt");
  }
  return static_cast<int>(n);
}

void SimConfig::validate() const {
  substeps();
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("duration must be >= 0");
  params.validate();
}

InitMode SimConfig::init_mode() const {
  if (randomized_init) return RandomizedInit{seed};
  return RestedInit{};
}

Harness::Harness(ChainModel model, TaskScript task, SimConfig cfg)
    : Harness(std::move(model), std::move(task), std::move(cfg), false) {}

Harness::Harness(ChainModel model, TaskScript task, SimConfig cfg, bool calibrating)
    : model_((model.validate(), std::move(model))),
      task_(std::move(task)),
      cfg_((cfg.validate(), cfg)),
      calibrating_(calibrating),
      limiter_(model_.bounds, cfg_.params, cfg_.init_mode()),
      chain_(initial_state(model_)) {
  task_.validate(model_);
  chain_ = start_state();
  intended_.assign(model_.dof_count(), 0.0);
  applied_.assign(model_.dof_count(), 0.0);
  observed_ = model_.bounds;
  std::fill(observed_.t_max.begin(), observed_.t_max.end(), 0.0);
}

void Harness::set_params(const ThreeCCParams& params) {
  limiter_.set_params(params);
  cfg_.params = params;
}

void Harness::reset(const InitMode& init) {
  limiter_.reset(init);
  chain_ = start_state();
  tick_ = 0;
  std::fill(intended_.begin(), intended_.end(), 0.0);
  std::fill(applied_.begin(), applied_.end(), 0.0);
}

ChainState Harness::start_state() const {
  ChainState s = initial_state(model_);
  const std::size_t o = model_.coordinate_count() - model_.dof_count();
  for (std::size_t d = 0; d < task_.start_pose.size(); ++d) {
    s.q[static_cast<Eigen::Index>(o + d)] = task_.start_pose[d];
  }
  return s;
}

TraceMeta Harness::meta() const {
  TraceMeta m;
  m.params = cfg_.params;
  m.dt = cfg_.control_dt;
  m.model_hash = model_.hash();
  m.seed = cfg_.seed;
  m.dof_names = model_.bounds.names;
  m.chain_state = true;
  m.fatigue_enabled = cfg_.fatigue_enabled;
  m.aux_names = {"root_y", "ee_x", "ee_y"};
  return m;
}

TraceRow Harness::row() const {
  const std::size_t n = model_.dof_count();
  const std::size_t o = model_.coordinate_count() - n;
  TraceRow r;
  r.t = time();
  r.dofs.resize(n);
  const auto states = limiter_.states();
  const auto diag = limiter_.diagnostics();
  for (std::size_t d = 0; d < n; ++d) {
    DofSample& s = r.dofs[d];
    s.target_load = limiter_.target_loads()[d];
    s.state = states[d];
    s.rc = residual_capacity(states[d]);
    s.drive = diag[d].drive;
    s.rest_rate = diag[d].rest_rate;
    s.which = diag[d].which;
    s.torque = intended_[d];
    s.applied = applied_[d];
    s.bound = limiter_.limits()[d];
    s.angle = chain_.q[static_cast<Eigen::Index>(o + d)];
    s.velocity = chain_.qd[static_cast<Eigen::Index>(o + d)];
  }
  const Kinematics k = forward_kinematics(model_, chain_.q);
  const Point2 ee = end_effector(model_, task_, k);
  r.aux = {k.root.y, ee.x, ee.y};
  return r;
}

TraceRow Harness::advance() {
  const std::size_t n = model_.dof_count();
  const std::size_t o = model_.coordinate_count() - n;
  const Command cmd = command_at(task_, time());
  for (std::size_t d = 0; d < n; ++d) {
    const DofState st{chain_.q[static_cast<Eigen::Index>(o + d)],
                      chain_.qd[static_cast<Eigen::Index>(o + d)]};
    intended_[d] = cmd.limp ? 0.0 : pd_torque({cmd.targets[d], cmd.beta}, st, model_.links[d].gains);
  }
  if (calibrating_) {
    observed_ = update_torque_bounds(std::move(observed_), intended_);
    applied_ = intended_;
  } else {
    applied_ = limiter_.step_torques(intended_, cfg_.control_dt, cfg_.fatigue_enabled);
  }

  const Eigen::VectorXd tau = Eigen::Map<const Eigen::VectorXd>(applied_.data(), static_cast<Eigen::Index>(n));
  const int subs = cfg_.substeps();
  for (int i = 0; i < subs; ++i) {
    integrate(model_, chain_, tau, cfg_.sim_dt);
    for (Eigen::Index c = 0; c < chain_.qd.size(); ++c) {
      const double v = chain_.qd[c];
      if (!std::isfinite(v) || std::abs(v) > kMaxJointSpeed) {
        std::ostringstream msg;
        msg << "numerical blow-up at t=" << time() + (i + 1) * cfg_.sim_dt << " s: coordinate " << c;
        if (c >= static_cast<Eigen::Index>(o)) msg << " ('" << model_.links[c - o].name << "')";
        msg << " velocity " << v;
        throw SimulationError(msg.str());
      }
    }
  }
  ++tick_;
  return row();
}

namespace {

Trace run(Harness& h, const std::vector<ParamChange>& schedule) {
  Trace tr;
  tr.meta = h.meta();
  const auto ticks = static_cast<std::uint64_t>(std::llround(h.config().duration / h.config().control_dt));
  tr.rows.reserve(ticks + 1);
  tr.rows.push_back(h.row());
  auto next = schedule.begin();
  for (std::uint64_t k = 0; k < ticks; ++k) {
    while (next != schedule.end() && next->tick <= k) {
      h.set_params(next->params);
      ++next;
    }
    tr.rows.push_back(h.advance());
  }
  return tr;
}

}  // namespace

Trace simulate(const ChainModel& model, const TaskScript& task, const SimConfig& cfg) {
  return simulate(model, task, cfg, {});
}

Trace simulate(const ChainModel& model, const TaskScript& task, const SimConfig& cfg,
               const std::vector<ParamChange>& schedule) {
  if (!std::is_sorted(schedule.begin(), schedule.end(),
                      [](const ParamChange& a, const ParamChange& b) { return a.tick < b.tick; })) {
    throw ConfigError("parameter schedule must be sorted by tick");
  }
  for (const auto& c : schedule) c.params.validate();
  Harness h(model, task, cfg);
  return run(h, schedule);
}

TorqueBoundTable calibrate_bounds(const ChainModel& model, const TaskScript& task,
                                  const SimConfig& cfg) {
  SimConfig c = cfg;
  c.fatigue_enabled = false;
  Harness h(model, task, c, true);
  const auto ticks = static_cast<std::uint64_t>(std::llround(c.duration / c.control_dt));
  for (std::uint64_t k = 0; k < ticks; ++k) h.advance();
  return finalize_bounds(h.observed_);
}

TorqueAudit audit_torque_ceiling(const Trace& trace, const TorqueBoundTable& bounds) {
  if (bounds.size() != trace.dof_count()) throw ConfigError("audit: bound table size mismatch");
  TorqueAudit a;
  for (const TraceRow& r : trace.rows) {
    for (std::size_t d = 0; d < r.dofs.size(); ++d) {
      const DofSample& s = r.dofs[d];
      const double ceiling = trace.meta.fatigue_enabled
                                 ? fatigued_limit(residual_capacity(s.state), bounds.t_max[d])
                                 : bounds.t_max[d];
      ++a.checked;
      const double excess = std::abs(s.applied) - ceiling;
      if (excess > 0.0) {
        ++a.violations;
        a.worst_excess = std::max(a.worst_excess, excess);
      }
    }
  }
  return a;
}

std::vector<double> task_signal(const Trace& trace, const TaskScript& task) {
  const std::size_t col = trace.aux_index(task.kind == TaskKind::Hop ? "root_y" : "ee_y");
  std::vector<double> y;
  y.reserve(trace.rows.size());
  for (const auto& r : trace.rows) y.push_back(r.aux.at(col));
  return y;
}

double least_squares_slope(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double xm = (static_cast<double>(n) - 1.0) / 2.0;
  double ym = 0.0;
  for (double v : y) ym += v;
  ym /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xm;
    sxy += dx * (y[i] - ym);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

PerformanceMetrics performance_metrics(const Trace& trace, const TaskScript& task,
                                       std::optional<double> reference, double threshold) {
  if (!task.cyclic()) throw ConfigError("performance_metrics: task '" + task.name + "' is not cyclic");
  if (trace.rows.empty()) throw ConfigError("performance_metrics: empty trace");
  const std::vector<double> y = task_signal(trace, task);
  const double t_last = trace.rows.back().t;
  const double eps = 1e-9;
  const double first_rest =
      task.rest.empty() ? std::numeric_limits<double>::infinity()
                        : std::min_element(task.rest.begin(), task.rest.end(),
                                           [](const RestWindow& a, const RestWindow& b) {
                                             return a.start < b.start;
                                           })->start;

  const double baseline = y.front();
  PerformanceMetrics pm;
  std::size_t row = 0;
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * task.period;
    const double end = start + task.period;
    if (end > t_last + eps) break;
    CycleMetric c;
    c.index = k;
    c.start = start;
    double hi = -std::numeric_limits<double>::infinity();
    double t_hi = start;
    while (row < trace.rows.size() && trace.rows[row].t < start - eps) ++row;
    for (std::size_t i = row; i < trace.rows.size() && trace.rows[i].t < end - eps; ++i) {
      if (y[i] > hi) {
        hi = y[i];
        t_hi = trace.rows[i].t;
      }
    }
    c.amplitude = hi - baseline;
    c.time_to_peak = t_hi - start;
    c.overlaps_rest = std::any_of(task.rest.begin(), task.rest.end(), [&](const RestWindow& w) {
      return w.start < end - eps && w.end() > start + eps;
    });
    pm.cycles.push_back(c);
  }

  if (reference) {
    pm.reference_amplitude = *reference;
  } else {
    auto first = std::find_if(pm.cycles.begin(), pm.cycles.end(),
                              [](const CycleMetric& c) { return !c.overlaps_rest; });
    pm.reference_amplitude = first == pm.cycles.end() ? 0.0 : first->amplitude;
  }
  std::vector<double> before;
  for (auto& c : pm.cycles) {
    c.completed = c.amplitude >= threshold * pm.reference_amplitude;
    if (c.completed && !c.overlaps_rest) ++pm.repetitions;
    if (c.start + task.period <= first_rest + eps) before.push_back(c.amplitude);
  }
  pm.cycles_before_rest = before.size();
  pm.slope_before_rest = least_squares_slope(before);
  return pm;
}

RecoveryReport recovery_experiment(const ChainModel& model, const TaskScript& task,
                                   const SimConfig& cfg, double min_rest) {
  auto w = std::find_if(task.rest.begin(), task.rest.end(),
                        [&](const RestWindow& r) { return r.duration >= min_rest; });
  if (w == task.rest.end()) {
    throw ConfigError("recovery_experiment: task needs a rest window of at least " +
                      std::to_string(min_rest) + " s");
  }
  RecoveryReport rep;
  rep.window = *w;
  rep.trace = simulate(model, task, cfg);
  const auto& rows = rep.trace.rows;
  const double eps = 1e-9;
  auto at = [&](double t) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const TraceRow& r) { return r.t >= t - eps; });
    if (it == rows.end()) throw ConfigError("recovery_experiment: run ends before the rest window");
    return static_cast<std::size_t>(it - rows.begin());
  };
  const std::size_t i0 = at(w->start);
  const std::size_t i1 = at(w->end());
  const auto& dofs = rows[i0].dofs;
  rep.dof = static_cast<std::size_t>(
      std::max_element(dofs.begin(), dofs.end(),
                       [](const DofSample& a, const DofSample& b) {
                         return a.state.fatigued < b.state.fatigued;
                       }) -
      dofs.begin());
  rep.fatigued_start = rows[i0].dofs[rep.dof].state.fatigued;
  rep.fatigued_end = rows[i1].dofs[rep.dof].state.fatigued;
  rep.decreased = rep.fatigued_end < rep.fatigued_start;

  if (task.cyclic()) {
    const PerformanceMetrics pm = performance_metrics(rep.trace, task);
    for (const auto& c : pm.cycles) {
      if (c.start + task.period <= w->start + eps) rep.pre_rest_amplitude = c.amplitude;
    }
    for (const auto& c : pm.cycles) {
      if (c.start >= w->end() - eps) {
        rep.post_rest_amplitude = c.amplitude;
        break;
      }
    }
  }
  return rep;
}

}  // namespace fatigue
