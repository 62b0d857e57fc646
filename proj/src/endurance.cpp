#include "fatigue/endurance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <thread>

#include "fatigue/profile.hpp"

namespace fatigue {

EnduranceResult endurance_time(double target_load, const ThreeCCParams& params, double dt,
                               double horizon) {
  if (!(target_load > 0.0) || !std::isfinite(target_load)) {
    throw ConfigError("TL must be positive");
  }
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  params.validate();

  EnduranceResult out;
  out.horizon = horizon;
  CompartmentState state = init_state(RestedInit{});
  const auto steps = static_cast<long long>(std::ceil(horizon / dt - 1e-9));
  double margin_prev = 100.0 - state.fatigued - target_load;
  for (long long k = 1; k <= steps; ++k) {
    state = step(state, target_load, params, dt).state;
    const double margin = 100.0 - state.fatigued - target_load;
    if (margin < 0.0) {
      const double t_prev = static_cast<double>(k - 1) * dt;
      double t_fail = static_cast<double>(k) * dt;
      // Loads at or above 100 %MVC start out failed; report the first step.
      if (margin_prev >= 0.0) t_fail = t_prev + dt * margin_prev / (margin_prev - margin);
      out.endurance_time = t_fail > 0.0 ? t_fail : dt;
      out.failure_detected = true;
      break;
    }
    margin_prev = margin;
  }
  out.final_state = state;
  return out;
}

double sustainable_load_closed_form(const ThreeCCParams& p) {
  const double rr = p.rest_multiplier * p.recovery;
  if (p.fatigue == 0.0) return 100.0;
  return 100.0 * rr / (rr + p.fatigue);
}

double sustainable_load_finite_drive(const ThreeCCParams& p) {
  if (p.fatigue == 0.0) return 100.0;
  if (p.recovery == 0.0) return 0.0;
  // Holding steady state: M_A = L_D TL / (L_D + F), M_F = F M_A / R; the hold
  // breaks once 100 - M_F reaches TL.
  const double k = p.develop * p.fatigue / ((p.develop + p.fatigue) * p.recovery);
  return 100.0 / (1.0 + k);
}

SustainableLoad sustainable_load(const ThreeCCParams& params, double tol, double dt,
                                 double horizon) {
  params.validate();
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  SustainableLoad out;
  out.closed_form = sustainable_load_closed_form(params);
  out.closed_form_finite_drive = sustainable_load_finite_drive(params);

  auto holds = [&](double tl) { return !endurance_time(tl, params, dt, horizon).failure_detected; };
  if (holds(100.0)) {
    out.bisected = 100.0;
    return out;
  }
  double lo = 0.0;
  double hi = 100.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? lo : hi) = mid;
  }
  out.bisected = 0.5 * (lo + hi);
  return out;
}

Sensitivity ld_lr_sensitivity(double target_load, const ThreeCCParams& params,
                              const std::vector<double>& factors, double dt, double horizon) {
  ThreeCCParams ref = params;
  ref.develop = ref.relax = 10.0;
  const EnduranceResult base = endurance_time(target_load, ref, dt, horizon);
  if (!base.endurance_time) throw ConfigError("TL is sustainable at L_D = L_R = 10; ET undefined");

  Sensitivity out;
  out.reference_time = *base.endurance_time;
  for (double f : factors) {
    ThreeCCParams p = params;
    p.develop = p.relax = f;
    const auto r = endurance_time(target_load, p, dt, horizon);
    out.times.emplace_back(f, r.endurance_time);
    const double change = r.endurance_time
                              ? std::abs(*r.endurance_time - out.reference_time) / out.reference_time
                              : std::numeric_limits<double>::infinity();
    out.max_relative_change = std::max(out.max_relative_change, change);
  }
  return out;
}

IntermittentResult intermittent_recovery(const DutyCycle& duty, double tl_on,
                                         const ThreeCCParams& params, double horizon, double dt) {
  if (!(duty.on > 0.0) || duty.off < 0.0) throw ConfigError("duty cycle must have on > 0, off >= 0");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  const double period = duty.on + duty.off;

  std::vector<LoadSample> profile;
  if (duty.off == 0.0) {
    profile = {{0.0, tl_on}, {horizon, tl_on}};
  } else {
    for (long long c = 0;; ++c) {
      const double start = static_cast<double>(c) * period;
      if (start >= horizon) break;
      profile.push_back({start, tl_on});
      if (start + duty.on < horizon) profile.push_back({start + duty.on, 0.0});
    }
    profile.push_back({horizon, 0.0});
  }

  IntermittentResult out;
  out.trace = integrate_profile(profile, params, dt);
  double total = 0.0;
  for (const auto& row : out.trace.rows) {
    const double mf = row.dofs[0].state.fatigued;
    total += mf;
    const auto cycle = static_cast<std::size_t>(std::floor(row.t / period));
    if (row.t >= horizon && cycle >= out.cycle_peaks.size()) continue;
    if (out.cycle_peaks.size() <= cycle) out.cycle_peaks.resize(cycle + 1, 0.0);
    out.cycle_peaks[cycle] = std::max(out.cycle_peaks[cycle], mf);
  }
  out.mean_fatigued = total / static_cast<double>(out.trace.rows.size());
  return out;
}

std::vector<JointRank> joint_fatigue_ranking(const Trace& trace) {
  if (trace.rows.empty() || trace.dof_count() == 0) {
    throw ConfigError("joint_fatigue_ranking: empty trace");
  }
  const std::size_t n = trace.dof_count();
  std::vector<JointRank> ranks(n);
  for (std::size_t d = 0; d < n; ++d) {
    ranks[d].dof = d;
    ranks[d].name = trace.meta.dof_names[d];
  }
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& row = trace.rows[i];
    for (std::size_t d = 0; d < n; ++d) {
      const double mf = row.dofs[d].state.fatigued;
      ranks[d].peak_fatigued = std::max(ranks[d].peak_fatigued, mf);
      if (i > 0) {
        const auto& prev = trace.rows[i - 1];
        ranks[d].integral_fatigued += 0.5 * (mf + prev.dofs[d].state.fatigued) * (row.t - prev.t);
      }
    }
  }
  std::sort(ranks.begin(), ranks.end(), [](const JointRank& a, const JointRank& b) {
    if (a.peak_fatigued != b.peak_fatigued) return a.peak_fatigued > b.peak_fatigued;
    if (a.integral_fatigued != b.integral_fatigued) return a.integral_fatigued > b.integral_fatigued;
    return a.dof < b.dof;
  });
  return ranks;
}

void write_ranking_csv(std::ostream& out, const std::vector<JointRank>& ranking) {
  out << "rank,dof,name,peak_mf,integral_mf\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& r = ranking[i];
    out << i + 1 << ',' << r.dof << ',' << r.name << ',' << r.peak_fatigued << ','
        << r.integral_fatigued << '\n';
  }
}

const SweepCell& SweepGrid::at(std::size_t fi, std::size_t ri, std::size_t mi) const {
  const std::size_t nr = spec.recovery.size();
  const std::size_t nm = spec.rest_multiplier.size();
  return cells.at((fi * nr + ri) * nm + mi);
}

std::vector<ThreeCCParams> sweep_params(const SweepSpec& spec) {
  if (spec.fatigue.empty() || spec.recovery.empty() || spec.rest_multiplier.empty()) {
    throw ConfigError("sweep grid must be non-empty along every axis");
  }
  std::vector<ThreeCCParams> cells;
  cells.reserve(spec.fatigue.size() * spec.recovery.size() * spec.rest_multiplier.size());
  for (double f : spec.fatigue) {
    for (double r : spec.recovery) {
      for (double m : spec.rest_multiplier) {
        ThreeCCParams p{f, r, m, spec.develop, spec.relax};
        p.validate();
        cells.push_back(p);
      }
    }
  }
  return cells;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

SweepGrid sweep(const SweepSpec& spec, double target_load, double dt, double horizon,
                unsigned workers) {
  const auto params = sweep_params(spec);
  SweepGrid grid;
  grid.spec = spec;
  grid.target_load = target_load;
  grid.cells.resize(params.size());
  parallel_for(params.size(), workers, [&](std::size_t i) {
    grid.cells[i] = SweepCell{params[i], endurance_time(target_load, params[i], dt, horizon)};
  });
  return grid;
}

std::vector<double> sweep_map(const std::vector<ThreeCCParams>& cells,
                              const std::function<double(const ThreeCCParams&)>& fn,
                              unsigned workers) {
  std::vector<double> out(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) { out[i] = fn(cells[i]); });
  return out;
}

void write_sweep_csv(std::ostream& out, const SweepGrid& grid) {
  out << "F,R,r,L_D,L_R,tl,endurance_time,failure_detected,horizon,final_ma,final_mr,final_mf\n"
      << std::setprecision(17);
  for (const auto& c : grid.cells) {
    const auto& p = c.params;
    out << p.fatigue << ',' << p.recovery << ',' << p.rest_multiplier << ',' << p.develop << ','
        << p.relax << ',' << grid.target_load << ',';
    if (c.result.endurance_time) {
      out << *c.result.endurance_time;
    } else {
      out << "inf";
    }
    out << ',' << (c.result.failure_detected ? 1 : 0) << ',' << c.result.horizon << ','
        << c.result.final_state.active << ',' << c.result.final_state.resting << ','
        << c.result.final_state.fatigued << '\n';
  }
}

}  // namespace fatigue
