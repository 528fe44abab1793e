#include "tabv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace tabv {

int SimConfig::ctrl_substeps() const { return static_cast<int>(std::lround(dt_ctrl / dt_sim)); }

void SimConfig::validate() const {
  if (!(dt_sim > 0.0) || !(dt_ctrl > 0.0)) throw ConfigError("sim: dt_sim and dt_ctrl must be positive");
  const int n = ctrl_substeps();
  if (n < 1 || std::abs(n * dt_sim - dt_ctrl) > 1e-9 * dt_ctrl)
    throw ConfigError("sim: dt_ctrl must be an integer multiple of dt_sim");
  if (!(gyro_noise >= 0.0)) throw ConfigError("sim: gyro_noise must be non-negative");
  if (!(duration >= 0.0)) throw ConfigError("sim: duration must be non-negative");
  if (!(divergence_margin > 0.0)) throw ConfigError("sim: divergence_margin must be positive");
}

double compute_rmse(const std::vector<Vec3> &actual, const std::vector<Vec3> &reference) {
  if (actual.size() != reference.size()) throw Error("compute_rmse: sequences differ in length");
  if (actual.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += (actual[i] - reference[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double idx = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::size_t table_index(const std::vector<ReferencePoint> &refs, double ref_dt, double t) {
  const long k = std::lround(t / ref_dt);
  return static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(refs.size()) - 1));
}

}  // namespace

RunMetrics metrics_from_log(const std::vector<LogRow> &log, double transition_window) {
  RunMetrics m;
  m.samples = static_cast<int>(log.size());
  if (log.empty()) return m;
  std::vector<Vec3> act, ref, act_g, ref_g, act_a, ref_a;
  std::vector<double> times;
  std::vector<double> transitions;
  int saturated = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const LogRow &r = log[i];
    act.push_back(r.x.p);
    ref.push_back(r.ref.p);
    if (r.mode_ref == Mode::Terrestrial) {
      act_g.push_back(r.x.p);
      ref_g.push_back(r.ref.p);
    } else {
      act_a.push_back(r.x.p);
      ref_a.push_back(r.ref.p);
    }
    m.max_error = std::max(m.max_error, (r.x.p - r.ref.p).norm());
    times.push_back(r.solve_time);
    if (r.saturated) ++saturated;
    if (r.degraded) ++m.degraded_solves;
    if (r.mode == Mode::Terrestrial) m.max_lateral_velocity = std::max(m.max_lateral_velocity, std::abs(lateral_velocity(r.x)));
    if (i > 0) {
      if (r.mode != log[i - 1].mode) {
        ++m.mode_switches;
        transitions.push_back(r.t);
      }
      if (r.mode_ref != log[i - 1].mode_ref) transitions.push_back(r.t);
    }
  }
  m.rmse = compute_rmse(act, ref);
  m.rmse_terrestrial = compute_rmse(act_g, ref_g);
  m.rmse_aerial = compute_rmse(act_a, ref_a);
  m.saturation_fraction = static_cast<double>(saturated) / static_cast<double>(log.size());
  m.solve_p50 = percentile(times, 0.5);
  m.solve_p99 = percentile(times, 0.99);
  m.duration = log.back().t - log.front().t;
  for (const LogRow &r : log)
    for (double tt : transitions)
      if (std::abs(r.t - tt) <= transition_window) m.transition_vz_peak = std::max(m.transition_vz_peak, std::abs(r.x.v.z()));
  return m;
}

RunResult run_closed_loop(const std::vector<ReferencePoint> &refs, double ref_dt, const NmpcConfig &nmpc_config,
                          const IndiConfig &indi_config, const PhysicalParams &params, const SimConfig &sim) {
  sim.validate();
  if (refs.empty()) throw Error("run_closed_loop: empty reference");
  if (!(ref_dt > 0.0)) throw Error("run_closed_loop: reference step must be positive");

  NmpcController nmpc(nmpc_config, params);
  IndiConfig ic = indi_config;
  ic.rate_hz = 1.0 / sim.dt_ctrl;
  IndiController indi(ic, params);

  Vec3 lower = refs.front().x.p, upper = refs.front().x.p;
  for (const auto &r : refs) {
    lower = lower.cwiseMin(r.x.p);
    upper = upper.cwiseMax(r.x.p);
  }
  if (sim.bounds_lower) lower = *sim.bounds_lower;
  if (sim.bounds_upper) upper = *sim.bounds_upper;
  lower.array() -= sim.divergence_margin;
  upper.array() += sim.divergence_margin;

  const double duration = sim.duration > 0.0 ? sim.duration : refs.back().t;
  const int substeps = sim.ctrl_substeps();
  const long ticks = std::lround(std::floor(duration / sim.dt_ctrl + 1e-9)) + 1;

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  RunResult out;
  out.log.reserve(static_cast<std::size_t>(ticks));
  FullState x = refs.front().x;
  Mode mode = refs.front().contact.mode;
  if (mode == Mode::Terrestrial) x = project_to_ground(x);
  Vec3 tau_applied = refs.front().u.torque;
  double max_step = 0.0;
  int hard_landings = 0;

  auto finish = [&](RunResult &r) {
    r.metrics = metrics_from_log(r.log);
    r.metrics.max_position_step = max_step;
    r.metrics.hard_landings = hard_landings;
  };

  for (long k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * sim.dt_ctrl;
    const ReferencePoint &ref = refs[table_index(refs, ref_dt, t)];

    FullState meas = x;
    if (sim.gyro_noise > 0.0)
      for (int i = 0; i < 3; ++i) meas.omega(i) += sim.gyro_noise * noise(rng);

    const FilteredSignals &sig = indi.update_filters(meas.omega, tau_applied);
    OcpSolution sol;
    const ControlInput u = nmpc.step(meas, refs, ref_dt, t, &sol);
    const IndiOutput cmd = indi.torque_command(u.torque, meas.omega);
    const AllocationResult alloc = rotors_from_input(ControlInput{u.thrust, cmd.torque}, params);
    const ControlInput applied = allocate_from_rotors(alloc.rotors, params);
    tau_applied = applied.torque;

    LogRow row;
    row.t = t;
    row.x = x;
    row.ref = ref.x;
    row.mode_ref = ref.contact.mode;
    row.mode = mode;
    row.u_nmpc = u;
    row.tau_cmd = cmd.torque;
    row.u_applied = applied;
    row.tau_hat = sig.tau_hat;
    row.omega_dot_hat = sig.omega_dot_hat;
    row.disturbance_hat = indi.disturbance_estimate();
    row.solve_time = sol.solve_time;
    row.kkt = sol.kkt;
    row.saturated = alloc.saturated;
    row.degraded = sol.degraded;

    for (int s = 0; s < substeps; ++s) {
      const double ts = t + s * sim.dt_sim;
      ExternalWrench wrench;
      if (ts >= sim.disturbance.start_time) {
        wrench.torque = sim.disturbance.torque;
        wrench.force = sim.disturbance.force;
      }
      StepResult step = integrate_rk4(x, applied, mode, sim.dt_sim, params, wrench);
      if (mode == Mode::Terrestrial && step.liftoff) {
        mode = Mode::Aerial;
        step = integrate_rk4(x, applied, mode, sim.dt_sim, params, wrench);
      } else if (mode == Mode::Aerial) {
        const FullState &n = step.x;
        const bool low = n.p.z() <= sim.touchdown_height && n.v.z() <= 0.0;
        const Mode wanted = refs[table_index(refs, ref_dt, ts)].contact.mode;
        if (low && (wanted == Mode::Terrestrial || n.p.z() <= 0.0)) {
          if (n.v.z() < -sim.touchdown_vz) ++hard_landings;
          mode = Mode::Terrestrial;
          step.x = project_to_ground(n);
        }
      }
      if (s == 0) row.normal_force = step.normal_force;
      max_step = std::max(max_step, (step.x.p - x.p).norm());
      x = step.x;
    }
    out.log.push_back(row);

    const bool finite = x.to_vector().allFinite();
    if (!finite || (x.p.array() < lower.array()).any() || (x.p.array() > upper.array()).any()) {
      finish(out);
      throw DivergenceError("run_closed_loop: vehicle left the bounds at t = " + std::to_string(t), std::move(out));
    }
  }
  finish(out);
  return out;
}

void write_log_csv(std::ostream &os, const std::vector<LogRow> &log) {
  os << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,ref_px,ref_py,ref_pz,mode_ref,mode,"
        "T_nmpc,tau_nmpc_x,tau_nmpc_y,tau_nmpc_z,tau_cmd_x,tau_cmd_y,tau_cmd_z,"
        "T_applied,tau_applied_x,tau_applied_y,tau_applied_z,tau_hat_x,tau_hat_y,tau_hat_z,"
        "wdot_hat_x,wdot_hat_y,wdot_hat_z,tau_e_hat_x,tau_e_hat_y,tau_e_hat_z,normal_force,"
        "kkt,saturated,degraded\n";
  const auto prec = os.precision();
  os.precision(12);
  auto v3 = [&](const Vec3 &v) { os << v.x() << ',' << v.y() << ',' << v.z(); };
  for (const LogRow &r : log) {
    os << r.t << ',';
    v3(r.x.p);
    os << ',' << r.x.q.w() << ',' << r.x.q.x() << ',' << r.x.q.y() << ',' << r.x.q.z() << ',';
    v3(r.x.v);
    os << ',';
    v3(r.x.omega);
    os << ',';
    v3(r.ref.p);
    os << ',' << mode_flag(r.mode_ref) << ',' << mode_flag(r.mode) << ',' << r.u_nmpc.thrust << ',';
    v3(r.u_nmpc.torque);
    os << ',';
    v3(r.tau_cmd);
    os << ',' << r.u_applied.thrust << ',';
    v3(r.u_applied.torque);
    os << ',';
    v3(r.tau_hat);
    os << ',';
    v3(r.omega_dot_hat);
    os << ',';
    v3(r.disturbance_hat);
    os << ',' << r.normal_force << ',' << r.kkt << ',' << r.saturated << ','
       << r.degraded << '\n';
  }
  os.precision(prec);
}

}  // namespace tabv
