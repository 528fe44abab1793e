// Acceptance checks. `acceptance` runs every criterion; `acceptance 3 5` runs a
// subset. One PASS/FAIL line per criterion; the exit code is nonzero if any fails.

#include "tabv/pipeline.hpp"
#include "tabv/trajectories.hpp"

#include "oracles.hpp"
#include "problems.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace tabv;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

// Open-loop RK4 on the model with inputs interpolated linearly between reference
// samples; compares against the flat output itself rather than the sampled states.
double open_loop_error(const FlatTrajectory &traj, double dt, const PhysicalParams &params) {
  const auto refs = sample_references(traj, dt, params, FlatnessConfig{});
  StateVector x = refs.front().x.to_vector();
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < refs.size(); ++k) {
    const double h = refs[k + 1].t - refs[k].t;
    if (h <= 0.0) continue;
    const Mode mode = refs[k].contact.mode;
    const InputVector u0 = refs[k].u.to_vector(), u1 = refs[k + 1].u.to_vector();
    auto f = [&](const StateVector &s, double frac) {
      return dynamics_vector(s, u0 + frac * (u1 - u0), mode, params).xdot;
    };
    const StateVector k1 = f(x, 0.0);
    const StateVector k2 = f(x + 0.5 * h * k1, 0.5);
    const StateVector k3 = f(x + 0.5 * h * k2, 0.5);
    const StateVector k4 = f(x + h * k3, 1.0);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x.segment<4>(3).normalize();
    worst = std::max(worst, (x.head<3>() - traj.sample(refs[k + 1].t).p).norm());
  }
  return worst;
}

std::unique_ptr<PolynomialTrajectory> random_aerial(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix3d a, b;
  a.col(0) = Vec3(0, 0, 1.5);
  a.col(1) = Vec3(u(rng), u(rng), 0.5 * u(rng));
  a.col(2) = Vec3(u(rng), u(rng), u(rng));
  b.col(0) = a.col(0) + Vec3(2 * u(rng), 2 * u(rng), 0.5 * u(rng));
  b.col(1) = Vec3(u(rng), u(rng), 0.5 * u(rng));
  b.col(2) = Vec3(u(rng), u(rng), u(rng));
  return std::make_unique<PolynomialTrajectory>(oracle::quintic_through(a, b, 2.0), 2.0, Mode::Aerial);
}

// Forward-moving planar quintic with speed bounded away from zero and a
// longitudinal acceleration the reference thrust can produce.
std::unique_ptr<PolynomialTrajectory> random_terrestrial(std::mt19937_64 &rng, const PhysicalParams &params) {
  std::uniform_real_distribution<double> speed(0.6, 1.5), head(-kPi, kPi), turn(-0.8, 0.8), u(-0.2, 0.2);
  const double T_ref = FlatnessConfig{}.terrestrial_thrust_ratio * params.weight();
  for (;;) {
    const double h0 = head(rng), h1 = h0 + turn(rng), s0 = speed(rng), s1 = speed(rng);
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
    a.col(1) = s0 * Vec3(std::cos(h0), std::sin(h0), 0);
    b.col(1) = s1 * Vec3(std::cos(h1), std::sin(h1), 0);
    b.col(0) = (a.col(1) + b.col(1)) + Vec3(u(rng), u(rng), 0);
    auto traj = std::make_unique<PolynomialTrajectory>(oracle::quintic_through(a, b, 2.0), 2.0, Mode::Terrestrial);
    bool ok = true;
    for (double t = 0.0; t <= 2.0 && ok; t += 1e-2) {
      const FlatSample s = traj->sample(t);
      ok = s.v.norm() > 0.3 && params.mass * s.a.norm() < 0.8 * T_ref;
    }
    if (ok) return traj;
  }
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  const PhysicalParams params;
  std::mt19937_64 rng(2024);
  double worst_air = 0.0, worst_ground = 0.0, worst_lib = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto air = random_aerial(rng);
    worst_air = std::max(worst_air, open_loop_error(*air, 1e-3, params));
    worst_lib = std::max(worst_lib, flatness_roundtrip_check(*air, 1e-3, params, FlatnessConfig{}));
    const auto ground = random_terrestrial(rng, params);
    worst_ground = std::max(worst_ground, open_loop_error(*ground, 1e-3, params));
    worst_lib = std::max(worst_lib, flatness_roundtrip_check(*ground, 1e-3, params, FlatnessConfig{}));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max(worst_air, worst_ground);
  Verdict v;
  v.pass = worst <= 1e-3 && worst_lib <= 1e-3 && secs < 10.0;
  v.detail = "flatness roundtrip on 10 aerial + 10 terrestrial 2 s quintics: max error aerial " +
             fmt("%.2e", worst_air) + " m, terrestrial " + fmt("%.2e", worst_ground) + " m, library check " +
             fmt("%.2e", worst_lib) + " m (limit 1e-3); " + fmt("%.2f", secs) + " s (limit 10 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 2

Verdict criterion2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int active_all = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto world = problems::cluttered_world(seed + 100);
    TrajOptimizer opt(OptimizerConfig{}, world);
    const OptimizerProblem pb = problems::mixed_problem(seed + 100);
    const Eigen::VectorXd x = opt.pack(pb);
    Eigen::VectorXd g(x.size());
    CostBreakdown cb;
    opt.evaluate(pb, x, g, &cb);
    active_all += cb.state > 0.0 && cb.collision > 0.0 && cb.nonholonomic > 0.0;
    auto f = [&](const Eigen::VectorXd &xx) {
      Eigen::VectorXd dummy(xx.size());
      return opt.evaluate(pb, xx, dummy);
    };
    worst = std::max(worst, oracle::relative_error(g, oracle::central_gradient(f, x, 1e-6)));
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst <= 1e-4 && secs < 30.0;
  v.detail = "total-cost gradient vs central differences on 20 seeded problems: worst relative error " +
             fmt("%.2e", worst) + " (limit 1e-4), " + std::to_string(active_all) +
             "/20 with all three penalties active; " + fmt("%.2f", secs) + " s (limit 30 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 3

Verdict criterion3() {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> fill(0.002, 0.3);
  double worst = 0.0, build_time = 0.0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 20; ++i) {
    const OccupancyGrid g = oracle::random_planar_grid(rng, 64, fill(rng), 0.05);
    const auto tb = Clock::now();
    const EsdfGrid e = EsdfGrid::build(g);
    build_time += seconds_since(tb);
    const auto ref = oracle::brute_force_esdf(g);
    for (int j = 0; j < 64; ++j)
      for (int k = 0; k < 64; ++k) worst = std::max(worst, std::abs(e.at(k, j, 0) - ref[g.index(k, j, 0)]));
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst <= 1e-9 && secs < 5.0;
  v.detail = "ESDF vs brute force on 20 random 64x64 grids: max abs difference " + fmt("%.2e", worst) +
             " m (limit 1e-9); transform " + fmt("%.4f", build_time) + " s, total " + fmt("%.2f", secs) +
             " s (limit 5 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 4

double yaw_of(const Quat &q) {
  const Vec3 x = q * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

struct GoalsOutcome {
  bool reached = true;
  double worst_pos = 0.0, worst_heading = 0.0, lateral = 0.0;
};

GoalsOutcome goals_run(const ScenarioConfig &cfg) {
  const WorldPtr world = build_world(cfg.world);
  const PlanOutput plan = plan_scenario(cfg, world);
  GoalsOutcome out;
  RunResult run;
  try {
    run = track_plan(cfg, plan);
  } catch (const DivergenceError &e) {
    run = e.partial();
    out.reached = false;
  }
  // Goal k is reached if, near its planned arrival time, the vehicle passes
  // within 0.3 m with the body heading within 0.3 rad.
  for (std::size_t k = 0; k < cfg.task.goals.size(); ++k) {
    const GoalSpec &goal = cfg.task.goals[k];
    double best = 1e9, best_heading = 1e9;
    for (const auto &row : run.log) {
      if (std::abs(row.t - plan.goal_times[k]) > 1.5) continue;
      const double d = (row.x.p - goal.p).norm();
      if (d < best) {
        best = d;
        best_heading = goal.heading ? std::abs(wrap_angle(yaw_of(row.x.q) - *goal.heading)) : 0.0;
      }
    }
    out.worst_pos = std::max(out.worst_pos, best);
    out.worst_heading = std::max(out.worst_heading, best_heading);
    out.reached = out.reached && best <= 0.3 && best_heading <= 0.3;
  }
  // Sideways velocity the reference asks of the vehicle while it is on the ground.
  for (const auto &row : run.log) {
    if (row.mode != Mode::Terrestrial || row.mode_ref != Mode::Terrestrial) continue;
    out.lateral = std::max(out.lateral, std::abs((row.x.q.conjugate() * row.ref.v).y()));
  }
  return out;
}

Verdict criterion4() {
  const auto t0 = Clock::now();
  ScenarioConfig nominal = preset_scenario("goals-course");
  nominal.optimizer.lambda = Vec4(5, 6, 100, 5);
  ScenarioConfig ablated = nominal;
  ablated.optimizer.lambda(3) = 0.0;
  const GoalsOutcome a = goals_run(nominal);
  const GoalsOutcome b = goals_run(ablated);
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = a.reached && b.lateral > 0.1 && secs < 120.0;
  v.detail = "goals course: lambda=[5,6,100,5] reached all goals " + std::string(a.reached ? "yes" : "no") +
             " (worst " + fmt("%.3f", a.worst_pos) + " m, " + fmt("%.3f", a.worst_heading) +
             " rad; limits 0.3/0.3), lateral demand " + fmt("%.3f", a.lateral) + " m/s; lambda4=0 lateral demand " +
             fmt("%.3f", b.lateral) + " m/s (need > 0.1), goals reached " + (b.reached ? "yes" : "no") + "; " +
             fmt("%.1f", secs) + " s (limit 120 s)";
  return v;
}

// ---------------------------------------------------------------- criteria 5, 6

struct TrackOutcome {
  double rmse = 0.0, v_peak = 0.0, a_peak = 0.0, vz_transition = 0.0;
  double max_step = 0.0;      // largest jump per simulation step, from the simulator
  double max_row_speed = 0.0; // largest jump between log rows over their spacing
  int switches = 0, hard_landings = 0;
};

TrackOutcome lemniscate_run(const std::string &preset) {
  const ScenarioConfig cfg = preset_scenario(preset);
  const PlanOutput plan = plan_scenario(cfg, build_world(cfg.world));
  TrackOutcome out;
  for (double t = 0.0; t <= plan.trajectory->duration(); t += 1e-3) {
    const FlatSample s = plan.trajectory->sample(t);
    out.v_peak = std::max(out.v_peak, s.v.norm());
    out.a_peak = std::max(out.a_peak, s.a.norm());
  }
  const RunResult run = track_plan(cfg, plan);
  std::vector<Vec3> actual, reference;
  for (const auto &row : run.log) {
    actual.push_back(row.x.p);
    reference.push_back(row.ref.p);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += (actual[i] - reference[i]).squaredNorm();
  out.rmse = std::sqrt(sum / static_cast<double>(actual.size()));
  // Continuity and takeoff/landing smoothness from the logged states.
  std::vector<double> switch_times;
  for (std::size_t i = 1; i < run.log.size(); ++i) {
    const double dt = run.log[i].t - run.log[i - 1].t;
    out.max_row_speed = std::max(out.max_row_speed, (run.log[i].x.p - run.log[i - 1].x.p).norm() / dt);
    if (run.log[i].mode != run.log[i - 1].mode) switch_times.push_back(run.log[i].t);
  }
  for (const auto &row : run.log)
    for (double ts : switch_times)
      if (std::abs(row.t - ts) <= 0.2) out.vz_transition = std::max(out.vz_transition, std::abs(row.x.v.z()));
  out.switches = static_cast<int>(switch_times.size());
  out.hard_landings = run.metrics.hard_landings;
  out.max_step = run.metrics.max_position_step;
  return out;
}

Verdict criterion5() {
  const auto t0 = Clock::now();
  const TrackOutcome r = lemniscate_run("lemniscate-2d");
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = r.rmse <= 0.11 && r.v_peak <= 2.0 + 1e-6 && r.a_peak <= 1.8 + 1e-6 && secs < 60.0;
  v.detail = "2D lemniscate (peak v " + fmt("%.3f", r.v_peak) + " <= 2, peak a " + fmt("%.3f", r.a_peak) +
             " <= 1.8): RMSE " + fmt("%.4f", r.rmse) + " m (limit 0.11); " + fmt("%.1f", secs) + " s (limit 60 s)";
  return v;
}

Verdict criterion6() {
  const auto t0 = Clock::now();
  const TrackOutcome r = lemniscate_run("lemniscate-3d");
  const double secs = seconds_since(t0);
  const double dt_sim = SimConfig{}.dt_sim;
  // Continuous position: no single simulation step moves farther than twice the speed bound allows.
  const double step_limit = 2.0 * 3.0 * dt_sim;
  Verdict v;
  v.pass = r.rmse <= 0.12 && r.v_peak <= 3.0 + 1e-6 && r.a_peak <= 2.5 + 1e-6 && r.max_step <= step_limit && r.max_row_speed <= 2.0 * 3.0 &&
           r.vz_transition <= 1.0 && r.switches >= 2 && secs < 60.0;
  v.detail = "3D hybrid lemniscate (peak v " + fmt("%.3f", r.v_peak) + " <= 3, peak a " + fmt("%.3f", r.a_peak) +
             " <= 2.5): RMSE " + fmt("%.4f", r.rmse) + " m (limit 0.12), largest position step " +
             fmt("%.4f", r.max_step) + " m per " + fmt("%.0e", dt_sim) + " s (limit " + fmt("%.3f", step_limit) +
             "), logged displacement rate " + fmt("%.3f", r.max_row_speed) + " m/s (limit 6), |v_z| near " + std::to_string(r.switches) + " mode switches " + fmt("%.3f", r.vz_transition) +
             " m/s (limit 1), hard landings " + std::to_string(r.hard_landings) + "; " + fmt("%.1f", secs) +
             " s (limit 60 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 7

Verdict criterion7() {
  const auto t0 = Clock::now();
  BenchmarkOptions opts;
  opts.suite = "forest-500";
  opts.seeds = 500;
  opts.jobs = 8;
  if (const char *dir = std::getenv("TABV_ACCEPTANCE_OUT")) opts.out_dir = std::string(dir) + "/forest-500";
  std::ostringstream summary;
  const Json rep = run_benchmark(opts, summary);
  const double secs = seconds_since(t0);
  const double success = rep["success_rate"].get<double>();
  const double length = rep["mean_length"].get<double>();
  const double fe = rep["front_end_ms"]["mean"].get<double>(), be = rep["back_end_ms"]["mean"].get<double>();
  const double ratio = length / 76.8;
  Verdict v;
  v.pass = success >= 0.9 && ratio >= 0.7 && ratio <= 1.3 && fe <= 10.0 * 14.6 && be <= 10.0 * 70.8 &&
           secs < 1800.0;
  v.detail = "forest 500 seeds, 8 jobs: success " + fmt("%.1f", 100.0 * success) + "% (need >= 90%), mean length " +
             fmt("%.1f", length) + " m (" + fmt("%.2f", ratio) + "x of 76.8 m, band 0.7-1.3), front-end " +
             fmt("%.1f", fe) + " ms (limit 146), back-end " + fmt("%.1f", be) +
             " ms (limit 708) in thread CPU time, dense audit collision-free " +
             std::to_string(rep["collision_free"].get<int>()) + "/500 with p10 clearance " +
             fmt("%.3f", rep["min_clearance_p10"].get<double>()) + " m; " +
             fmt("%.0f", secs) + " s (limit 1800 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 8

Verdict criterion8() {
  const auto t0 = Clock::now();
  const ScenarioConfig base = preset_scenario("indi-ab");
  const PlanOutput plan = plan_scenario(base, build_world(base.world));
  const Vec3 tau_e = base.sim.disturbance.torque;
  double worst_ratio = 0.0, worst_est = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ScenarioConfig c = base;
    c.apply_seed(seed);
    auto rmse_of = [](const RunResult &r) {
      double s = 0.0;
      for (const auto &row : r.log) s += (row.x.p - row.ref.p).squaredNorm();
      return std::sqrt(s / static_cast<double>(r.log.size()));
    };
    c.indi.enabled = true;
    const RunResult with = track_plan(c, plan);
    c.indi.enabled = false;
    RunResult without;
    try {
      without = track_plan(c, plan);
    } catch (const DivergenceError &e) {
      without = e.partial();
    }
    worst_ratio = std::max(worst_ratio, rmse_of(with) / rmse_of(without));
    // Implied disturbance, averaged over the final two seconds against gyro noise.
    Vec3 est = Vec3::Zero();
    int n = 0;
    for (const auto &row : with.log)
      if (row.t >= with.log.back().t - 2.0) {
        est += row.disturbance_hat;
        ++n;
      }
    est /= std::max(n, 1);
    worst_est = std::max(worst_est, (est - tau_e).norm() / tau_e.norm());
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst_ratio <= 0.2 && worst_est <= 0.05 && secs < 120.0;
  v.detail = "INDI A/B, tau_e = " + fmt("%.2f", tau_e.norm()) + " N m, 5 paired seeds: worst RMSE ratio " +
             fmt("%.3f", worst_ratio) + " (limit 0.2), worst disturbance estimate error " +
             fmt("%.2f", 100.0 * worst_est) + "% (limit 5%); " + fmt("%.1f", secs) + " s (limit 120 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 9

struct Equilibrium {
  double input_error = 0.0, drift = 0.0, duration = 0.0;
};

Equilibrium equilibrium_run(const std::string &preset, const ControlInput &u_eq) {
  ScenarioConfig cfg = preset_scenario(preset);
  cfg.sim.gyro_noise = 0.0;
  const PlanOutput plan = plan_scenario(cfg, build_world(cfg.world));
  const RunResult run = track_plan(cfg, plan);
  Equilibrium e;
  const Vec3 p0 = run.log.front().x.p;
  for (const auto &row : run.log) {
    e.input_error = std::max(e.input_error, (row.u_nmpc.to_vector() - u_eq.to_vector()).cwiseAbs().maxCoeff());
    e.drift = std::max(e.drift, (row.x.p - p0).norm());
  }
  e.duration = run.log.back().t;
  return e;
}

Verdict criterion9() {
  const auto t0 = Clock::now();
  const PhysicalParams params;
  const double T_ground = FlatnessConfig{}.terrestrial_thrust_ratio * params.weight();
  const Equilibrium hover = equilibrium_run("hover", ControlInput{params.weight(), Vec3::Zero()});
  const Equilibrium rest = equilibrium_run("ground-rest", ControlInput{T_ground, Vec3::Zero()});
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = hover.input_error <= 1e-3 && hover.drift <= 1e-3 && rest.input_error <= 1e-3 && rest.drift <= 1e-3 &&
           hover.duration >= 10.0 - 1e-9 && rest.duration >= 10.0 - 1e-9 && secs < 30.0;
  v.detail = "equilibria over " + fmt("%.1f", hover.duration) + " s: hover input error " +
             fmt("%.1e", hover.input_error) + ", drift " + fmt("%.1e", hover.drift) + " m; ground rest input error " +
             fmt("%.1e", rest.input_error) + ", drift " + fmt("%.1e", rest.drift) + " m (limits 1e-3); " +
             fmt("%.1f", secs) + " s (limit 30 s)";
  return v;
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [criterion 1-9 ...]\n";
      return 2;
    }
    selected.push_back(k);
  }
  if (selected.empty())
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);

  int failed = 0;
  for (int k : selected) {
    Verdict v;
    try {
      v = criteria[k - 1]();
    } catch (const std::exception &e) {
      v.pass = false;
      v.detail = std::string("error: ") + e.what();
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << v.detail << std::endl;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
