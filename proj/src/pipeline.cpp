#include "tabv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace tabv {

void ConcatTrajectory::append(std::shared_ptr<const FlatTrajectory> leg) {
  starts_.push_back(duration_);
  duration_ += leg->duration();
  legs_.push_back(std::move(leg));
}

FlatSample ConcatTrajectory::sample(double t) const {
  if (legs_.empty()) throw Error("concat trajectory: no legs");
  std::size_t k = std::upper_bound(starts_.begin(), starts_.end(), t) - starts_.begin();
  k = k == 0 ? 0 : k - 1;
  return legs_[k]->sample(t - starts_[k]);
}

OptimizerProblem problem_from_search(const SearchResult &search, const PVA &head, const PVA &tail,
                                     double piece_duration) {
  const int m = search.pieces();
  if (m == 0) throw PlanningError("plan: search returned no pieces");
  struct Atom {
    Vec3 end;
    double duration;
    Mode mode;
  };
  std::vector<Atom> atoms;
  for (int i = 0; i < m; ++i) {
    const double d = search.durations[i];
    const int split = std::max(1, static_cast<int>(std::lround(d / piece_duration)));
    const bool have_samples = static_cast<int>(search.path_offsets.size()) == m;
    const int off = have_samples ? search.path_offsets[i] : 0;
    const int n = have_samples ? (i + 1 < m ? search.path_offsets[i + 1] : static_cast<int>(search.path.size())) - off : 0;
    double done = 0.0;
    for (int q = 1; q < split && n > 1; ++q) {
      const int k = std::clamp(static_cast<int>(std::lround(static_cast<double>(q) * n / split)), 1, n - 1);
      const double frac = static_cast<double>(k) / n;
      if (frac * d - done < 1e-3) continue;
      atoms.push_back({search.path[off + k - 1], frac * d - done, search.modes[i]});
      done = frac * d;
    }
    atoms.push_back({search.waypoints[i + 1], d - done, search.modes[i]});
  }
  std::vector<Atom> groups;
  for (const Atom &a : atoms) {
    if (!groups.empty() && groups.back().mode == a.mode &&
        groups.back().duration + a.duration <= 1.25 * piece_duration + 1e-9) {
      groups.back().end = a.end;
      groups.back().duration += a.duration;
    } else {
      groups.push_back(a);
    }
  }
  OptimizerProblem prob;
  prob.head = head;
  prob.tail = tail;
  const int g = static_cast<int>(groups.size());
  prob.points.resize(3, g - 1);
  prob.durations.resize(g);
  for (int i = 0; i < g; ++i) {
    if (i + 1 < g) prob.points.col(i) = groups[i].end;
    prob.durations(i) = std::max(groups[i].duration, 1e-2);
    prob.modes.push_back(groups[i].mode);
  }
  return prob;
}

double arc_length(const FlatTrajectory &traj, double dt) {
  double len = 0.0;
  Vec3 prev = traj.sample(0.0).p;
  const int n = std::max(1, static_cast<int>(std::ceil(traj.duration() / dt)));
  for (int i = 1; i <= n; ++i) {
    const Vec3 p = traj.sample(traj.duration() * i / n).p;
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

PlanOutput plan_goals(const ScenarioConfig &cfg, const WorldPtr &world, bool with_references) {
  const TaskSpec &task = cfg.task;
  HybridAStar search(cfg.search, world);
  TrajOptimizer optimizer(cfg.optimizer, world);
  auto concat = std::make_shared<ConcatTrajectory>();
  PlanOutput out;
  out.ref_dt = cfg.ref_dt;

  SearchState state;
  state.mode = Mode::Terrestrial;
  state.p = Vec3(task.start.x(), task.start.y(), 0.0);
  state.phi = task.start_heading;
  state.speed = 0.0;
  state.v = state.velocity();

  for (std::size_t k = 0; k < task.goals.size(); ++k) {
    const GoalSpec &goal_spec = task.goals[k];
    SearchGoal goal;
    goal.p = Vec3(goal_spec.p.x(), goal_spec.p.y(), 0.0);
    goal.heading = goal_spec.heading;
    goal.speed = goal_spec.speed;

    LegResult leg;
    try {
      leg.search = search.search(state, goal);
    } catch (const NoPathError &e) {
      throw PlanningError("plan: leg " + std::to_string(k + 1) + ": " + e.what() + " after " +
                          std::to_string(e.explored()) + " expansions");
    }
    out.front_end_time += leg.search.wall_time;
    out.front_end_cpu += leg.search.cpu_time;

    if (leg.search.pieces() > 0) {
      PVA head = PVA::Zero(), tail = PVA::Zero();
      head.col(0) = state.p;
      head.col(1) = state.velocity();
      if (state.speed <= 0.0) head.col(2) = cfg.rest_acceleration * Vec3(std::cos(state.phi), std::sin(state.phi), 0.0);
      tail.col(0) = goal.p;
      tail.col(1) = leg.search.velocities.back();
      if (goal.speed <= 0.0 && goal.heading)
        tail.col(2) = -cfg.rest_acceleration * Vec3(std::cos(*goal.heading), std::sin(*goal.heading), 0.0);
      const OptimizerProblem prob = problem_from_search(leg.search, head, tail, cfg.piece_duration);
      leg.opt = optimizer.optimize(prob);
      out.back_end_time += leg.opt.wall_time;
      out.back_end_cpu += leg.opt.cpu_time;
      concat->append(std::make_shared<PlannedTrajectory>(leg.opt.traj, leg.opt.modes));
    }
    out.goal_times.push_back(concat->duration());
    out.legs.push_back(std::move(leg));

    state = SearchState{};
    state.mode = Mode::Terrestrial;
    state.p = goal.p;
    state.speed = goal.speed;
    state.phi = goal.heading.value_or(state.phi);
    if (!goal.heading && !out.legs.back().search.velocities.empty()) {
      const Vec3 v = out.legs.back().search.velocities.back();
      if (std::hypot(v.x(), v.y()) > 1e-3) state.phi = std::atan2(v.y(), v.x());
    }
    state.v = state.velocity();
  }
  if (concat->duration() <= 0.0) throw PlanningError("plan: the start already satisfies every goal");
  out.trajectory = concat;
  out.length = arc_length(*concat);
  if (with_references) {
    FlatnessConfig fc = cfg.flatness;
    fc.initial_heading = task.start_heading;
    out.refs = sample_references(*concat, cfg.ref_dt, cfg.physical, fc);
  }
  return out;
}

PlanOutput plan_scenario(const ScenarioConfig &cfg, const WorldPtr &world) {
  const TaskSpec &task = cfg.task;
  if (task.kind == TaskKind::Goals) return plan_goals(cfg, world, true);

  PlanOutput out;
  out.ref_dt = cfg.ref_dt;
  FlatnessConfig fc = cfg.flatness;
  if (task.kind == TaskKind::Lemniscate) {
    LemniscateParams lp = task.lemniscate;
    if (task.fit_rate) lp.rate = LemniscateTrajectory::fit_rate(lp, task.v_max, task.a_max);
    auto traj = std::make_shared<LemniscateTrajectory>(lp);
    fc.initial_heading = traj->initial_heading();
    out.trajectory = traj;
  } else {
    fc.initial_heading = task.start_heading;
    out.trajectory = std::make_shared<HoldTrajectory>(task.hold_position, task.hold_mode, task.hold_duration);
  }
  out.length = arc_length(*out.trajectory);
  out.refs = sample_references(*out.trajectory, cfg.ref_dt, cfg.physical, fc);
  return out;
}

RunResult track_plan(const ScenarioConfig &cfg, const PlanOutput &plan) {
  return run_closed_loop(plan.refs, plan.ref_dt, cfg.nmpc, cfg.indi, cfg.physical, cfg.sim);
}

namespace {

double yaw_of(const Quat &q) {
  const Vec3 x = q * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

}  // namespace

GoalCheck check_goals(const RunResult &run, const PlanOutput &plan, const TaskSpec &task, double pos_tol,
                      double heading_tol, double window) {
  GoalCheck out;
  out.success = !run.log.empty() && plan.goal_times.size() == task.goals.size();
  for (std::size_t k = 0; k < task.goals.size() && k < plan.goal_times.size(); ++k) {
    const GoalSpec &g = task.goals[k];
    const Vec3 gp(g.p.x(), g.p.y(), 0.0);
    double best = std::numeric_limits<double>::infinity(), heading = std::numeric_limits<double>::infinity();
    for (const LogRow &r : run.log) {
      if (std::abs(r.t - plan.goal_times[k]) > window) continue;
      const double d = (r.x.p - gp).norm();
      if (d < best) {
        best = d;
        heading = g.heading ? std::abs(wrap_angle(yaw_of(r.x.q) - *g.heading)) : 0.0;
      }
    }
    out.position_error.push_back(best);
    out.heading_error.push_back(heading);
    if (!(best <= pos_tol && heading <= heading_tol)) out.success = false;
  }
  return out;
}

double lateral_demand(const RunResult &run) {
  double worst = 0.0;
  for (const LogRow &r : run.log)
    if (r.mode == Mode::Terrestrial && r.mode_ref == Mode::Terrestrial)
      worst = std::max(worst, std::abs((r.x.q.conjugate() * r.ref.v).y()));
  return worst;
}

void parallel_for(int n, int jobs, const std::function<void(int)> &f) {
  jobs = std::clamp(jobs, 1, std::max(1, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) f(i);
    });
  for (auto &t : pool) t.join();
}

std::vector<std::string> benchmark_suites() {
  return {"forest-500", "goals-course", "lemniscate-2d", "lemniscate-3d", "indi-ab"};
}

namespace {

ScenarioConfig suite_config(const std::string &preset, const BenchmarkOptions &opts) {
  if (!opts.overrides) return preset_scenario(preset);
  Json j = *opts.overrides;
  if (!j.contains("preset")) j["preset"] = preset;
  return parse_scenario(j);
}

double mean(const std::vector<double> &v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pct(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::lround(p * static_cast<double>(v.size() - 1)))];
}

void write_file(const std::string &dir, const std::string &name, const std::string &content) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream(std::filesystem::path(dir) / name) << content;
}

void write_log(const std::string &dir, const std::string &name, const RunResult &run) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream os(std::filesystem::path(dir) / name);
  write_log_csv(os, run.log);
}

struct ForestRun {
  bool success = false;
  std::string reason;
  double length = 0.0, front_ms = 0.0, back_ms = 0.0, min_clearance = 0.0;
  double front_wall_ms = 0.0, back_wall_ms = 0.0;
  int aerial_pieces = 0;
  bool collision_free = false;
};

Json bench_forest(const BenchmarkOptions &opts, std::ostream &summary) {
  const int n = opts.seeds > 0 ? opts.seeds : 500;
  const ScenarioConfig base = suite_config("forest", opts);
  std::vector<ForestRun> runs(n);
  parallel_for(n, opts.jobs, [&](int i) {
    ForestRun &fr = runs[i];
    ScenarioConfig cfg = base;
    cfg.apply_seed(opts.base_seed + static_cast<std::uint64_t>(i));
    try {
      const WorldPtr world = build_world(cfg.world);
      const PlanOutput plan = plan_goals(cfg, world, false);
      // Stage timings in thread CPU time so that --jobs beyond the core count does not inflate them.
      fr.front_ms = 1e3 * plan.front_end_cpu;
      fr.back_ms = 1e3 * plan.back_end_cpu;
      fr.front_wall_ms = 1e3 * plan.front_end_time;
      fr.back_wall_ms = 1e3 * plan.back_end_time;
      fr.length = plan.length;
      TrajOptimizer opt(cfg.optimizer, world);
      double worst_clearance = 0.0;
      bool feasible = true;
      for (const auto &leg : plan.legs) {
        if (leg.search.pieces() == 0) continue;
        feasible = feasible && leg.opt.feasible();
        worst_clearance = std::max(worst_clearance, opt.audit(leg.opt.traj, leg.opt.modes, 64).clearance);
        for (Mode m : leg.opt.modes) fr.aerial_pieces += m == Mode::Aerial;
      }
      // audit reports d_s / distance; convert back to the smallest distance.
      fr.min_clearance = worst_clearance > 0.0 ? cfg.optimizer.d_s / worst_clearance
                                               : std::numeric_limits<double>::infinity();
      fr.collision_free = fr.min_clearance > 0.0 && std::isfinite(worst_clearance);
      fr.success = feasible;
      if (!feasible) fr.reason = "penalties above tolerance";
    } catch (const Error &e) {
      fr.reason = e.what();
    }
  });

  std::vector<double> len, front, back, front_wall, back_wall;
  int ok = 0, aerial = 0, collision_free = 0;
  std::vector<double> clearance;
  Json failures = Json::array();
  for (int i = 0; i < n; ++i) {
    const ForestRun &fr = runs[i];
    if (fr.front_ms > 0.0) {
      front.push_back(fr.front_ms);
      back.push_back(fr.back_ms);
      front_wall.push_back(fr.front_wall_ms);
      back_wall.push_back(fr.back_wall_ms);
    }
    if (fr.collision_free) ++collision_free;
    if (fr.front_ms > 0.0) clearance.push_back(fr.min_clearance);
    if (fr.success) {
      ++ok;
      len.push_back(fr.length);
      aerial += fr.aerial_pieces > 0;
    } else {
      failures.push_back(Json{{"seed", opts.base_seed + i}, {"reason", fr.reason}});
    }
  }
  const double rate = static_cast<double>(ok) / n;
  Json report{{"suite", "forest-500"},
              {"runs", n},
              {"success_rate", rate},
              {"mean_length", mean(len)},
              {"reference_length", 76.8},
              {"length_ratio", mean(len) / 76.8},
              {"runs_with_flight", aerial},
              {"collision_free", collision_free},
              {"min_clearance_p10", pct(clearance, 0.1)},
              {"front_end_ms", {{"mean", mean(front)}, {"p50", pct(front, 0.5)}, {"p90", pct(front, 0.9)}}},
              {"back_end_ms", {{"mean", mean(back)}, {"p50", pct(back, 0.5)}, {"p90", pct(back, 0.9)}}},
              {"front_end_wall_ms", {{"mean", mean(front_wall)}, {"p90", pct(front_wall, 0.9)}}},
              {"back_end_wall_ms", {{"mean", mean(back_wall)}, {"p90", pct(back_wall, 0.9)}}},
              {"reference_front_end_ms", 14.6},
              {"reference_back_end_ms", 70.8},
              {"failures", failures}};
  summary << std::fixed << std::setprecision(3) << "forest-500: " << ok << "/" << n << " succeeded (" << 100.0 * rate
          << "%), mean length " << mean(len) << " m (reference 76.8 m), front-end " << mean(front)
          << " ms, back-end " << mean(back) << " ms (thread CPU time)\n";
  return report;
}

Json run_json(const RunResult &run) {
  return to_json(run.metrics);
}

Json bench_goals(const BenchmarkOptions &opts, std::ostream &summary) {
  ScenarioConfig cfg = suite_config("goals-course", opts);
  cfg.apply_seed(opts.base_seed);
  const WorldPtr world = build_world(cfg.world);
  Json report{{"suite", "goals-course"}};
  for (int variant = 0; variant < 2; ++variant) {
    ScenarioConfig c = cfg;
    const std::string name = variant == 0 ? "nominal" : "no_nonholonomic";
    if (variant == 1) c.optimizer.lambda(3) = 0.0;
    Json entry;
    try {
      const PlanOutput plan = plan_goals(c, world, true);
      TrajOptimizer opt(c.optimizer, world);
      double heading_rate = 0.0;
      for (const auto &leg : plan.legs)
        if (leg.search.pieces() > 0)
          heading_rate = std::max(heading_rate, opt.audit(leg.opt.traj, leg.opt.modes, 64).heading_rate);
      entry["planned_length"] = plan.length;
      entry["planned_duration"] = plan.trajectory->duration();
      entry["heading_rate_ratio"] = heading_rate;
      RunResult run;
      bool diverged = false;
      try {
        run = track_plan(c, plan);
      } catch (const DivergenceError &e) {
        run = e.partial();
        diverged = true;
      }
      const GoalCheck gc = check_goals(run, plan, c.task);
      entry["diverged"] = diverged;
      entry["goals_reached"] = gc.success && !diverged;
      entry["goal_position_error"] = gc.position_error;
      entry["goal_heading_error"] = gc.heading_error;
      entry["lateral_demand"] = lateral_demand(run);
      entry["metrics"] = run_json(run);
      write_log(opts.out_dir, "goals_" + name + ".csv", run);
      summary << std::fixed << std::setprecision(3) << "goals-course " << name << ": goals reached "
              << (gc.success && !diverged ? "yes" : "no") << ", lateral demand " << lateral_demand(run)
              << " m/s, RMSE " << run.metrics.rmse << " m\n";
    } catch (const PlanningError &e) {
      entry["error"] = e.what();
      summary << "goals-course " << name << ": planning failed: " << e.what() << "\n";
    }
    report[name] = entry;
  }
  return report;
}

Json bench_lemniscate(const std::string &suite, const BenchmarkOptions &opts, std::ostream &summary) {
  ScenarioConfig cfg = suite_config(suite, opts);
  const int n = opts.seeds > 0 ? opts.seeds : 1;
  const WorldPtr world = build_world(cfg.world);
  std::vector<Json> entries(n);
  std::vector<double> rmse(n, std::numeric_limits<double>::infinity());
  PlanOutput plan = plan_scenario(cfg, world);
  double v_peak = 0.0, a_peak = 0.0;
  if (auto lem = std::dynamic_pointer_cast<const LemniscateTrajectory>(plan.trajectory)) lem->peaks(v_peak, a_peak);
  parallel_for(n, opts.jobs, [&](int i) {
    ScenarioConfig c = cfg;
    c.apply_seed(opts.base_seed + static_cast<std::uint64_t>(i));
    try {
      const RunResult run = track_plan(c, plan);
      rmse[i] = run.metrics.rmse;
      entries[i] = run_json(run);
      if (i == 0) write_log(opts.out_dir, suite + ".csv", run);
    } catch (const DivergenceError &e) {
      entries[i] = Json{{"error", e.what()}};
    }
  });
  Json report{{"suite", suite},
              {"reference_duration", plan.trajectory->duration()},
              {"reference_peak_speed", v_peak},
              {"reference_peak_acceleration", a_peak},
              {"rmse_mean", mean(rmse)},
              {"runs", entries}};
  summary << std::fixed << std::setprecision(4) << suite << ": RMSE " << mean(rmse) << " m over " << n
          << " run(s), peak speed " << v_peak << " m/s, peak acceleration " << a_peak << " m/s^2\n";
  return report;
}

Json bench_indi(const BenchmarkOptions &opts, std::ostream &summary) {
  const ScenarioConfig cfg = suite_config("indi-ab", opts);
  const int n = opts.seeds > 0 ? opts.seeds : 5;
  const WorldPtr world = build_world(cfg.world);
  const PlanOutput plan = plan_scenario(cfg, world);
  const Vec3 tau_e = cfg.sim.disturbance.torque;
  std::vector<double> on(n), off(n), est_err(n);
  parallel_for(n, opts.jobs, [&](int i) {
    ScenarioConfig c = cfg;
    c.apply_seed(opts.base_seed + static_cast<std::uint64_t>(i));
    c.indi.enabled = true;
    const RunResult a = track_plan(c, plan);
    c.indi.enabled = false;
    RunResult b;
    try {
      b = track_plan(c, plan);
    } catch (const DivergenceError &e) {
      b = e.partial();
    }
    on[i] = a.metrics.rmse;
    off[i] = b.metrics.rmse;
    // Averaged over the last two seconds to suppress gyro noise.
    Vec3 est = Vec3::Zero();
    int cnt = 0;
    for (const LogRow &r : a.log)
      if (r.t >= a.log.back().t - 2.0) {
        est += r.disturbance_hat;
        ++cnt;
      }
    est /= std::max(1, cnt);
    est_err[i] = tau_e.norm() > 0.0 ? (est - tau_e).norm() / tau_e.norm() : est.norm();
  });
  Json seeds = Json::array();
  double worst_ratio = 0.0, worst_est = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ratio = off[i] > 0.0 ? on[i] / off[i] : 0.0;
    worst_ratio = std::max(worst_ratio, ratio);
    worst_est = std::max(worst_est, est_err[i]);
    seeds.push_back(Json{{"seed", opts.base_seed + i},
                         {"rmse_indi", on[i]},
                         {"rmse_no_indi", off[i]},
                         {"ratio", ratio},
                         {"estimate_error", est_err[i]}});
  }
  summary << std::fixed << std::setprecision(4) << "indi-ab: mean RMSE with INDI " << mean(on) << " m, without "
          << mean(off) << " m, worst ratio " << worst_ratio << ", worst estimate error " << 100.0 * worst_est
          << "%\n";
  return Json{{"suite", "indi-ab"},
              {"disturbance", to_json(tau_e)},
              {"rmse_indi_mean", mean(on)},
              {"rmse_no_indi_mean", mean(off)},
              {"worst_ratio", worst_ratio},
              {"worst_estimate_error", worst_est},
              {"seeds", seeds}};
}

}  // namespace

Json run_benchmark(const BenchmarkOptions &opts, std::ostream &summary) {
  std::ostringstream text;
  Json report;
  if (opts.suite == "forest-500")
    report = bench_forest(opts, text);
  else if (opts.suite == "goals-course")
    report = bench_goals(opts, text);
  else if (opts.suite == "lemniscate-2d" || opts.suite == "lemniscate-3d")
    report = bench_lemniscate(opts.suite, opts, text);
  else if (opts.suite == "indi-ab")
    report = bench_indi(opts, text);
  else
    throw ConfigError("benchmark: unknown suite '" + opts.suite + "'");
  summary << text.str();
  write_file(opts.out_dir, "report.json", report.dump(2));
  write_file(opts.out_dir, "summary.txt", text.str());
  return report;
}

}  // namespace tabv
