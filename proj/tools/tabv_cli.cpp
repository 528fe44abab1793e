#include "tabv/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace tabv;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kPlanning = 2, kDivergence = 3, kConfig = 4 };

struct Options {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  std::string suite;
  int seeds = 0;
  std::string references;
};

ScenarioConfig scenario_from(const Options &o) {
  ScenarioConfig cfg;
  if (o.config.empty()) throw ConfigError("config: --config is required");
  if (fs::exists(o.config))
    cfg = load_scenario(o.config);
  else
    cfg = preset_scenario(o.config);
  if (o.seed_given) cfg.apply_seed(o.seed);
  return cfg;
}

void snapshot(const Options &o, const ScenarioConfig &cfg) {
  fs::create_directories(o.out);
  Json snap{{"scenario", cfg.source.is_null() ? Json{{"preset", cfg.name}} : cfg.source}, {"seed", cfg.sim.seed}};
  std::ofstream(fs::path(o.out) / "config.json") << snap.dump(2) << "\n";
}

void write_plan(const Options &o, const PlanOutput &plan) {
  Json legs = Json::array(), costs = Json::array(), search = Json::array();
  for (const auto &leg : plan.legs) {
    search.push_back(to_json(leg.search));
    if (leg.search.pieces() == 0) continue;
    legs.push_back(trajectory_json(leg.opt.traj, leg.opt.modes));
    costs.push_back(cost_log_json(leg.opt));
  }
  std::ofstream(fs::path(o.out) / "trajectory.json")
      << Json{{"legs", legs}, {"goal_times", plan.goal_times}, {"length", plan.length}}.dump(2) << "\n";
  std::ofstream(fs::path(o.out) / "search.json") << search.dump(2) << "\n";
  std::ofstream(fs::path(o.out) / "cost_log.json") << costs.dump(2) << "\n";
  std::ofstream(fs::path(o.out) / "timing.json")
      << Json{{"front_end_ms", 1e3 * plan.front_end_time},
              {"back_end_ms", 1e3 * plan.back_end_time},
              {"front_end_cpu_ms", 1e3 * plan.front_end_cpu},
              {"back_end_cpu_ms", 1e3 * plan.back_end_cpu}}
             .dump(2)
      << "\n";
  std::ofstream refs(fs::path(o.out) / "references.csv");
  write_references_csv(refs, plan.refs);
}

int cmd_plan(const Options &o) {
  const ScenarioConfig cfg = scenario_from(o);
  snapshot(o, cfg);
  const WorldPtr world = build_world(cfg.world);
  const PlanOutput plan = plan_scenario(cfg, world);
  write_plan(o, plan);
  std::cout << "planned " << plan.trajectory->duration() << " s, " << plan.length << " m, front-end "
            << 1e3 * plan.front_end_time << " ms, back-end " << 1e3 * plan.back_end_time << " ms -> " << o.out
            << "\n";
  return kOk;
}

int cmd_track(const Options &o) {
  const ScenarioConfig cfg = scenario_from(o);
  snapshot(o, cfg);
  PlanOutput plan;
  if (!o.references.empty()) {
    std::ifstream in(o.references);
    if (!in) throw ConfigError("config: cannot open references " + o.references);
    plan.refs = read_references_csv(in);
    if (plan.refs.size() < 2) throw ConfigError("config: reference file needs at least two rows");
    plan.ref_dt = plan.refs[1].t - plan.refs[0].t;
  } else {
    plan = plan_scenario(cfg, build_world(cfg.world));
    write_plan(o, plan);
  }
  int code = kOk;
  RunResult run;
  try {
    run = track_plan(cfg, plan);
  } catch (const DivergenceError &e) {
    std::cerr << e.what() << "\n";
    run = e.partial();
    code = kDivergence;
  }
  std::ofstream log(fs::path(o.out) / "log.csv");
  write_log_csv(log, run.log);
  Json metrics = to_json(run.metrics);
  metrics["diverged"] = code == kDivergence;
  std::ofstream(fs::path(o.out) / "metrics.json") << metrics.dump(2) << "\n";
  std::cout << "RMSE " << run.metrics.rmse << " m, max error " << run.metrics.max_error << " m, saturation "
            << 100.0 * run.metrics.saturation_fraction << "% -> " << o.out << "\n";
  return code;
}

int cmd_benchmark(const Options &o) {
  BenchmarkOptions b;
  b.suite = o.suite;
  b.seeds = o.seeds;
  b.base_seed = o.seed;
  b.jobs = o.jobs;
  b.out_dir = o.out;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("config: cannot open " + o.config);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error &e) {
      throw ConfigError(std::string("config: malformed JSON in ") + o.config + ": " + e.what());
    }
    JsonReader r(j, "");
    if (b.suite.empty()) r.get("suite", b.suite);
    else if (r.has("suite")) r.raw("suite");
    int seeds = 0;
    r.get("seeds", seeds);
    if (b.seeds == 0) b.seeds = seeds;
    if (r.has("scenario")) b.overrides = r.raw("scenario");
    r.finish();
  }
  if (b.suite.empty()) throw ConfigError("config: a suite is required (--suite or \"suite\" in the config)");
  run_benchmark(b, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Planning and control for a wheeled bimodal quadrotor"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", o.config, "Scenario JSON file or preset name");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Run seed")->each([&](const std::string &) { o.seed_given = true; });
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App *plan = app.add_subcommand("plan", "Search and optimize a trajectory");
  common(plan);
  CLI::App *track = app.add_subcommand("track", "Plan, then track the reference in closed loop");
  common(track);
  track->add_option("--references", o.references, "Track this reference CSV instead of planning");
  CLI::App *bench = app.add_subcommand("benchmark", "Run a benchmark suite");
  common(bench);
  bench->add_option("--suite", o.suite, "forest-500, goals-course, lemniscate-2d, lemniscate-3d or indi-ab");
  bench->add_option("--seeds", o.seeds, "Number of seeds (suite default when 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }
  try {
    if (*plan) return cmd_plan(o);
    if (*track) return cmd_track(o);
    return cmd_benchmark(o);
  } catch (const ConfigError &e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const PlanningError &e) {
    std::cerr << e.what() << "\n";
    return kPlanning;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}
