#pragma once

#include "tabv/scenario.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tabv {

class PlanningError : public Error {
 public:
  using Error::Error;
};

// Trajectories played back to back; leg k starts when leg k-1 ends.
class ConcatTrajectory : public FlatTrajectory {
 public:
  void append(std::shared_ptr<const FlatTrajectory> leg);
  double duration() const override { return duration_; }
  FlatSample sample(double t) const override;
  const std::vector<double> &starts() const { return starts_; }

 private:
  std::vector<std::shared_ptr<const FlatTrajectory>> legs_;
  std::vector<double> starts_;
  double duration_ = 0.0;
};

// Groups search primitives into MINCO pieces of about piece_duration: long
// primitives are split at their time-uniform samples and short same-mode
// neighbors are merged.
OptimizerProblem problem_from_search(const SearchResult &search, const PVA &head, const PVA &tail,
                                     double piece_duration);

struct LegResult {
  SearchResult search;
  OptimizeResult opt;
};

struct PlanOutput {
  std::vector<LegResult> legs;
  std::shared_ptr<const FlatTrajectory> trajectory;
  std::vector<ReferencePoint> refs;
  double ref_dt = 5e-3;
  std::vector<double> goal_times;  // arrival time at each goal
  double front_end_time = 0.0;     // summed search wall time [s]
  double back_end_time = 0.0;      // summed optimizer wall time [s]
  double front_end_cpu = 0.0;      // the same in thread CPU time [s]
  double back_end_cpu = 0.0;
  double length = 0.0;             // arc length of the flat output [m]
};

// Search and optimization leg by leg through the goal list. Throws
// PlanningError when a leg has no path.
PlanOutput plan_goals(const ScenarioConfig &cfg, const WorldPtr &world, bool with_references = true);
// Any task kind: goals are planned, analytic tasks are sampled directly.
PlanOutput plan_scenario(const ScenarioConfig &cfg, const WorldPtr &world);

RunResult track_plan(const ScenarioConfig &cfg, const PlanOutput &plan);

double arc_length(const FlatTrajectory &traj, double dt = 1e-2);

struct GoalCheck {
  std::vector<double> position_error;
  std::vector<double> heading_error;
  bool success = false;
};

// Closest approach to each goal within +-window of its planned arrival time.
GoalCheck check_goals(const RunResult &run, const PlanOutput &plan, const TaskSpec &task, double pos_tol = 0.3,
                      double heading_tol = 0.3, double window = 1.5);

// Largest |(q^-1 v_ref) . e2| over samples in ground contact: reference velocity
// the vehicle would have to produce sideways.
double lateral_demand(const RunResult &run);

struct BenchmarkOptions {
  std::string suite;
  int seeds = 0;                   // 0: suite default
  std::uint64_t base_seed = 0;
  int jobs = 1;
  std::string out_dir;             // empty: no files
  std::optional<Json> overrides;   // scenario overrides applied on top of the suite preset
};

// Runs a suite and returns its JSON report; a human-readable summary goes to `summary`.
Json run_benchmark(const BenchmarkOptions &opts, std::ostream &summary);
std::vector<std::string> benchmark_suites();

// Runs f(i) for i in [0, n) on `jobs` worker threads.
void parallel_for(int n, int jobs, const std::function<void(int)> &f);

}  // namespace tabv
