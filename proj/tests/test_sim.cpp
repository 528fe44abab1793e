#include "tabv/pipeline.hpp"
#include "tabv/sim.hpp"
#include "tabv/trajectories.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace tabv;

namespace {

const PhysicalParams kParams;

std::vector<ReferencePoint> hover_table(double duration) {
  return sample_references(HoldTrajectory(Vec3(0, 0, 1), Mode::Aerial, duration), 5e-3, kParams, FlatnessConfig{});
}

}  // namespace

TEST(Rmse, Examples) {
  const std::vector<Vec3> a{Vec3(1, 2, 3), Vec3(0, 0, 0)};
  EXPECT_EQ(compute_rmse(a, a), 0.0);
  const std::vector<Vec3> b{Vec3(1.1, 2, 3), Vec3(0, 0.1, 0)};
  EXPECT_NEAR(compute_rmse(b, a), 0.1, 1e-12);
  const std::vector<Vec3> c{Vec3(0.3, 0, 0), Vec3(0, 0.4, 0)}, z{Vec3::Zero(), Vec3::Zero()};
  EXPECT_NEAR(compute_rmse(c, z), std::sqrt(0.125), 1e-12);
  EXPECT_NEAR(compute_rmse(c, z), 0.3536, 5e-5);
  EXPECT_THROW(compute_rmse(a, {Vec3::Zero()}), Error);
}

TEST(ClosedLoop, HoverHolds) {
  const RunResult r = run_closed_loop(hover_table(3.0), 5e-3, NmpcConfig{}, IndiConfig{}, kParams, SimConfig{});
  EXPECT_LE(r.metrics.rmse, 1e-3);
  EXPECT_EQ(r.metrics.mode_switches, 0);
}

TEST(ClosedLoop, BitIdenticalLogs) {
  SimConfig sim;
  sim.seed = 42;
  sim.disturbance.torque = Vec3(0.02, 0, 0);
  const auto refs = hover_table(1.0);
  const RunResult a = run_closed_loop(refs, 5e-3, NmpcConfig{}, IndiConfig{}, kParams, sim);
  const RunResult b = run_closed_loop(refs, 5e-3, NmpcConfig{}, IndiConfig{}, kParams, sim);
  std::stringstream sa, sb;
  write_log_csv(sa, a.log);
  write_log_csv(sb, b.log);
  EXPECT_EQ(sa.str(), sb.str());
  sim.seed = 43;
  const RunResult c = run_closed_loop(refs, 5e-3, NmpcConfig{}, IndiConfig{}, kParams, sim);
  std::stringstream sc;
  write_log_csv(sc, c.log);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(ClosedLoop, IndiReducesDisturbanceError) {
  SimConfig sim;
  sim.disturbance.torque = Vec3(0.05, 0, 0);
  const auto refs = hover_table(4.0);
  IndiConfig on, off;
  off.enabled = false;
  const double e_on = run_closed_loop(refs, 5e-3, NmpcConfig{}, on, kParams, sim).metrics.rmse;
  const double e_off = run_closed_loop(refs, 5e-3, NmpcConfig{}, off, kParams, sim).metrics.rmse;
  EXPECT_LT(e_on, e_off);
}

TEST(ClosedLoop, GroundTrackingKeepsContactConstraints) {
  ScenarioConfig cfg = preset_scenario("lemniscate-2d");
  cfg.task.lemniscate.laps = 0.5;
  const PlanOutput plan = plan_scenario(cfg, build_world(cfg.world));
  const RunResult r = track_plan(cfg, plan);
  for (const auto &row : r.log) {
    if (row.mode != Mode::Terrestrial) continue;
    EXPECT_LE(std::abs(row.x.p.z()), 5e-3);
    EXPECT_LE(std::abs(lateral_velocity(row.x)), 0.02);
  }
}

TEST(ClosedLoop, ModeBookkeeping) {
  const ScenarioConfig cfg = preset_scenario("lemniscate-3d");
  const PlanOutput plan = plan_scenario(cfg, build_world(cfg.world));
  const RunResult r = track_plan(cfg, plan);
  EXPECT_GE(r.metrics.mode_switches, 2);
  EXPECT_EQ(r.metrics.hard_landings, 0);
  // Disagreement between simulated contact and commanded mode comes in short bursts.
  double start = -1.0, longest = 0.0;
  for (const auto &row : r.log) {
    if (row.mode != row.mode_ref) {
      if (start < 0.0) start = row.t;
      longest = std::max(longest, row.t - start);
    } else {
      start = -1.0;
    }
  }
  EXPECT_LE(longest, 0.3);
}

TEST(SimConfig, Validation) {
  SimConfig sim;
  sim.dt_ctrl = 3.3e-3;
  EXPECT_THROW(sim.validate(), ConfigError);
}
