#pragma once

#include "tabv/dynamics.hpp"
#include "tabv/flatness.hpp"
#include "tabv/indi.hpp"
#include "tabv/nmpc.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace tabv {

struct DisturbanceConfig {
  Vec3 torque = Vec3::Zero();      // body frame [N m]
  Vec3 force = Vec3::Zero();       // inertial frame [N]
  double start_time = 0.0;         // step onset [s]
};

struct SimConfig {
  double dt_sim = 1e-3;
  double dt_ctrl = 5e-3;
  double gyro_noise = 0.01;        // std of additive rate-gyro noise [rad/s]
  std::uint64_t seed = 0;
  double duration = 0.0;           // 0: length of the reference
  DisturbanceConfig disturbance;
  double touchdown_height = 0.01;
  double touchdown_vz = 0.5;       // max sink rate for a soft landing [m/s]
  double divergence_margin = 10.0;
  // Region the vehicle must stay near; defaults to the reference's bounding box.
  std::optional<Vec3> bounds_lower;
  std::optional<Vec3> bounds_upper;

  int ctrl_substeps() const;
  void validate() const;
};

// One row per control tick.
struct LogRow {
  double t = 0.0;
  FullState x;                     // true state at the tick
  FullState ref;
  Mode mode_ref = Mode::Aerial;
  Mode mode = Mode::Aerial;        // simulated contact mode
  ControlInput u_nmpc;
  Vec3 tau_cmd = Vec3::Zero();     // after INDI
  ControlInput u_applied;          // after rotor saturation
  Vec3 tau_hat = Vec3::Zero();
  Vec3 omega_dot_hat = Vec3::Zero();
  Vec3 disturbance_hat = Vec3::Zero();
  double normal_force = 0.0;
  double solve_time = 0.0;
  double kkt = 0.0;
  bool saturated = false;
  bool degraded = false;
};

struct RunMetrics {
  double rmse = 0.0;
  double max_error = 0.0;
  double rmse_terrestrial = 0.0;
  double rmse_aerial = 0.0;
  int mode_switches = 0;
  int hard_landings = 0;
  int degraded_solves = 0;
  double saturation_fraction = 0.0;
  double solve_p50 = 0.0;          // [s]
  double solve_p99 = 0.0;
  double max_lateral_velocity = 0.0;   // over simulated ground contact
  double transition_vz_peak = 0.0;     // max |v_z| within the transition window
  double max_position_step = 0.0;      // largest position change over one dt_sim
  double duration = 0.0;
  int samples = 0;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<LogRow> log;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string &what, RunResult partial) : Error(what), partial_(std::move(partial)) {}
  const RunResult &partial() const { return partial_; }

 private:
  RunResult partial_;
};

// Fixed-step closed loop: gyro sample -> NMPC -> INDI -> rotor saturation ->
// true dynamics at dt_sim with disturbances and liftoff/touchdown switching.
// refs is the reference table sampled every ref_dt.
RunResult run_closed_loop(const std::vector<ReferencePoint> &refs, double ref_dt, const NmpcConfig &nmpc,
                          const IndiConfig &indi, const PhysicalParams &params, const SimConfig &sim);

// Metrics recomputed from a log (the RMSE fields and the mode bookkeeping).
RunMetrics metrics_from_log(const std::vector<LogRow> &log, double transition_window = 0.2);

// sqrt(mean |a_i - b_i|^2).
double compute_rmse(const std::vector<Vec3> &actual, const std::vector<Vec3> &reference);

// Solver timing is left out so that identical runs give identical files.
void write_log_csv(std::ostream &os, const std::vector<LogRow> &log);

}  // namespace tabv
