#pragma once

#include "tabv/common.hpp"
#include "tabv/lbfgs.hpp"
#include "tabv/minco.hpp"
#include "tabv/world.hpp"

#include <string>
#include <vector>

namespace tabv {

struct OptimizerConfig {
  Vec4 lambda = Vec4(5.0, 6.0, 100.0, 5.0);  // weights of J_t, J_s, J_c, J_n
  double v_max = 2.0;
  double a_max = 2.0;
  double omega_max = 1.5;    // heading rate limit on the ground [rad/s]
  double alpha_max = 3.0;    // heading acceleration limit on the ground [rad/s^2]
  double d_s = 0.5;          // safety distance [m]
  int kappa = 8;             // constraint points per piece
  double smooth_eps = 1e-2;  // width of the C2 smoothing of max(x, 0)
  double heading_delta = 1e-3;
  double audit_heading_speed = 0.1;  // heading limits are audited only above this ground speed
  // Penalty continuation: while a penalty stays above feasibility_tol after a
  // solve, its weight grows by penalty_growth and the solve resumes.
  int penalty_rounds = 4;
  double penalty_growth = 10.0;
  double feasibility_tol = 1e-3;
  LbfgsParams solver;

  void validate() const;
};

// Smoothed max(x, 0): zero below 0, x - eps/2 above eps, C2 quartic blend in between.
double smoothed_l1(double x, double eps, double &grad);

struct ConstraintPoint {
  int piece = 0;
  double frac = 0.0;  // sample time / piece duration
  Mode mode = Mode::Aerial;
  Vec3 p = Vec3::Zero(), v = Vec3::Zero(), a = Vec3::Zero(), j = Vec3::Zero();
};

struct PointGradient {
  Vec3 p = Vec3::Zero(), v = Vec3::Zero(), a = Vec3::Zero(), j = Vec3::Zero();
};

// kappa samples per piece at (j/kappa) T_i, j = 0..kappa-1. Terrestrial
// samples have their vertical components zeroed.
std::vector<ConstraintPoint> constraint_points(const MincoTrajectory &traj, const std::vector<Mode> &modes,
                                               int kappa);

double cost_total_time(const Eigen::VectorXd &durations, Eigen::VectorXd *grad = nullptr);

// Each cost adds its per-point partials into grads (sized like points) when given.
double cost_state_limits(const std::vector<ConstraintPoint> &points, double v_max, double a_max, double eps,
                         std::vector<PointGradient> *grads = nullptr);
double cost_collision(const std::vector<ConstraintPoint> &points, const World &world, double d_s, double eps,
                      std::vector<PointGradient> *grads = nullptr);
double cost_nonholonomic(const std::vector<ConstraintPoint> &points, double omega_max, double alpha_max,
                         double delta, double eps, std::vector<PointGradient> *grads = nullptr);

// Heading rate and acceleration of the horizontal velocity direction.
void heading_derivatives(const Vec3 &v, const Vec3 &a, const Vec3 &j, double delta, double &rate, double &accel);

struct CostBreakdown {
  double time = 0.0, state = 0.0, collision = 0.0, nonholonomic = 0.0, total = 0.0;
};

struct IterationLog {
  int iteration = 0;
  CostBreakdown cost;
};

// Initial guess plus fixed data of one solve.
struct OptimizerProblem {
  PVA head = PVA::Zero();
  PVA tail = PVA::Zero();
  Eigen::Matrix3Xd points;        // 3 x (M-1)
  Eigen::VectorXd durations;      // M
  std::vector<Mode> modes;        // M
};

struct OptimizeResult {
  MincoTrajectory traj;
  std::vector<Mode> modes;
  CostBreakdown cost;
  LbfgsResult solver;
  double wall_time = 0.0;
  double cpu_time = 0.0;
  std::vector<IterationLog> log;
  std::string warning;
  // All unweighted penalties at or below the threshold.
  bool feasible(double threshold = 1e-3) const {
    return cost.state <= threshold && cost.collision <= threshold && cost.nonholonomic <= threshold;
  }
};

// Worst limit ratios on a dense re-sampling (value / limit, clearance as
// d_s / distance); 1.0 means exactly at the limit.
struct LimitAudit {
  double velocity = 0.0, acceleration = 0.0, heading_rate = 0.0, heading_accel = 0.0, clearance = 0.0;
  double worst() const;
};

class TrajOptimizer {
 public:
  TrajOptimizer(const OptimizerConfig &config, WorldPtr world);

  const OptimizerConfig &config() const { return config_; }

  // Minimizes lambda . [J_t, J_s, J_c, J_n] over free waypoint coordinates and
  // log-durations. Waypoints next to a terrestrial piece keep z = 0.
  OptimizeResult optimize(const OptimizerProblem &problem) const;

  // Variable layout helpers, public for gradient checks.
  Eigen::VectorXd pack(const OptimizerProblem &problem) const;
  void unpack(const OptimizerProblem &problem, const Eigen::VectorXd &x, Eigen::Matrix3Xd &points,
              Eigen::VectorXd &durations) const;
  double evaluate(const OptimizerProblem &problem, const Eigen::VectorXd &x, Eigen::VectorXd &grad,
                  CostBreakdown *parts = nullptr) const;

  CostBreakdown costs(const MincoTrajectory &traj, const std::vector<Mode> &modes) const;
  LimitAudit audit(const MincoTrajectory &traj, const std::vector<Mode> &modes, int samples_per_piece) const;

 private:
  double evaluate_weighted(const OptimizerProblem &problem, const Eigen::VectorXd &x, Eigen::VectorXd &grad,
                           CostBreakdown *parts, const Vec4 &w) const;

  OptimizerConfig config_;
  WorldPtr world_;
};

}  // namespace tabv
