#pragma once

#include "tabv/dynamics.hpp"
#include "tabv/flatness.hpp"

#include <Eigen/Core>

#include <vector>

namespace tabv {

using StateWeights = Eigen::Matrix<double, 13, 1>;
using InputWeights = Eigen::Matrix<double, 4, 1>;

struct NmpcConfig {
  int horizon = 20;
  double dt = 0.07;
  StateWeights w_x = default_state_weights();
  InputWeights w_u = InputWeights(0.5, 0.1, 0.1, 0.2);
  double mode_weight = 1e4;        // penalty on lateral velocity and height at ground nodes
  int sqp_iterations = 1;
  double regularization = 1e-6;
  int qp_max_iterations = 50;
  double qp_tolerance = 1e-9;

  static StateWeights default_state_weights();
  void validate() const;
};

using InputSequence = std::vector<ControlInput>;

struct OcpSolution {
  InputSequence inputs;              // N inputs
  std::vector<FullState> rollout;    // N+1 states from the nonlinear model
  double kkt = 0.0;                  // Gauss-Newton step and defect at the iterate the solve started from
  double cost = 0.0;
  double solve_time = 0.0;           // [s]
  int qp_iterations = 0;
  bool degraded = false;
};

// Reference window entry: node i sits at t0 + i * dt.
struct WindowNode {
  FullState x;
  ControlInput u;
  Mode mode = Mode::Aerial;
};

// Gauss-Newton real-time-iteration NMPC over RK4 multiple shooting with a
// condensed box-constrained QP.
class NmpcController {
 public:
  NmpcController(const NmpcConfig &config, const PhysicalParams &params);

  const NmpcConfig &config() const { return config_; }
  const InputBounds &bounds() const { return bounds_; }

  // Solves the OCP for a window of N+1 nodes, warm-started from the stored
  // guess (shifted by `shift` seconds since the previous solve).
  OcpSolution solve(const FullState &x0, const std::vector<WindowNode> &window, double shift = 0.0);

  // Builds the N+1 window at time t from a reference table sampled every
  // table_dt (holding the last entry past the end) and returns the first input.
  ControlInput step(const FullState &x0, const std::vector<ReferencePoint> &table, double table_dt, double t,
                    OcpSolution *solution = nullptr);

  std::vector<WindowNode> window_at(const std::vector<ReferencePoint> &table, double table_dt, double t) const;

  void reset();

  // Discrete model used for prediction: one RK4 step of length dt.
  StateVector predict(const StateVector &x, const InputVector &u, Mode mode) const;

 private:
  void warm_start(const FullState &x0, const std::vector<WindowNode> &window, double shift);

  NmpcConfig config_;
  PhysicalParams params_;
  InputBounds bounds_;
  bool has_guess_ = false;
  double last_time_ = 0.0;
  std::vector<StateVector> xs_;   // N+1
  std::vector<InputVector> us_;   // N
};

// Component-wise state error with the reference quaternion sign-aligned to x.
StateVector state_error(const StateVector &x, const StateVector &x_ref);

}  // namespace tabv
