#pragma once

#include "tabv/common.hpp"

#include <Eigen/Core>

#include <vector>

namespace tabv {

// Square banded matrix with in-place LU (no pivoting). Row ordering of the
// MINCO system keeps the diagonal nonzero.
class BandedSystem {
 public:
  BandedSystem() = default;
  BandedSystem(int n, int lower, int upper);

  double &operator()(int i, int j) { return data_[(i - j + upper_) * n_ + j]; }
  double operator()(int i, int j) const { return data_[(i - j + upper_) * n_ + j]; }

  void factorize_lu();
  // Solves A x = b in place (after factorize_lu).
  void solve(Eigen::MatrixX3d &b) const;
  // Solves A^T x = b in place (after factorize_lu).
  void solve_adjoint(Eigen::MatrixX3d &b) const;

 private:
  int n_ = 0, lower_ = 0, upper_ = 0;
  std::vector<double> data_;
};

// Boundary state as columns (p, v, a).
using PVA = Eigen::Matrix3d;

// Minimum-jerk piecewise quintic through fixed interior waypoints with full
// (p, v, a) boundary conditions. Coefficients of piece i occupy rows
// 6i..6i+5 in ascending powers of the local time.
class MincoTrajectory {
 public:
  MincoTrajectory() = default;

  // points: 3 x (M-1) interior waypoints; durations: M positive values.
  void generate(const PVA &head, const PVA &tail, const Eigen::Matrix3Xd &points,
                const Eigen::VectorXd &durations);

  int pieces() const { return static_cast<int>(durations_.size()); }
  double duration() const { return durations_.sum(); }
  const Eigen::VectorXd &durations() const { return durations_; }
  const Eigen::Matrix3Xd &points() const { return points_; }
  const Eigen::MatrixX3d &coeffs() const { return coeffs_; }
  const PVA &head() const { return head_; }
  const PVA &tail() const { return tail_; }

  // Piece index and local time for global t (clamped to [0, duration]).
  int locate(double t, double &local, bool *clamped = nullptr) const;
  Vec3 eval_piece(int piece, double local, int order) const;
  Vec3 eval(double t, int order, bool *clamped = nullptr) const;

  // Integral of squared jerk over the whole trajectory.
  double jerk_energy() const;
  // Gradient of the jerk energy with respect to the coefficients (direct part).
  Eigen::MatrixX3d jerk_energy_grad_coeffs() const;
  Eigen::VectorXd jerk_energy_grad_durations() const;

  // Pulls dJ/dc back through c = M(q, T): returns dJ/dq (3 x (M-1)) and
  // dJ/dT including the supplied direct partial.
  void propagate_gradient(const Eigen::MatrixX3d &grad_coeffs, const Eigen::VectorXd &grad_durations_direct,
                          Eigen::Matrix3Xd &grad_points, Eigen::VectorXd &grad_durations) const;

 private:
  PVA head_ = PVA::Zero(), tail_ = PVA::Zero();
  Eigen::Matrix3Xd points_;
  Eigen::VectorXd durations_;
  Eigen::MatrixX3d coeffs_;
  BandedSystem system_;
};

// Row vector of d^order/dt^order [1, t, ..., t^5].
Eigen::Matrix<double, 1, 6> poly_basis(double t, int order);

}  // namespace tabv
