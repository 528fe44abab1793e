#include "tabv/minco.hpp"

#include <algorithm>
#include <cmath>

namespace tabv {

BandedSystem::BandedSystem(int n, int lower, int upper)
    : n_(n), lower_(lower), upper_(upper), data_(static_cast<std::size_t>(n) * (lower + upper + 1), 0.0) {}

void BandedSystem::factorize_lu() {
  for (int k = 0; k + 1 < n_; ++k) {
    const int i_max = std::min(k + lower_, n_ - 1);
    const double pivot = (*this)(k, k);
    for (int i = k + 1; i <= i_max; ++i) (*this)(i, k) /= pivot;
    const int j_max = std::min(k + upper_, n_ - 1);
    for (int j = k + 1; j <= j_max; ++j) {
      const double akj = (*this)(k, j);
      if (akj == 0.0) continue;
      for (int i = k + 1; i <= i_max; ++i) (*this)(i, j) -= (*this)(i, k) * akj;
    }
  }
}

void BandedSystem::solve(Eigen::MatrixX3d &b) const {
  for (int j = 0; j < n_; ++j) {
    const int i_max = std::min(j + lower_, n_ - 1);
    for (int i = j + 1; i <= i_max; ++i)
      if ((*this)(i, j) != 0.0) b.row(i) -= (*this)(i, j) * b.row(j);
  }
  for (int j = n_ - 1; j >= 0; --j) {
    b.row(j) /= (*this)(j, j);
    const int i_min = std::max(0, j - upper_);
    for (int i = i_min; i < j; ++i)
      if ((*this)(i, j) != 0.0) b.row(i) -= (*this)(i, j) * b.row(j);
  }
}

void BandedSystem::solve_adjoint(Eigen::MatrixX3d &b) const {
  for (int j = 0; j < n_; ++j) {
    b.row(j) /= (*this)(j, j);
    const int i_max = std::min(j + upper_, n_ - 1);
    for (int i = j + 1; i <= i_max; ++i)
      if ((*this)(j, i) != 0.0) b.row(i) -= (*this)(j, i) * b.row(j);
  }
  for (int j = n_ - 1; j >= 0; --j) {
    const int i_min = std::max(0, j - lower_);
    for (int i = i_min; i < j; ++i)
      if ((*this)(j, i) != 0.0) b.row(i) -= (*this)(j, i) * b.row(j);
  }
}

Eigen::Matrix<double, 1, 6> poly_basis(double t, int order) {
  Eigen::Matrix<double, 1, 6> row = Eigen::Matrix<double, 1, 6>::Zero();
  for (int k = order; k < 6; ++k) {
    double coef = 1.0;
    for (int m = 0; m < order; ++m) coef *= (k - m);
    row(k) = coef * std::pow(t, k - order);
  }
  return row;
}

void MincoTrajectory::generate(const PVA &head, const PVA &tail, const Eigen::Matrix3Xd &points,
                               const Eigen::VectorXd &durations) {
  const int M = static_cast<int>(durations.size());
  if (M < 1) throw Error("minco: need at least one piece");
  if (points.cols() != M - 1) throw Error("minco: expected M-1 interior waypoints");
  for (int i = 0; i < M; ++i)
    if (!(durations(i) > 0.0)) throw Error("minco: piece durations must be positive");

  head_ = head;
  tail_ = tail;
  points_ = points;
  durations_ = durations;

  const Eigen::VectorXd T1 = durations;
  const Eigen::VectorXd T2 = T1.cwiseProduct(T1);
  const Eigen::VectorXd T3 = T2.cwiseProduct(T1);
  const Eigen::VectorXd T4 = T2.cwiseProduct(T2);
  const Eigen::VectorXd T5 = T4.cwiseProduct(T1);

  system_ = BandedSystem(6 * M, 6, 6);
  BandedSystem &A = system_;
  Eigen::MatrixX3d b = Eigen::MatrixX3d::Zero(6 * M, 3);

  A(0, 0) = 1.0;
  A(1, 1) = 1.0;
  A(2, 2) = 2.0;
  b.row(0) = head.col(0).transpose();
  b.row(1) = head.col(1).transpose();
  b.row(2) = head.col(2).transpose();

  for (int i = 0; i + 1 < M; ++i) {
    const int r = 6 * i;
    // jerk and snap continuity
    A(r + 3, r + 3) = 6.0;
    A(r + 3, r + 4) = 24.0 * T1(i);
    A(r + 3, r + 5) = 60.0 * T2(i);
    A(r + 3, r + 9) = -6.0;
    A(r + 4, r + 4) = 24.0;
    A(r + 4, r + 5) = 120.0 * T1(i);
    A(r + 4, r + 10) = -24.0;
    // waypoint interpolation
    A(r + 5, r) = 1.0;
    A(r + 5, r + 1) = T1(i);
    A(r + 5, r + 2) = T2(i);
    A(r + 5, r + 3) = T3(i);
    A(r + 5, r + 4) = T4(i);
    A(r + 5, r + 5) = T5(i);
    // position, velocity, acceleration continuity
    A(r + 6, r) = 1.0;
    A(r + 6, r + 1) = T1(i);
    A(r + 6, r + 2) = T2(i);
    A(r + 6, r + 3) = T3(i);
    A(r + 6, r + 4) = T4(i);
    A(r + 6, r + 5) = T5(i);
    A(r + 6, r + 6) = -1.0;
    A(r + 7, r + 1) = 1.0;
    A(r + 7, r + 2) = 2.0 * T1(i);
    A(r + 7, r + 3) = 3.0 * T2(i);
    A(r + 7, r + 4) = 4.0 * T3(i);
    A(r + 7, r + 5) = 5.0 * T4(i);
    A(r + 7, r + 7) = -1.0;
    A(r + 8, r + 2) = 2.0;
    A(r + 8, r + 3) = 6.0 * T1(i);
    A(r + 8, r + 4) = 12.0 * T2(i);
    A(r + 8, r + 5) = 20.0 * T3(i);
    A(r + 8, r + 8) = -2.0;
    b.row(r + 5) = points.col(i).transpose();
  }

  const int r = 6 * M - 6, l = M - 1;
  A(r + 3, r) = 1.0;
  A(r + 3, r + 1) = T1(l);
  A(r + 3, r + 2) = T2(l);
  A(r + 3, r + 3) = T3(l);
  A(r + 3, r + 4) = T4(l);
  A(r + 3, r + 5) = T5(l);
  A(r + 4, r + 1) = 1.0;
  A(r + 4, r + 2) = 2.0 * T1(l);
  A(r + 4, r + 3) = 3.0 * T2(l);
  A(r + 4, r + 4) = 4.0 * T3(l);
  A(r + 4, r + 5) = 5.0 * T4(l);
  A(r + 5, r + 2) = 2.0;
  A(r + 5, r + 3) = 6.0 * T1(l);
  A(r + 5, r + 4) = 12.0 * T2(l);
  A(r + 5, r + 5) = 20.0 * T3(l);
  b.row(r + 3) = tail.col(0).transpose();
  b.row(r + 4) = tail.col(1).transpose();
  b.row(r + 5) = tail.col(2).transpose();

  A.factorize_lu();
  A.solve(b);
  coeffs_ = b;
}

int MincoTrajectory::locate(double t, double &local, bool *clamped) const {
  const int M = pieces();
  bool out = false;
  if (t < 0.0) {
    t = 0.0;
    out = true;
  }
  int i = 0;
  while (i < M - 1 && t >= durations_(i)) {
    t -= durations_(i);
    ++i;
  }
  if (t > durations_(i)) {
    out = out || t > durations_(i) + 1e-12;
    t = durations_(i);
  }
  local = t;
  if (clamped) *clamped = out;
  return i;
}

Vec3 MincoTrajectory::eval_piece(int piece, double local, int order) const {
  if (order > 5) return Vec3::Zero();
  return (poly_basis(local, order) * coeffs_.block<6, 3>(6 * piece, 0)).transpose();
}

Vec3 MincoTrajectory::eval(double t, int order, bool *clamped) const {
  double local = 0.0;
  const int i = locate(t, local, clamped);
  return eval_piece(i, local, order);
}

double MincoTrajectory::jerk_energy() const {
  double e = 0.0;
  for (int i = 0; i < pieces(); ++i) {
    const auto c = coeffs_.block<6, 3>(6 * i, 0);
    const double T1 = durations_(i), T2 = T1 * T1, T3 = T2 * T1, T4 = T2 * T2, T5 = T4 * T1;
    e += 36.0 * c.row(3).squaredNorm() * T1 + 144.0 * c.row(4).dot(c.row(3)) * T2 +
         192.0 * c.row(4).squaredNorm() * T3 + 240.0 * c.row(5).dot(c.row(3)) * T3 +
         720.0 * c.row(5).dot(c.row(4)) * T4 + 720.0 * c.row(5).squaredNorm() * T5;
  }
  return e;
}

Eigen::MatrixX3d MincoTrajectory::jerk_energy_grad_coeffs() const {
  Eigen::MatrixX3d g = Eigen::MatrixX3d::Zero(6 * pieces(), 3);
  for (int i = 0; i < pieces(); ++i) {
    const auto c = coeffs_.block<6, 3>(6 * i, 0);
    const double T1 = durations_(i), T2 = T1 * T1, T3 = T2 * T1, T4 = T2 * T2, T5 = T4 * T1;
    g.row(6 * i + 3) = 72.0 * c.row(3) * T1 + 144.0 * c.row(4) * T2 + 240.0 * c.row(5) * T3;
    g.row(6 * i + 4) = 144.0 * c.row(3) * T2 + 384.0 * c.row(4) * T3 + 720.0 * c.row(5) * T4;
    g.row(6 * i + 5) = 240.0 * c.row(3) * T3 + 720.0 * c.row(4) * T4 + 1440.0 * c.row(5) * T5;
  }
  return g;
}

Eigen::VectorXd MincoTrajectory::jerk_energy_grad_durations() const {
  Eigen::VectorXd g(pieces());
  for (int i = 0; i < pieces(); ++i) {
    const auto c = coeffs_.block<6, 3>(6 * i, 0);
    const double T1 = durations_(i), T2 = T1 * T1, T3 = T2 * T1, T4 = T2 * T2;
    g(i) = 36.0 * c.row(3).squaredNorm() + 288.0 * c.row(4).dot(c.row(3)) * T1 +
           576.0 * c.row(4).squaredNorm() * T2 + 720.0 * c.row(5).dot(c.row(3)) * T2 +
           2880.0 * c.row(5).dot(c.row(4)) * T3 + 3600.0 * c.row(5).squaredNorm() * T4;
  }
  return g;
}

void MincoTrajectory::propagate_gradient(const Eigen::MatrixX3d &grad_coeffs,
                                         const Eigen::VectorXd &grad_durations_direct,
                                         Eigen::Matrix3Xd &grad_points, Eigen::VectorXd &grad_durations) const {
  const int M = pieces();
  Eigen::MatrixX3d adj = grad_coeffs;
  system_.solve_adjoint(adj);

  grad_points.resize(3, M - 1);
  for (int i = 0; i + 1 < M; ++i) grad_points.col(i) = adj.row(6 * i + 5).transpose();

  // dJ/dT_i = adj^T (-dA/dT_i c), evaluated row by row.
  const Eigen::MatrixX3d &b = coeffs_;
  grad_durations.resize(M);
  Eigen::Matrix<double, 6, 3> B1;
  for (int i = 0; i + 1 < M; ++i) {
    const int r = 6 * i;
    const double T1 = durations_(i), T2 = T1 * T1, T3 = T2 * T1, T4 = T2 * T2;
    const Eigen::RowVector3d vel = b.row(r + 1) + 2.0 * T1 * b.row(r + 2) + 3.0 * T2 * b.row(r + 3) +
                                   4.0 * T3 * b.row(r + 4) + 5.0 * T4 * b.row(r + 5);
    const Eigen::RowVector3d acc =
        2.0 * b.row(r + 2) + 6.0 * T1 * b.row(r + 3) + 12.0 * T2 * b.row(r + 4) + 20.0 * T3 * b.row(r + 5);
    const Eigen::RowVector3d jerk = 6.0 * b.row(r + 3) + 24.0 * T1 * b.row(r + 4) + 60.0 * T2 * b.row(r + 5);
    const Eigen::RowVector3d snap = 24.0 * b.row(r + 4) + 120.0 * T1 * b.row(r + 5);
    const Eigen::RowVector3d crackle = 120.0 * b.row(r + 5);
    B1.row(0) = -snap;
    B1.row(1) = -crackle;
    B1.row(2) = -vel;
    B1.row(3) = -vel;
    B1.row(4) = -acc;
    B1.row(5) = -jerk;
    grad_durations(i) = B1.cwiseProduct(adj.block<6, 3>(r + 3, 0)).sum();
  }
  {
    const int r = 6 * M - 6;
    const double T1 = durations_(M - 1), T2 = T1 * T1, T3 = T2 * T1, T4 = T2 * T2;
    Eigen::Matrix3d B2;
    B2.row(0) = -(b.row(r + 1) + 2.0 * T1 * b.row(r + 2) + 3.0 * T2 * b.row(r + 3) + 4.0 * T3 * b.row(r + 4) +
                  5.0 * T4 * b.row(r + 5));
    B2.row(1) = -(2.0 * b.row(r + 2) + 6.0 * T1 * b.row(r + 3) + 12.0 * T2 * b.row(r + 4) + 20.0 * T3 * b.row(r + 5));
    B2.row(2) = -(6.0 * b.row(r + 3) + 24.0 * T1 * b.row(r + 4) + 60.0 * T2 * b.row(r + 5));
    grad_durations(M - 1) = B2.cwiseProduct(adj.block<3, 3>(r + 3, 0)).sum();
  }
  grad_durations += grad_durations_direct;
}

}  // namespace tabv
