#include "tabv/nmpc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tabv {

StateWeights NmpcConfig::default_state_weights() {
  StateWeights w;
  w << 8000.0, 8000.0, 300.0,        // p
      400.0, 400.0, 400.0, 400.0,    // q
      100.0, 100.0, 100.0,           // v
      10.0, 10.0, 50.0;              // omega
  return w;
}

void NmpcConfig::validate() const {
  if (horizon < 1) throw ConfigError("nmpc: horizon must be at least 1");
  if (!(dt > 0.0)) throw ConfigError("nmpc: dt must be positive");
  if ((w_x.array() < 0.0).any() || (w_u.array() < 0.0).any()) throw ConfigError("nmpc: weights must be non-negative");
  if (!(mode_weight >= 0.0)) throw ConfigError("nmpc: mode_weight must be non-negative");
  if (sqp_iterations < 1) throw ConfigError("nmpc: sqp_iterations must be at least 1");
}

StateVector state_error(const StateVector &x, const StateVector &x_ref) {
  StateVector e = x - x_ref;
  if (x.segment<4>(3).dot(x_ref.segment<4>(3)) < 0.0) e.segment<4>(3) = x.segment<4>(3) + x_ref.segment<4>(3);
  return e;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Projected Newton for min 0.5 x'Hx + g'x subject to lb <= x <= ub.
bool box_qp(const Mat &H, const Vec &g, const Vec &lb, const Vec &ub, Vec &x, int max_it, double tol,
            int &iterations) {
  const int n = static_cast<int>(g.size());
  x = x.cwiseMax(lb).cwiseMin(ub);
  auto q = [&](const Vec &z) { return 0.5 * z.dot(H * z) + g.dot(z); };
  iterations = 0;
  for (int it = 0; it < max_it; ++it) {
    iterations = it + 1;
    const Vec grad = H * x + g;
    const Vec pg = x - (x - grad).cwiseMax(lb).cwiseMin(ub);
    if (pg.lpNorm<Eigen::Infinity>() <= tol) return true;

    std::vector<int> free;
    free.reserve(n);
    const double eps = 1e-12;
    for (int i = 0; i < n; ++i) {
      const bool at_lb = x(i) <= lb(i) + eps && grad(i) > 0.0;
      const bool at_ub = x(i) >= ub(i) - eps && grad(i) < 0.0;
      if (!at_lb && !at_ub) free.push_back(i);
    }
    Vec d = Vec::Zero(n);
    if (!free.empty()) {
      const int m = static_cast<int>(free.size());
      Mat Hf(m, m);
      Vec gf(m);
      for (int a = 0; a < m; ++a) {
        gf(a) = grad(free[a]);
        for (int b = 0; b < m; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      Eigen::LLT<Mat> llt(Hf);
      if (llt.info() != Eigen::Success) return false;
      const Vec df = -llt.solve(gf);
      for (int a = 0; a < m; ++a) d(free[a]) = df(a);
    } else {
      return true;
    }
    const double q0 = q(x);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Vec xn = (x + alpha * d).cwiseMax(lb).cwiseMin(ub);
      if (q(xn) <= q0 + 1e-4 * grad.dot(xn - x)) {
        moved = (xn - x).lpNorm<Eigen::Infinity>() > 0.0;
        x = xn;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) return true;
  }
  return true;
}

// d(R e2)/dq for q = (w, x, y, z); column k is the partial by component k.
Eigen::Matrix<double, 3, 4> lateral_axis_jacobian(const Eigen::Vector4d &q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix<double, 3, 4> J;
  J << -2 * z, 2 * y, 2 * x, -2 * w,
        2 * w, -2 * x, 2 * y, -2 * z,
        2 * x, 2 * w, 2 * z, 2 * y;
  return J;
}

Vec3 lateral_axis(const Eigen::Vector4d &q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  return Vec3(2 * (x * y - w * z), w * w - x * x + y * y - z * z, 2 * (y * z + w * x));
}

}  // namespace

NmpcController::NmpcController(const NmpcConfig &config, const PhysicalParams &params)
    : config_(config), params_(params), bounds_(input_bounds(params)) {
  config_.validate();
  params_.validate();
}

void NmpcController::reset() {
  has_guess_ = false;
  xs_.clear();
  us_.clear();
}

StateVector NmpcController::predict(const StateVector &x, const InputVector &u, Mode mode) const {
  FullState s = FullState::from_vector(x);
  s.q.normalize();
  const StepResult r = integrate_rk4(s, ControlInput::from_vector(u), mode, config_.dt, params_);
  return r.x.to_vector();
}

std::vector<WindowNode> NmpcController::window_at(const std::vector<ReferencePoint> &table, double table_dt,
                                                  double t) const {
  if (table.empty()) throw Error("nmpc: empty reference table");
  std::vector<WindowNode> w(config_.horizon + 1);
  const long last = static_cast<long>(table.size()) - 1;
  for (int i = 0; i <= config_.horizon; ++i) {
    const double tau = t + i * config_.dt;
    const long k = std::clamp(static_cast<long>(std::llround(tau / table_dt)), 0L, last);
    w[i].x = table[k].x;
    w[i].u = table[k].u;
    w[i].mode = table[k].contact.mode;
    if (k == last) {
      // Past the end: hold the final state at rest.
      w[i].x.omega.setZero();
    }
  }
  return w;
}

void NmpcController::warm_start(const FullState &x0, const std::vector<WindowNode> &window, double shift) {
  const int N = config_.horizon;
  std::vector<StateVector> xs(N + 1);
  std::vector<InputVector> us(N);
  if (!has_guess_) {
    for (int i = 0; i <= N; ++i) xs[i] = window[i].x.to_vector();
    for (int i = 0; i < N; ++i) us[i] = window[i].u.to_vector();
  } else {
    const double s = std::max(0.0, shift / config_.dt);
    for (int i = 0; i < N; ++i) {
      const double k = i + s;
      const int k0 = static_cast<int>(std::floor(k));
      const double f = k - k0;
      if (k0 + 1 <= N - 1)
        us[i] = (1.0 - f) * us_[k0] + f * us_[k0 + 1];
      else if (k0 <= N - 1)
        us[i] = us_[k0];
      else
        us[i] = window[i].u.to_vector();
    }
    for (int i = 0; i <= N; ++i) {
      const double k = i + s;
      const int k0 = static_cast<int>(std::floor(k));
      const double f = k - k0;
      if (k0 + 1 <= N) {
        xs[i] = (1.0 - f) * xs_[k0] + f * xs_[k0 + 1];
        // Keep the interpolated quaternion in one hemisphere.
        if (xs_[k0].segment<4>(3).dot(xs_[k0 + 1].segment<4>(3)) < 0.0)
          xs[i].segment<4>(3) = (1.0 - f) * xs_[k0].segment<4>(3) - f * xs_[k0 + 1].segment<4>(3);
        xs[i].segment<4>(3).normalize();
      } else if (k0 == N && f == 0.0) {
        xs[i] = xs_[N];
      } else {
        // Past the old horizon: roll the model forward on the shifted inputs.
        xs[i] = i == 0 ? window[0].x.to_vector() : predict(xs[i - 1], us[i - 1], window[i - 1].mode);
      }
    }
  }
  xs[0] = x0.to_vector();
  for (auto &u : us) u = u.cwiseMax(bounds_.lower).cwiseMin(bounds_.upper);
  xs_ = std::move(xs);
  us_ = std::move(us);
}

OcpSolution NmpcController::solve(const FullState &x0, const std::vector<WindowNode> &window, double shift) {
  const auto t_start = std::chrono::steady_clock::now();
  const int N = config_.horizon;
  if (static_cast<int>(window.size()) != N + 1) throw Error("nmpc: window must hold N+1 nodes");
  if (!x0.to_vector().allFinite()) throw InvalidStateError("nmpc: non-finite initial state");

  warm_start(x0, window, shift);
  const std::vector<InputVector> fallback = us_;

  OcpSolution sol;
  const int nu = 4 * N;
  const Eigen::Matrix<double, 13, 13> W = config_.w_x.asDiagonal();
  const double wm = config_.mode_weight;

  std::vector<Eigen::Matrix<double, 13, 13>> A(N);
  std::vector<Eigen::Matrix<double, 13, 4>> B(N);
  std::vector<StateVector> d(N);
  std::vector<Mat> S(N + 1);
  std::vector<StateVector> s(N + 1);
  bool ok = true;

  for (int iter = 0; iter < config_.sqp_iterations && ok; ++iter) {
    double defect = 0.0;
    for (int i = 0; i < N; ++i) {
      const Mode mode = window[i].mode;
      const StateVector f = predict(xs_[i], us_[i], mode);
      d[i] = f - xs_[i + 1];
      if (i > 0) defect = std::max(defect, d[i].lpNorm<Eigen::Infinity>());
      for (int k = 0; k < 13; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(xs_[i](k)));
        StateVector xp = xs_[i], xm = xs_[i];
        xp(k) += h;
        xm(k) -= h;
        A[i].col(k) = (predict(xp, us_[i], mode) - predict(xm, us_[i], mode)) / (2.0 * h);
      }
      for (int k = 0; k < 4; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(us_[i](k)));
        InputVector up = us_[i], um = us_[i];
        up(k) += h;
        um(k) -= h;
        B[i].col(k) = (predict(xs_[i], up, mode) - predict(xs_[i], um, mode)) / (2.0 * h);
      }
    }
    // The first interval starts from the measured state.
    d[0] = predict(xs_[0], us_[0], window[0].mode) - xs_[1];

    S[0] = Mat::Zero(13, nu);
    s[0].setZero();
    for (int i = 0; i < N; ++i) {
      S[i + 1] = A[i] * S[i];
      S[i + 1].block(0, 4 * i, 13, 4) += B[i];
      s[i + 1] = A[i] * s[i] + d[i];
    }

    Mat H = Mat::Zero(nu, nu);
    Vec g = Vec::Zero(nu);
    for (int i = 1; i <= N; ++i) {
      const int cols = 4 * i;
      const Mat Si = S[i].leftCols(cols);
      const StateVector e = state_error(xs_[i], window[i].x.to_vector()) + s[i];
      H.topLeftCorner(cols, cols).noalias() += Si.transpose() * W * Si;
      g.head(cols).noalias() += Si.transpose() * (W * e);
      if (window[i].mode == Mode::Terrestrial && wm > 0.0) {
        // Residuals (R e2) . v and p_z, linearized at the guess.
        Eigen::Matrix<double, 2, 13> Jc = Eigen::Matrix<double, 2, 13>::Zero();
        const Eigen::Vector4d q = xs_[i].segment<4>(3);
        const Vec3 v = xs_[i].segment<3>(7);
        const Vec3 yb = lateral_axis(q);
        Jc.block<1, 4>(0, 3) = v.transpose() * lateral_axis_jacobian(q);
        Jc.block<1, 3>(0, 7) = yb.transpose();
        Jc(1, 2) = 1.0;
        const Eigen::Vector2d c(yb.dot(v), xs_[i](2));
        const Eigen::Vector2d r = c + Jc * s[i];
        const Mat JS = Jc * Si;
        H.topLeftCorner(cols, cols).noalias() += wm * JS.transpose() * JS;
        g.head(cols).noalias() += wm * JS.transpose() * r;
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < 4; ++k) {
        H(4 * i + k, 4 * i + k) += config_.w_u(k) + config_.regularization;
        g(4 * i + k) += config_.w_u(k) * (us_[i](k) - window[i].u.to_vector()(k));
      }
    }

    Vec lb(nu), ub(nu);
    for (int i = 0; i < N; ++i) {
      lb.segment<4>(4 * i) = bounds_.lower - us_[i];
      ub.segment<4>(4 * i) = bounds_.upper - us_[i];
    }
    if (!H.allFinite() || !g.allFinite()) {
      ok = false;
      break;
    }
    Vec du = Vec::Zero(nu);
    int qp_it = 0;
    ok = box_qp(H, g, lb, ub, du, config_.qp_max_iterations, config_.qp_tolerance, qp_it) && du.allFinite();
    sol.qp_iterations += qp_it;
    if (!ok) break;
    // The step vanishes exactly at a stationary point of the condensed problem.
    if (iter == 0) sol.kkt = std::max(du.lpNorm<Eigen::Infinity>(), defect);

    for (int i = 0; i < N; ++i)
      us_[i] = (us_[i] + du.segment<4>(4 * i)).cwiseMax(bounds_.lower).cwiseMin(bounds_.upper);
    for (int i = 1; i <= N; ++i) {
      xs_[i] += S[i] * du + s[i];
      xs_[i].segment<4>(3).normalize();
    }
  }

  if (!ok) {
    us_ = fallback;
    sol.degraded = true;
  }

  sol.inputs.resize(N);
  for (int i = 0; i < N; ++i) sol.inputs[i] = ControlInput::from_vector(us_[i]);
  sol.rollout.resize(N + 1);
  StateVector x = x0.to_vector();
  sol.rollout[0] = x0;
  double cost = 0.0;
  for (int i = 0; i < N; ++i) {
    const InputVector du = us_[i] - window[i].u.to_vector();
    cost += du.dot(config_.w_u.cwiseProduct(du));
    x = predict(x, us_[i], window[i].mode);
    sol.rollout[i + 1] = FullState::from_vector(x);
    const StateVector e = state_error(x, window[i + 1].x.to_vector());
    cost += e.dot(config_.w_x.cwiseProduct(e));
  }
  sol.cost = cost;
  has_guess_ = !sol.degraded || has_guess_;
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return sol;
}

ControlInput NmpcController::step(const FullState &x0, const std::vector<ReferencePoint> &table, double table_dt,
                                  double t, OcpSolution *solution) {
  const double shift = has_guess_ ? t - last_time_ : 0.0;
  const auto window = window_at(table, table_dt, t);
  OcpSolution sol = solve(x0, window, shift);
  last_time_ = t;
  const ControlInput u = sol.inputs.front();
  if (solution) *solution = std::move(sol);
  return u;
}

}  // namespace tabv
