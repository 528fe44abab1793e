#include "tabv/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tabv {

const char *lbfgs_status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::Stalled: return "stalled";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailed: return "line_search_failed";
    case LbfgsStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

namespace {

enum class LsOutcome { Ok, Failed, NonFinite };

LsOutcome line_search(const LbfgsObjective &objective, const LbfgsParams &params, const Eigen::VectorXd &x0,
                      double f0, const Eigen::VectorXd &g0, const Eigen::VectorXd &d, double &step,
                      Eigen::VectorXd &x, double &f, Eigen::VectorXd &g, int &evaluations) {
  const double dg0 = g0.dot(d);
  if (!(dg0 < 0.0)) return LsOutcome::Failed;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < params.max_linesearch; ++it) {
    x = x0 + step * d;
    f = objective(x, g);
    ++evaluations;
    const bool finite = std::isfinite(f) && g.allFinite();
    if (!finite || f > f0 + params.f_dec_coeff * step * dg0) {
      hi = step;
    } else if (g.dot(d) < params.s_curv_coeff * dg0) {
      lo = step;
    } else {
      return LsOutcome::Ok;
    }
    step = std::isinf(hi) ? 2.0 * step : 0.5 * (lo + hi);
    if (step < params.min_step || step > params.max_step) break;
  }
  // Accept a sufficient-decrease point even without the curvature condition.
  if (lo > 0.0) {
    step = lo;
    x = x0 + step * d;
    f = objective(x, g);
    ++evaluations;
    if (std::isfinite(f) && f <= f0 + params.f_dec_coeff * step * dg0) return LsOutcome::Ok;
  }
  return LsOutcome::Failed;
}

}  // namespace

LbfgsResult lbfgs_minimize(Eigen::VectorXd &x, const LbfgsObjective &objective, const LbfgsParams &params,
                           const LbfgsProgress &progress) {
  LbfgsResult res;
  const int n = static_cast<int>(x.size());
  const int m = std::max(1, params.memory);
  Eigen::VectorXd g(n);
  double f = objective(x, g);
  res.evaluations = 1;
  res.f = f;
  if (!std::isfinite(f) || !g.allFinite()) {
    res.status = LbfgsStatus::NonFinite;
    return res;
  }

  auto converged = [&](const Eigen::VectorXd &xx, const Eigen::VectorXd &gg) {
    const double xn = std::max(1.0, xx.lpNorm<Eigen::Infinity>());
    return gg.lpNorm<Eigen::Infinity>() <= params.g_epsilon * xn;
  };
  if (n == 0 || converged(x, g)) {
    res.status = LbfgsStatus::Converged;
    return res;
  }

  std::vector<Eigen::VectorXd> S(m, Eigen::VectorXd::Zero(n)), Y(m, Eigen::VectorXd::Zero(n));
  std::vector<double> rho(m, 0.0), alpha(m, 0.0);
  std::vector<double> history;
  int stored = 0, head = 0;

  Eigen::VectorXd d = -g;
  double step = 1.0 / std::max(d.norm(), 1e-12);
  Eigen::VectorXd xn(n), gn(n);
  double fn = f;

  for (int k = 1; k <= params.max_iterations; ++k) {
    const LsOutcome ls = line_search(objective, params, x, f, g, d, step, xn, fn, gn, res.evaluations);
    if (ls != LsOutcome::Ok) {
      // Retry once along steepest descent before giving up.
      if (stored > 0) {
        stored = 0;
        d = -g;
        step = 1.0 / std::max(d.norm(), 1e-12);
        if (line_search(objective, params, x, f, g, d, step, xn, fn, gn, res.evaluations) != LsOutcome::Ok) {
          res.status = LbfgsStatus::LineSearchFailed;
          break;
        }
      } else {
        res.status = LbfgsStatus::LineSearchFailed;
        break;
      }
    }
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    x = xn;
    g = gn;
    f = fn;
    res.iterations = k;
    res.f = f;

    if (progress && !progress(k, f, x)) {
      res.status = LbfgsStatus::Stalled;
      break;
    }
    if (converged(x, g)) {
      res.status = LbfgsStatus::Converged;
      break;
    }
    history.push_back(f);
    if (params.past > 0 && static_cast<int>(history.size()) > params.past) {
      const double prev = history[history.size() - 1 - params.past];
      if (std::abs(prev - f) <= params.delta * std::max(1.0, std::abs(f))) {
        res.status = LbfgsStatus::Stalled;
        break;
      }
    }
    if (k == params.max_iterations) {
      res.status = LbfgsStatus::MaxIterations;
      break;
    }

    const double ys = y.dot(s);
    // Cautious update keeps the inverse-Hessian estimate positive definite.
    if (ys > 1e-12 * s.squaredNorm() * std::max(1.0, g.norm())) {
      S[head] = s;
      Y[head] = y;
      rho[head] = 1.0 / ys;
      head = (head + 1) % m;
      stored = std::min(stored + 1, m);
    }

    d = -g;
    int idx = head;
    for (int i = 0; i < stored; ++i) {
      idx = (idx + m - 1) % m;
      alpha[idx] = rho[idx] * S[idx].dot(d);
      d -= alpha[idx] * Y[idx];
    }
    if (stored > 0) {
      const int last = (head + m - 1) % m;
      d *= 1.0 / (rho[last] * Y[last].squaredNorm());
    }
    for (int i = 0; i < stored; ++i) {
      const double beta = rho[idx] * Y[idx].dot(d);
      d += (alpha[idx] - beta) * S[idx];
      idx = (idx + 1) % m;
    }
    step = 1.0;
  }
  return res;
}

}  // namespace tabv
