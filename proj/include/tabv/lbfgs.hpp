#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>

namespace tabv {

struct LbfgsParams {
  int memory = 8;
  double g_epsilon = 1e-5;     // stop when |g|_inf <= g_epsilon * max(1, |x|_inf)
  int past = 3;                // window for the relative-decrease stop (0 disables)
  double delta = 1e-8;         // relative decrease over `past` iterations
  int max_iterations = 300;
  int max_linesearch = 64;
  double f_dec_coeff = 1e-4;   // Armijo
  double s_curv_coeff = 0.9;   // weak Wolfe curvature
  double min_step = 1e-20;
  double max_step = 1e20;
};

enum class LbfgsStatus { Converged, Stalled, MaxIterations, LineSearchFailed, NonFinite };

const char *lbfgs_status_name(LbfgsStatus s);

struct LbfgsResult {
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

// Returns f(x) and writes the gradient into g.
using LbfgsObjective = std::function<double(const Eigen::VectorXd &x, Eigen::VectorXd &g)>;
// Called after each accepted step; returning false stops the solver.
using LbfgsProgress = std::function<bool(int iteration, double f, const Eigen::VectorXd &x)>;

// Limited-memory BFGS with a Lewis-Overton weak Wolfe bisection line search.
// x holds the best accepted iterate on return.
LbfgsResult lbfgs_minimize(Eigen::VectorXd &x, const LbfgsObjective &objective, const LbfgsParams &params,
                           const LbfgsProgress &progress = {});

}  // namespace tabv
