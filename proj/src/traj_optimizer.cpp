#include "tabv/traj_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace tabv {

void OptimizerConfig::validate() const {
  if (!(v_max > 0.0 && a_max > 0.0 && omega_max > 0.0 && alpha_max > 0.0 && d_s > 0.0))
    throw ConfigError("optimizer: limits must be positive");
  if (penalty_rounds < 0 || !(penalty_growth >= 1.0) || !(feasibility_tol > 0.0))
    throw ConfigError("optimizer: invalid penalty continuation settings");
  if (kappa < 4) throw ConfigError("optimizer: kappa must be at least 4");
  if ((lambda.array() < 0.0).any()) throw ConfigError("optimizer: lambda must be non-negative");
  if (!(smooth_eps > 0.0)) throw ConfigError("optimizer: smooth_eps must be positive");
  if (!(audit_heading_speed >= 0.0)) throw ConfigError("optimizer: audit_heading_speed must be non-negative");
}

double smoothed_l1(double x, double eps, double &grad) {
  if (x <= 0.0) {
    grad = 0.0;
    return 0.0;
  }
  if (x >= eps) {
    grad = 1.0;
    return x - 0.5 * eps;
  }
  const double r = x / eps;
  grad = r * r * (3.0 - 2.0 * r);
  return (eps - 0.5 * x) * r * r * r;
}

std::vector<ConstraintPoint> constraint_points(const MincoTrajectory &traj, const std::vector<Mode> &modes,
                                               int kappa) {
  std::vector<ConstraintPoint> pts;
  pts.reserve(static_cast<std::size_t>(traj.pieces()) * kappa);
  for (int i = 0; i < traj.pieces(); ++i) {
    const double T = traj.durations()(i);
    const auto c = traj.coeffs().block<6, 3>(6 * i, 0);
    for (int k = 0; k < kappa; ++k) {
      ConstraintPoint cp;
      cp.piece = i;
      cp.frac = static_cast<double>(k) / kappa;
      cp.mode = modes[i];
      const double t = cp.frac * T;
      cp.p = (poly_basis(t, 0) * c).transpose();
      cp.v = (poly_basis(t, 1) * c).transpose();
      cp.a = (poly_basis(t, 2) * c).transpose();
      cp.j = (poly_basis(t, 3) * c).transpose();
      if (cp.mode == Mode::Terrestrial) cp.p.z() = cp.v.z() = cp.a.z() = cp.j.z() = 0.0;
      pts.push_back(cp);
    }
  }
  return pts;
}

double cost_total_time(const Eigen::VectorXd &durations, Eigen::VectorXd *grad) {
  if (grad) *grad = Eigen::VectorXd::Ones(durations.size());
  return durations.sum();
}

double cost_state_limits(const std::vector<ConstraintPoint> &points, double v_max, double a_max, double eps,
                         std::vector<PointGradient> *grads) {
  double J = 0.0, d = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto &pt = points[k];
    J += smoothed_l1(pt.v.squaredNorm() - v_max * v_max, eps, d);
    if (grads) (*grads)[k].v += 2.0 * d * pt.v;
    J += smoothed_l1(pt.a.squaredNorm() - a_max * a_max, eps, d);
    if (grads) (*grads)[k].a += 2.0 * d * pt.a;
  }
  return J;
}

double cost_collision(const std::vector<ConstraintPoint> &points, const World &world, double d_s, double eps,
                      std::vector<PointGradient> *grads) {
  double J = 0.0, d = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto &pt = points[k];
    const DistQuery q = world.field(pt.mode).query_penalized(pt.p);
    J += smoothed_l1(d_s - q.dist, eps, d);
    if (grads && d != 0.0) (*grads)[k].p -= d * q.grad;
  }
  return J;
}

void heading_derivatives(const Vec3 &v, const Vec3 &a, const Vec3 &j, double delta, double &rate,
                         double &accel) {
  const double s = v.x() * v.x() + v.y() * v.y() + delta * delta;
  const double c = v.x() * a.y() - v.y() * a.x();
  const double cd = v.x() * j.y() - v.y() * j.x();
  const double dot = v.x() * a.x() + v.y() * a.y();
  rate = c / s;
  accel = cd / s - 2.0 * c * dot / (s * s);
}

double cost_nonholonomic(const std::vector<ConstraintPoint> &points, double omega_max, double alpha_max,
                         double delta, double eps, std::vector<PointGradient> *grads) {
  double J = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto &pt = points[k];
    if (pt.mode != Mode::Terrestrial) continue;
    const Vec3 &v = pt.v, &a = pt.a, &j = pt.j;
    const double s = v.x() * v.x() + v.y() * v.y() + delta * delta;
    const double c = v.x() * a.y() - v.y() * a.x();
    const double cd = v.x() * j.y() - v.y() * j.x();
    const double dot = v.x() * a.x() + v.y() * a.y();
    const double s2 = s * s, s3 = s2 * s;
    const double rate = c / s;
    const double accel = cd / s - 2.0 * c * dot / s2;

    double d1 = 0.0, d2 = 0.0;
    J += smoothed_l1(rate * rate - omega_max * omega_max, eps, d1);
    J += smoothed_l1(accel * accel - alpha_max * alpha_max, eps, d2);
    if (!grads || (d1 == 0.0 && d2 == 0.0)) continue;

    const double w1 = 2.0 * d1 * rate, w2 = 2.0 * d2 * accel;
    const Vec3 drate_dv(a.y() / s - 2.0 * c * v.x() / s2, -a.x() / s - 2.0 * c * v.y() / s2, 0.0);
    const Vec3 drate_da(-v.y() / s, v.x() / s, 0.0);
    const Vec3 dacc_dv(j.y() / s - 2.0 * cd * v.x() / s2 - 2.0 * a.y() * dot / s2 - 2.0 * c * a.x() / s2 +
                           8.0 * c * dot * v.x() / s3,
                       -j.x() / s - 2.0 * cd * v.y() / s2 + 2.0 * a.x() * dot / s2 - 2.0 * c * a.y() / s2 +
                           8.0 * c * dot * v.y() / s3,
                       0.0);
    const Vec3 dacc_da(-2.0 * (-v.y() * dot + c * v.x()) / s2, -2.0 * (v.x() * dot + c * v.y()) / s2, 0.0);
    const Vec3 dacc_dj(-v.y() / s, v.x() / s, 0.0);
    auto &g = (*grads)[k];
    g.v += w1 * drate_dv + w2 * dacc_dv;
    g.a += w1 * drate_da + w2 * dacc_da;
    g.j += w2 * dacc_dj;
  }
  return J;
}

double LimitAudit::worst() const {
  return std::max({velocity, acceleration, heading_rate, heading_accel, clearance});
}

TrajOptimizer::TrajOptimizer(const OptimizerConfig &config, WorldPtr world)
    : config_(config), world_(std::move(world)) {
  config_.validate();
  if (!world_) throw ConfigError("optimizer: world is required");
}

namespace {

bool z_fixed(const std::vector<Mode> &modes, int i) {
  return modes[i] == Mode::Terrestrial || modes[i + 1] == Mode::Terrestrial;
}

void check_problem(const OptimizerProblem &pb) {
  const int M = static_cast<int>(pb.durations.size());
  if (M < 1) throw Error("optimizer: need at least one piece");
  if (static_cast<int>(pb.modes.size()) != M) throw Error("optimizer: mode vector length must equal piece count");
  if (pb.points.cols() != M - 1) throw Error("optimizer: expected M-1 interior waypoints");
}

}  // namespace

Eigen::VectorXd TrajOptimizer::pack(const OptimizerProblem &pb) const {
  check_problem(pb);
  const int M = static_cast<int>(pb.durations.size());
  std::vector<double> x;
  for (int i = 0; i + 1 < M; ++i) {
    x.push_back(pb.points(0, i));
    x.push_back(pb.points(1, i));
    if (!z_fixed(pb.modes, i)) x.push_back(pb.points(2, i));
  }
  for (int i = 0; i < M; ++i) x.push_back(std::log(pb.durations(i)));
  return Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void TrajOptimizer::unpack(const OptimizerProblem &pb, const Eigen::VectorXd &x, Eigen::Matrix3Xd &points,
                           Eigen::VectorXd &durations) const {
  const int M = static_cast<int>(pb.durations.size());
  points.resize(3, M - 1);
  durations.resize(M);
  int k = 0;
  for (int i = 0; i + 1 < M; ++i) {
    points(0, i) = x(k++);
    points(1, i) = x(k++);
    points(2, i) = z_fixed(pb.modes, i) ? 0.0 : x(k++);
  }
  for (int i = 0; i < M; ++i) durations(i) = std::exp(x(k++));
}

double TrajOptimizer::evaluate(const OptimizerProblem &pb, const Eigen::VectorXd &x, Eigen::VectorXd &grad,
                               CostBreakdown *parts) const {
  CostBreakdown cb;
  const double f = evaluate_weighted(pb, x, grad, &cb, config_.lambda);
  if (parts) *parts = cb;
  if (!std::isfinite(f)) {
    const char *term = !std::isfinite(cb.time)        ? "J_t"
                       : !std::isfinite(cb.state)     ? "J_s"
                       : !std::isfinite(cb.collision) ? "J_c"
                                                      : "J_n";
    throw Error(std::string("optimizer: non-finite cost in ") + term);
  }
  return f;
}

double TrajOptimizer::evaluate_weighted(const OptimizerProblem &pb, const Eigen::VectorXd &x,
                                        Eigen::VectorXd &grad, CostBreakdown *parts, const Vec4 &w) const {
  const int M = static_cast<int>(pb.durations.size());
  Eigen::Matrix3Xd points;
  Eigen::VectorXd T;
  unpack(pb, x, points, T);
  if (!(T.array() > 0.0).all() || !T.allFinite() || !points.allFinite()) {
    CostBreakdown bad;
    bad.time = bad.state = bad.collision = bad.nonholonomic = bad.total = std::numeric_limits<double>::infinity();
    if (parts) *parts = bad;
    grad.setConstant(x.size(), std::numeric_limits<double>::quiet_NaN());
    return bad.total;
  }
  MincoTrajectory traj;
  traj.generate(pb.head, pb.tail, points, T);

  const auto pts = constraint_points(traj, pb.modes, config_.kappa);
  CostBreakdown cb;
  Eigen::VectorXd gT_time;
  cb.time = cost_total_time(T, &gT_time);
  // Overflowing durations from a long trial step: report an infinite cost so
  // the line search backs off.
  const bool finite_points = std::all_of(pts.begin(), pts.end(), [](const ConstraintPoint &pt) {
    return pt.p.allFinite() && pt.v.allFinite() && pt.a.allFinite() && pt.j.allFinite();
  });
  if (!finite_points || !std::isfinite(cb.time)) {
    cb.state = cb.collision = cb.nonholonomic = cb.total = std::numeric_limits<double>::infinity();
    if (!std::isfinite(cb.time)) cb.time = std::numeric_limits<double>::infinity();
    if (parts) *parts = cb;
    grad.setConstant(x.size(), std::numeric_limits<double>::quiet_NaN());
    return cb.total;
  }

  std::vector<PointGradient> gs(pts.size()), gc(pts.size()), gn(pts.size());
  cb.state = cost_state_limits(pts, config_.v_max, config_.a_max, config_.smooth_eps, &gs);
  cb.collision = cost_collision(pts, *world_, config_.d_s, config_.smooth_eps, &gc);
  cb.nonholonomic = cost_nonholonomic(pts, config_.omega_max, config_.alpha_max, config_.heading_delta,
                                      config_.smooth_eps, &gn);
  cb.total = w(0) * cb.time + w(1) * cb.state + w(2) * cb.collision + w(3) * cb.nonholonomic;
  if (parts) *parts = cb;
  if (!std::isfinite(cb.total)) {
    grad.setConstant(x.size(), std::numeric_limits<double>::quiet_NaN());
    return cb.total;
  }

  Eigen::MatrixX3d gc_coef = Eigen::MatrixX3d::Zero(6 * M, 3);
  Eigen::VectorXd gT = w(0) * gT_time;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto &pt = pts[k];
    PointGradient g;
    g.p = w(1) * gs[k].p + w(2) * gc[k].p + w(3) * gn[k].p;
    g.v = w(1) * gs[k].v + w(2) * gc[k].v + w(3) * gn[k].v;
    g.a = w(1) * gs[k].a + w(2) * gc[k].a + w(3) * gn[k].a;
    g.j = w(1) * gs[k].j + w(2) * gc[k].j + w(3) * gn[k].j;
    if (pt.mode == Mode::Terrestrial) g.p.z() = g.v.z() = g.a.z() = g.j.z() = 0.0;
    if (g.p.isZero(0.0) && g.v.isZero(0.0) && g.a.isZero(0.0) && g.j.isZero(0.0)) continue;
    const double t = pt.frac * T(pt.piece);
    gc_coef.block<6, 3>(6 * pt.piece, 0) +=
        poly_basis(t, 0).transpose() * g.p.transpose() + poly_basis(t, 1).transpose() * g.v.transpose() +
        poly_basis(t, 2).transpose() * g.a.transpose() + poly_basis(t, 3).transpose() * g.j.transpose();
    // The sample time scales with the piece duration.
    Vec3 snap = traj.eval_piece(pt.piece, t, 4);
    if (pt.mode == Mode::Terrestrial) snap.z() = 0.0;
    gT(pt.piece) += pt.frac * (g.p.dot(pt.v) + g.v.dot(pt.a) + g.a.dot(pt.j) + g.j.dot(snap));
  }

  Eigen::Matrix3Xd gq;
  Eigen::VectorXd gTotal;
  traj.propagate_gradient(gc_coef, gT, gq, gTotal);

  grad.resize(x.size());
  int k = 0;
  for (int i = 0; i + 1 < M; ++i) {
    grad(k++) = gq(0, i);
    grad(k++) = gq(1, i);
    if (!z_fixed(pb.modes, i)) grad(k++) = gq(2, i);
  }
  for (int i = 0; i < M; ++i) grad(k++) = gTotal(i) * T(i);
  return cb.total;
}

CostBreakdown TrajOptimizer::costs(const MincoTrajectory &traj, const std::vector<Mode> &modes) const {
  const auto pts = constraint_points(traj, modes, config_.kappa);
  CostBreakdown cb;
  cb.time = traj.duration();
  cb.state = cost_state_limits(pts, config_.v_max, config_.a_max, config_.smooth_eps);
  cb.collision = cost_collision(pts, *world_, config_.d_s, config_.smooth_eps);
  cb.nonholonomic =
      cost_nonholonomic(pts, config_.omega_max, config_.alpha_max, config_.heading_delta, config_.smooth_eps);
  const Vec4 &w = config_.lambda;
  cb.total = w(0) * cb.time + w(1) * cb.state + w(2) * cb.collision + w(3) * cb.nonholonomic;
  return cb;
}

LimitAudit TrajOptimizer::audit(const MincoTrajectory &traj, const std::vector<Mode> &modes,
                                int samples_per_piece) const {
  LimitAudit out;
  const auto pts = constraint_points(traj, modes, samples_per_piece);
  for (const auto &pt : pts) {
    out.velocity = std::max(out.velocity, pt.v.norm() / config_.v_max);
    out.acceleration = std::max(out.acceleration, pt.a.norm() / config_.a_max);
    const double dist = world_->field(pt.mode).query_penalized(pt.p).dist;
    out.clearance = std::max(out.clearance, dist > 0.0 ? config_.d_s / dist : 1e9);
    if (pt.mode == Mode::Terrestrial && std::hypot(pt.v.x(), pt.v.y()) >= config_.audit_heading_speed) {
      double rate = 0.0, accel = 0.0;
      heading_derivatives(pt.v, pt.a, pt.j, config_.heading_delta, rate, accel);
      out.heading_rate = std::max(out.heading_rate, std::abs(rate) / config_.omega_max);
      out.heading_accel = std::max(out.heading_accel, std::abs(accel) / config_.alpha_max);
    }
  }
  return out;
}

OptimizeResult TrajOptimizer::optimize(const OptimizerProblem &pb) const {
  const auto t0 = std::chrono::steady_clock::now();
  const double cpu0 = thread_cpu_time();
  OptimizeResult res;
  res.modes = pb.modes;
  Eigen::VectorXd x = pack(pb);

  CostBreakdown last;
  Vec4 w = config_.lambda;
  auto objective = [&](const Eigen::VectorXd &xx, Eigen::VectorXd &g) {
    return evaluate_weighted(pb, xx, g, &last, w);
  };
  int offset = 0;
  auto progress = [&](int it, double, const Eigen::VectorXd &) {
    res.log.push_back({offset + it, last});
    return true;
  };
  for (int round = 0;; ++round) {
    const LbfgsResult r = lbfgs_minimize(x, objective, config_.solver, progress);
    if (r.status == LbfgsStatus::NonFinite) throw Error("optimizer: non-finite cost at the initial guess");
    if (round == 0) {
      res.solver = r;
    } else {
      res.solver.status = r.status;
      res.solver.iterations += r.iterations;
      res.solver.evaluations += r.evaluations;
      res.solver.f = r.f;
    }
    offset = res.solver.iterations;
    if (round >= config_.penalty_rounds) break;
    Eigen::VectorXd g(x.size());
    CostBreakdown cb;
    evaluate_weighted(pb, x, g, &cb, w);
    const double tol = config_.feasibility_tol;
    if (cb.state <= tol && cb.collision <= tol && cb.nonholonomic <= tol) break;
    if (cb.state > tol) w(1) *= config_.penalty_growth;
    if (cb.collision > tol) w(2) *= config_.penalty_growth;
    if (cb.nonholonomic > tol) w(3) *= config_.penalty_growth;
  }
  if (res.solver.status == LbfgsStatus::LineSearchFailed) res.warning = "line search failed; returning best iterate";

  Eigen::Matrix3Xd points;
  Eigen::VectorXd T;
  unpack(pb, x, points, T);
  res.traj.generate(pb.head, pb.tail, points, T);
  res.cost = costs(res.traj, pb.modes);
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.cpu_time = thread_cpu_time() - cpu0;
  return res;
}

}  // namespace tabv
