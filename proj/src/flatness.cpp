#include "tabv/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace tabv {

std::optional<double> yaw_from_velocity(const Vec3 &v, int eta, double eps) {
  if (std::hypot(v.x(), v.y()) < eps) return std::nullopt;
  const double e = eta >= 0 ? 1.0 : -1.0;
  return wrap_angle(std::atan2(e * v.y(), e * v.x()));
}

double yaw_rate_from_velocity(const Vec3 &v, const Vec3 &a, double eps) {
  const double s2 = v.x() * v.x() + v.y() * v.y();
  if (s2 < eps * eps) return 0.0;
  return (v.x() * a.y() - v.y() * a.x()) / s2;
}

namespace {

double resolve_yaw(const Vec3 &v, YawContext &yaw, double eps) {
  if (auto psi = yaw_from_velocity(v, 1, eps)) {
    yaw.last_yaw = *psi;
    return *psi;
  }
  if (!yaw.last_yaw) throw FlatnessError(FlatnessError::Kind::YawUndefined, "heading undefined at zero horizontal speed");
  return *yaw.last_yaw;
}

Vec3 gyroscopic(const Vec3 &w, const PhysicalParams &params) {
  return w.cross(params.inertia.cwiseProduct(w));
}

}  // namespace

ReferencePoint terrestrial_flat_to_state(const FlatSample &sample, double thrust_ref,
                                         const PhysicalParams &params, YawContext &yaw,
                                         double eps) {
  const double m = params.mass;
  const Vec3 v(sample.v.x(), sample.v.y(), 0.0);
  const Vec3 a(sample.a.x(), sample.a.y(), 0.0);
  const Vec3 j(sample.j.x(), sample.j.y(), 0.0);

  const double psi = resolve_yaw(v, yaw, eps);
  const double dpsi = yaw_rate_from_velocity(v, a, eps);
  const Vec3 x_c(std::cos(psi), std::sin(psi), 0.0);
  const Vec3 y_c(-std::sin(psi), std::cos(psi), 0.0);

  // Longitudinal acceleration; equals (v . a)/|v| whenever the heading follows v.
  const double a_l = a.dot(x_c);
  const double sin_theta = m * a_l / thrust_ref;
  if (std::abs(sin_theta) >= 1.0)
    throw FlatnessError(FlatnessError::Kind::InfeasiblePitch, "longitudinal acceleration exceeds reference thrust");
  const double theta = std::asin(sin_theta);
  const double cos_theta = std::cos(theta);
  const double da_l = j.dot(x_c) + dpsi * a.dot(y_c);
  const double dtheta = m * da_l / (thrust_ref * cos_theta);

  ReferencePoint ref;
  ref.x.p = Vec3(sample.p.x(), sample.p.y(), 0.0);
  ref.x.v = v;
  ref.x.q = Quat(Eigen::AngleAxisd(psi, Vec3::UnitZ()) * Eigen::AngleAxisd(theta, Vec3::UnitY()));
  ref.x.omega = Vec3(-sin_theta * dpsi, dtheta, cos_theta * dpsi);
  ref.u.thrust = thrust_ref;
  ref.u.torque = gyroscopic(ref.x.omega, params);
  ref.contact.mode = Mode::Terrestrial;
  ref.contact.normal_force = params.weight() - thrust_ref * cos_theta;
  return ref;
}

ReferencePoint aerial_flat_to_state(const FlatSample &sample, const PhysicalParams &params,
                                    YawContext &yaw, double eps) {
  const double m = params.mass;
  const Vec3 f = sample.a + Vec3(0.0, 0.0, params.gravity);
  const double f_norm = f.norm();
  if (f_norm < 0.1 * params.gravity)
    throw FlatnessError(FlatnessError::Kind::SingularThrust, "thrust direction undefined near free fall");

  const double psi = resolve_yaw(sample.v, yaw, eps);
  const double dpsi = yaw_rate_from_velocity(sample.v, sample.a, eps);
  const Vec3 x_c(std::cos(psi), std::sin(psi), 0.0);
  const Vec3 y_c(-std::sin(psi), std::cos(psi), 0.0);

  const double thrust = m * f_norm;
  const Vec3 z_b = f / f_norm;
  Vec3 y_b = z_b.cross(x_c);
  if (y_b.norm() < 1e-6)
    throw FlatnessError(FlatnessError::Kind::SingularThrust, "thrust axis aligned with heading");
  y_b.normalize();
  const Vec3 x_b = y_b.cross(z_b);

  const double dthrust = m * z_b.dot(sample.j);
  const Vec3 h = (m * sample.j - dthrust * z_b) / thrust;
  const double p = -h.dot(y_b);
  const double q = h.dot(x_b);
  // Exact yaw-rate term for the y_B = z_B x x_C construction; reduces to
  // dpsi * (z_I . z_B) without roll.
  const double r = (p * z_b.dot(x_c) + dpsi * y_b.dot(y_c)) / x_b.dot(x_c);

  Mat3 R;
  R.col(0) = x_b;
  R.col(1) = y_b;
  R.col(2) = z_b;

  ReferencePoint ref;
  ref.x.p = sample.p;
  ref.x.v = sample.v;
  ref.x.q = Quat(R).normalized();
  ref.x.omega = Vec3(p, q, r);
  ref.u.thrust = thrust;
  ref.u.torque = gyroscopic(ref.x.omega, params);
  ref.contact.mode = Mode::Aerial;
  ref.contact.normal_force = 0.0;
  return ref;
}

ReferencePoint flat_to_state(const FlatSample &s, const PhysicalParams &params,
                             const FlatnessConfig &config, YawContext &yaw) {
  if (s.mode == Mode::Terrestrial)
    return terrestrial_flat_to_state(s, config.terrestrial_thrust_ratio * params.weight(), params, yaw,
                                     config.min_heading_speed);
  return aerial_flat_to_state(s, params, yaw, config.min_heading_speed);
}

void fill_reference_torques(std::vector<ReferencePoint> &refs, double dt,
                            const PhysicalParams &params) {
  const std::size_t n = refs.size();
  if (n < 2) return;
  std::vector<Vec3> wdot(n, Vec3::Zero());
  auto same_mode = [&](std::size_t a, std::size_t b) { return refs[a].contact.mode == refs[b].contact.mode; };
  auto span = [&](std::size_t a, std::size_t b) {
    const double h = refs[b].t - refs[a].t;
    return h > 0.0 ? h : dt * static_cast<double>(b - a);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const bool has_prev = k > 0 && same_mode(k - 1, k);
    const bool has_next = k + 1 < n && same_mode(k, k + 1);
    if (has_prev && has_next)
      wdot[k] = (refs[k + 1].x.omega - refs[k - 1].x.omega) / span(k - 1, k + 1);
    else if (has_next)
      wdot[k] = (refs[k + 1].x.omega - refs[k].x.omega) / span(k, k + 1);
    else if (has_prev)
      wdot[k] = (refs[k].x.omega - refs[k - 1].x.omega) / span(k - 1, k);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 &w = refs[k].x.omega;
    refs[k].u.torque = params.inertia.cwiseProduct(wdot[k]) + gyroscopic(w, params);
  }
}

std::vector<ReferencePoint> sample_references(const FlatTrajectory &traj, double dt,
                                              const PhysicalParams &params,
                                              const FlatnessConfig &config) {
  if (!(dt > 0.0)) throw Error("sample_references: dt must be positive");
  const double duration = traj.duration();
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
  std::vector<ReferencePoint> refs;
  refs.reserve(steps + 1);
  YawContext yaw;
  yaw.last_yaw = config.initial_heading;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = std::min(static_cast<double>(k) * dt, duration);
    try {
      ReferencePoint ref = flat_to_state(traj.sample(t), params, config, yaw);
      ref.t = t;
      refs.push_back(ref);
    } catch (const FlatnessError &e) {
      throw FlatnessError(e.kind(), "sample " + std::to_string(k) + " (t=" + std::to_string(t) + "): " + e.what());
    }
  }
  fill_reference_torques(refs, dt, params);
  return refs;
}

double flatness_roundtrip_check(const FlatTrajectory &traj, double dt,
                                const PhysicalParams &params, const FlatnessConfig &config) {
  const std::vector<ReferencePoint> refs = sample_references(traj, dt, params, config);
  FullState x = refs.front().x;
  double max_err = 0.0;
  for (std::size_t k = 0; k + 1 < refs.size(); ++k) {
    const double h = refs[k + 1].t - refs[k].t;
    if (h <= 0.0) continue;
    Mode mode = refs[k].contact.mode;
    StepResult step = integrate_rk4(x, refs[k].u, refs[k + 1].u, mode, h, params);
    if (step.liftoff) step = integrate_rk4(x, refs[k].u, refs[k + 1].u, Mode::Aerial, h, params);
    x = step.x;
    max_err = std::max(max_err, (x.p - refs[k + 1].x.p).norm());
  }
  return max_err;
}

void write_references_csv(std::ostream &os, const std::vector<ReferencePoint> &refs) {
  os << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,T,tau_x,tau_y,tau_z,mode\n";
  os << std::setprecision(17);
  for (const auto &r : refs) {
    const auto &x = r.x;
    os << r.t << ',' << x.p.x() << ',' << x.p.y() << ',' << x.p.z() << ',' << x.q.w() << ',' << x.q.x()
       << ',' << x.q.y() << ',' << x.q.z() << ',' << x.v.x() << ',' << x.v.y() << ',' << x.v.z() << ','
       << x.omega.x() << ',' << x.omega.y() << ',' << x.omega.z() << ',' << r.u.thrust << ','
       << r.u.torque.x() << ',' << r.u.torque.y() << ',' << r.u.torque.z() << ',' << mode_flag(r.contact.mode)
       << '\n';
  }
}

std::vector<ReferencePoint> read_references_csv(std::istream &is) {
  std::vector<ReferencePoint> refs;
  std::string line;
  if (!std::getline(is, line)) throw Error("reference csv: empty input");
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 19) throw Error("reference csv: expected 19 columns on line " + std::to_string(line_no));
    ReferencePoint r;
    r.t = vals[0];
    r.x.p = Vec3(vals[1], vals[2], vals[3]);
    r.x.q = Quat(vals[4], vals[5], vals[6], vals[7]).normalized();
    r.x.v = Vec3(vals[8], vals[9], vals[10]);
    r.x.omega = Vec3(vals[11], vals[12], vals[13]);
    r.u.thrust = vals[14];
    r.u.torque = Vec3(vals[15], vals[16], vals[17]);
    r.contact.mode = vals[18] > 0.5 ? Mode::Terrestrial : Mode::Aerial;
    refs.push_back(r);
  }
  return refs;
}

}  // namespace tabv
