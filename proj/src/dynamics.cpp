#include "tabv/dynamics.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace tabv {

namespace {

constexpr double kQuatTolerance = 1e-6;

Quat quat_from(const StateVector &x) { return Quat(x(3), x(4), x(5), x(6)); }

}  // namespace

StateVector FullState::to_vector() const {
  StateVector x;
  x << p, q.w(), q.x(), q.y(), q.z(), v, omega;
  return x;
}

FullState FullState::from_vector(const StateVector &x) {
  FullState s;
  s.p = x.segment<3>(0);
  s.q = quat_from(x);
  s.v = x.segment<3>(7);
  s.omega = x.segment<3>(10);
  return s;
}

void PhysicalParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("physical params: mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw ConfigError("physical params: inertia must be positive definite");
  if (!(arm_length > 0.0)) throw ConfigError("physical params: arm_length must be positive");
  if (!(c_t > 0.0) || !(c_m > 0.0)) throw ConfigError("physical params: rotor coefficients must be positive");
  if (!(t_min >= 0.0) || !(t_max > t_min)) throw ConfigError("physical params: need 0 <= t_min < t_max");
}

DynamicsResult dynamics_vector(const StateVector &x, const InputVector &u, Mode mode,
                               const PhysicalParams &params, const ExternalWrench &wrench) {
  DynamicsResult out;
  const Quat q = quat_from(x);
  const Mat3 R = q.normalized().toRotationMatrix();
  const Vec3 v = x.segment<3>(7);
  const Vec3 w = x.segment<3>(10);
  const Vec3 z_b = R.col(2);
  const double m = params.mass;
  const double thrust = u(0);

  Vec3 force = thrust * z_b + wrench.force - Vec3(0.0, 0.0, params.weight());

  if (mode == Mode::Terrestrial) {
    const double fn = -force.z();
    if (fn < 0.0) {
      out.liftoff = true;
    } else {
      out.normal_force = fn;
      force.z() = 0.0;
      // Ideal non-slipping wheels: hold (R e2) . v at zero.
      const Vec3 y_b = R.col(1);
      const Vec3 y_bh(y_b.x(), y_b.y(), 0.0);
      const double y_bh_norm = y_bh.norm();
      if (y_bh_norm > 1e-6) {
        const Vec3 y_b_dot = R * Vec3(-w.z(), 0.0, w.x());
        const Vec3 force_h(force.x(), force.y(), 0.0);
        const double fl = -(m * y_b_dot.dot(v) + y_bh.dot(force_h)) / y_bh_norm;
        out.lateral_force = fl;
        force += fl * y_bh / y_bh_norm;
      }
    }
  }

  out.xdot.segment<3>(0) = v;
  const Vec3 qv(q.x(), q.y(), q.z());
  out.xdot(3) = -0.5 * qv.dot(w);
  out.xdot.segment<3>(4) = 0.5 * (q.w() * w + qv.cross(w));
  out.xdot.segment<3>(7) = force / m;
  const Vec3 Jw = params.inertia.cwiseProduct(w);
  out.xdot.segment<3>(10) =
      (u.tail<3>() + wrench.torque - w.cross(Jw)).cwiseQuotient(params.inertia);
  return out;
}

DynamicsResult continuous_dynamics(const FullState &x, const ControlInput &u, Mode mode,
                                   const PhysicalParams &params, const ExternalWrench &wrench) {
  if (std::abs(x.q.norm() - 1.0) > kQuatTolerance)
    throw InvalidStateError("continuous_dynamics: attitude quaternion is not unit length");
  if (!x.to_vector().allFinite()) throw InvalidStateError("continuous_dynamics: non-finite state");
  return dynamics_vector(x.to_vector(), u.to_vector(), mode, params, wrench);
}

namespace {

StepResult rk4_impl(const FullState &x0, const InputVector &u0, const InputVector &u1, Mode mode,
                    double dt, const PhysicalParams &params, const ExternalWrench &wrench) {
  if (!(dt > 0.0)) throw Error("integrate_rk4: dt must be positive");
  if (std::abs(x0.q.norm() - 1.0) > kQuatTolerance)
    throw InvalidStateError("integrate_rk4: attitude quaternion is not unit length");
  const StateVector x = x0.to_vector();
  const InputVector um = 0.5 * (u0 + u1);
  const DynamicsResult k1 = dynamics_vector(x, u0, mode, params, wrench);
  const DynamicsResult k2 = dynamics_vector(x + 0.5 * dt * k1.xdot, um, mode, params, wrench);
  const DynamicsResult k3 = dynamics_vector(x + 0.5 * dt * k2.xdot, um, mode, params, wrench);
  const DynamicsResult k4 = dynamics_vector(x + dt * k3.xdot, u1, mode, params, wrench);
  StateVector xn = x + dt / 6.0 * (k1.xdot + 2.0 * k2.xdot + 2.0 * k3.xdot + k4.xdot);
  xn.segment<4>(3).normalize();

  StepResult out;
  out.x = FullState::from_vector(xn);
  out.liftoff = k1.liftoff || k2.liftoff || k3.liftoff || k4.liftoff;
  out.normal_force = k4.normal_force;
  if (mode == Mode::Terrestrial && !out.liftoff) out.x = project_to_ground(out.x);
  return out;
}

}  // namespace

StepResult integrate_rk4(const FullState &x, const ControlInput &u, Mode mode, double dt,
                         const PhysicalParams &params, const ExternalWrench &wrench) {
  const InputVector uv = u.to_vector();
  return rk4_impl(x, uv, uv, mode, dt, params, wrench);
}

StepResult integrate_rk4(const FullState &x, const ControlInput &u0, const ControlInput &u1,
                         Mode mode, double dt, const PhysicalParams &params,
                         const ExternalWrench &wrench) {
  return rk4_impl(x, u0.to_vector(), u1.to_vector(), mode, dt, params, wrench);
}

FullState project_to_ground(const FullState &x) {
  FullState out = x;
  out.p.z() = 0.0;
  out.v.z() = 0.0;
  const Vec3 y_b = x.q * Vec3::UnitY();
  Vec2 y_h(y_b.x(), y_b.y());
  if (y_h.norm() > 1e-9) {
    y_h.normalize();
    const Vec2 v_h(out.v.x(), out.v.y());
    const Vec2 v_proj = v_h - v_h.dot(y_h) * y_h;
    out.v.x() = v_proj.x();
    out.v.y() = v_proj.y();
  }
  return out;
}

double lateral_velocity(const FullState &x) { return (x.q.conjugate() * x.v).y(); }

Eigen::Matrix4d allocation_matrix(const PhysicalParams &params) {
  const double l = params.arm_length / std::sqrt(2.0);
  const double k = params.c_m / params.c_t;
  Eigen::Matrix4d A;
  A << 1.0, 1.0, 1.0, 1.0,
       -l, l, l, -l,
       -l, l, -l, l,
       -k, -k, k, k;
  return A;
}

ControlInput allocate_from_rotors(const RotorThrusts &t, const PhysicalParams &params) {
  return ControlInput::from_vector(allocation_matrix(params) * t.t);
}

AllocationResult rotors_from_input(const ControlInput &u, const PhysicalParams &params) {
  AllocationResult out;
  const Vec4 raw = allocation_matrix(params).partialPivLu().solve(u.to_vector());
  out.rotors.t = raw.cwiseMax(params.t_min).cwiseMin(params.t_max);
  // Tolerance keeps exact round-trips at the bounds from reporting saturation.
  out.saturated = ((raw - out.rotors.t).cwiseAbs().maxCoeff() > 1e-9);
  return out;
}

InputBounds input_bounds(const PhysicalParams &params) {
  const double tau_xy = std::sqrt(2.0) * params.arm_length * params.t_max;
  const double tau_z = 2.0 * (params.c_m / params.c_t) * params.t_max;
  InputBounds b;
  b.lower << 4.0 * params.t_min, -tau_xy, -tau_xy, -tau_z;
  b.upper << 4.0 * params.t_max, tau_xy, tau_xy, tau_z;
  return b;
}

}  // namespace tabv
