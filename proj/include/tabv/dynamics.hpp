#pragma once

#include "tabv/common.hpp"

#include <Eigen/Core>

namespace tabv {

// Layout: [p(3), q(w,x,y,z)(4), v(3), omega(3)].
using StateVector = Eigen::Matrix<double, 13, 1>;
using InputVector = Eigen::Matrix<double, 4, 1>;

struct FullState {
  Vec3 p = Vec3::Zero();           // inertial position [m]
  Quat q = Quat::Identity();       // body-to-inertial attitude
  Vec3 v = Vec3::Zero();           // inertial velocity [m/s]
  Vec3 omega = Vec3::Zero();       // body rate [rad/s]

  StateVector to_vector() const;
  static FullState from_vector(const StateVector &x);
};

struct ControlInput {
  double thrust = 0.0;             // collective thrust [N]
  Vec3 torque = Vec3::Zero();      // body torque [N m]

  InputVector to_vector() const { return InputVector(thrust, torque.x(), torque.y(), torque.z()); }
  static ControlInput from_vector(const InputVector &u) { return {u(0), u.tail<3>()}; }
};

struct RotorThrusts {
  Vec4 t = Vec4::Zero();           // per-rotor thrust [N]
};

struct PhysicalParams {
  double mass = 0.91;
  Vec3 inertia = Vec3(7.7e-3, 3.4e-3, 7.3e-3);  // diagonal, kg m^2
  double arm_length = 0.23;
  double c_t = 1.7e-8;
  double c_m = 3.7e-10;
  double gravity = kGravity;
  double t_min = 0.0;
  double t_max = 4.5;

  void validate() const;
  double weight() const { return mass * gravity; }
  Mat3 inertia_matrix() const { return inertia.asDiagonal(); }
};

struct GroundContact {
  Mode mode = Mode::Aerial;
  double normal_force = 0.0;
};

// Disturbances injected by the simulator; zero in the nominal model.
struct ExternalWrench {
  Vec3 force = Vec3::Zero();       // inertial frame [N]
  Vec3 torque = Vec3::Zero();      // body frame [N m]
};

struct DynamicsResult {
  StateVector xdot = StateVector::Zero();
  double normal_force = 0.0;
  double lateral_force = 0.0;
  bool liftoff = false;            // terrestrial contact would need a pulling normal force
};

struct StepResult {
  FullState x;
  double normal_force = 0.0;
  bool liftoff = false;
};

struct AllocationResult {
  RotorThrusts rotors;
  bool saturated = false;
};

// Unified dynamics with algebraic ground contact. In terrestrial mode the
// normal force cancels vertical acceleration and an ideal lateral force keeps
// the body-lateral velocity at zero. Throws InvalidStateError when |q| != 1.
DynamicsResult continuous_dynamics(const FullState &x, const ControlInput &u, Mode mode,
                                   const PhysicalParams &params,
                                   const ExternalWrench &wrench = {});

// Same model on the raw vector, without the unit-quaternion check. Used inside
// integrators where stage states are slightly off the unit sphere.
DynamicsResult dynamics_vector(const StateVector &x, const InputVector &u, Mode mode,
                               const PhysicalParams &params, const ExternalWrench &wrench = {});

// Classical RK4 with zero-order-hold input.
StepResult integrate_rk4(const FullState &x, const ControlInput &u, Mode mode, double dt,
                         const PhysicalParams &params, const ExternalWrench &wrench = {});

// RK4 with the input interpolated linearly from u0 to u1 over the step.
StepResult integrate_rk4(const FullState &x, const ControlInput &u0, const ControlInput &u1,
                         Mode mode, double dt, const PhysicalParams &params,
                         const ExternalWrench &wrench = {});

// Snap a state onto the ground: z = 0, no vertical velocity, no lateral velocity.
FullState project_to_ground(const FullState &x);

// Lateral body velocity (q^-1 . v) . e2.
double lateral_velocity(const FullState &x);

Eigen::Matrix4d allocation_matrix(const PhysicalParams &params);
ControlInput allocate_from_rotors(const RotorThrusts &t, const PhysicalParams &params);
AllocationResult rotors_from_input(const ControlInput &u, const PhysicalParams &params);

struct InputBounds {
  InputVector lower;
  InputVector upper;
};

// Box bounds on [T, tau] derived from the rotor limits.
InputBounds input_bounds(const PhysicalParams &params);

}  // namespace tabv
