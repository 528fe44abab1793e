#include "tabv/dynamics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tabv;

namespace {

const PhysicalParams kParams;

FullState level_at(const Vec3 &p) {
  FullState x;
  x.p = p;
  return x;
}

}  // namespace

TEST(Dynamics, HoverIsEquilibrium) {
  const FullState x = level_at(Vec3(0, 0, 1));
  const ControlInput u{kParams.weight(), Vec3::Zero()};
  EXPECT_NEAR(u.thrust, 8.9271, 1e-9);
  const DynamicsResult r = continuous_dynamics(x, u, Mode::Aerial, kParams);
  EXPECT_LT(r.xdot.norm(), 1e-12);
}

TEST(Dynamics, GroundRestCarriesWeight) {
  const FullState x = level_at(Vec3::Zero());
  const DynamicsResult r = continuous_dynamics(x, ControlInput{}, Mode::Terrestrial, kParams);
  EXPECT_NEAR(r.normal_force, kParams.weight(), 1e-12);
  EXPECT_LT(r.xdot.segment<3>(7).norm(), 1e-12);
  EXPECT_FALSE(r.liftoff);
}

TEST(Dynamics, PureYawTorque) {
  const FullState x = level_at(Vec3::Zero());
  const double tz = 0.02;
  const DynamicsResult r = continuous_dynamics(x, ControlInput{0.0, Vec3(0, 0, tz)}, Mode::Terrestrial, kParams);
  EXPECT_NEAR(r.xdot(10), 0.0, 1e-12);
  EXPECT_NEAR(r.xdot(11), 0.0, 1e-12);
  EXPECT_NEAR(r.xdot(12), tz / kParams.inertia.z(), 1e-12);
}

TEST(Dynamics, NonUnitQuaternionRejected) {
  FullState x = level_at(Vec3::Zero());
  x.q = Quat(1.1, 0, 0, 0);
  EXPECT_THROW(continuous_dynamics(x, ControlInput{}, Mode::Aerial, kParams), InvalidStateError);
}

TEST(Dynamics, TerrestrialLiftoffSignal) {
  const FullState x = level_at(Vec3::Zero());
  const DynamicsResult r = continuous_dynamics(x, ControlInput{2.0 * kParams.weight(), Vec3::Zero()},
                                               Mode::Terrestrial, kParams);
  EXPECT_TRUE(r.liftoff);
}

TEST(Dynamics, GroundMotionHasNoLateralSlip) {
  FullState x = level_at(Vec3::Zero());
  x.q = Quat(Eigen::AngleAxisd(0.7, Vec3::UnitZ()));
  x.v = x.q * Vec3(1.0, 0.0, 0.0);
  x.omega = Vec3(0, 0, 0.5);
  FullState s = x;
  for (int i = 0; i < 1000; ++i) s = integrate_rk4(s, ControlInput{4.0, Vec3(0, 0.01, 0)}, Mode::Terrestrial, 1e-3, kParams).x;
  EXPECT_EQ(s.p.z(), 0.0);
  EXPECT_LT(std::abs(lateral_velocity(s)), 1e-9);
}

TEST(Allocation, SymmetricThrusts) {
  RotorThrusts t;
  t.t = Vec4(2, 2, 2, 2);
  const ControlInput u = allocate_from_rotors(t, kParams);
  EXPECT_NEAR(u.thrust, 8.0, 1e-12);
  EXPECT_LT(u.torque.norm(), 1e-12);
}

TEST(Allocation, RollTorqueFromTwoRotors) {
  RotorThrusts t;
  t.t = Vec4(0, 1, 1, 0);
  const ControlInput u = allocate_from_rotors(t, kParams);
  EXPECT_NEAR(u.torque.x(), 2.0 * 0.23 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(u.torque.x(), 0.3253, 5e-5);
}

TEST(Allocation, YawTorqueFromDrag) {
  RotorThrusts t;
  t.t = Vec4(1, 1, 0, 0);
  const ControlInput u = allocate_from_rotors(t, kParams);
  EXPECT_NEAR(u.torque.z(), -2.0 * 3.7e-10 / 1.7e-8, 1e-12);
  EXPECT_NEAR(u.torque.z(), -0.04353, 5e-6);
}

TEST(Allocation, InverseOfSymmetricCase) {
  const AllocationResult r = rotors_from_input(ControlInput{8.0, Vec3::Zero()}, kParams);
  EXPECT_FALSE(r.saturated);
  EXPECT_LT((r.rotors.t - Vec4(2, 2, 2, 2)).norm(), 1e-12);
  const AllocationResult z = rotors_from_input(ControlInput{}, kParams);
  EXPECT_LT(z.rotors.t.norm(), 1e-12);
}

TEST(Allocation, RoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(kParams.t_min, kParams.t_max);
  for (int k = 0; k < 100; ++k) {
    RotorThrusts t;
    t.t = Vec4(d(rng), d(rng), d(rng), d(rng));
    const AllocationResult r = rotors_from_input(allocate_from_rotors(t, kParams), kParams);
    EXPECT_LT((r.rotors.t - t.t).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Allocation, SaturationFlag) {
  const AllocationResult r = rotors_from_input(ControlInput{30.0, Vec3::Zero()}, kParams);
  EXPECT_TRUE(r.saturated);
  EXPECT_LE(r.rotors.t.maxCoeff(), kParams.t_max + 1e-12);
}

TEST(Integrator, HoverDrift) {
  FullState x = level_at(Vec3(0, 0, 1));
  const ControlInput u{kParams.weight(), Vec3::Zero()};
  for (int i = 0; i < 1000; ++i) x = integrate_rk4(x, u, Mode::Aerial, 1e-3, kParams).x;
  EXPECT_LE((x.p - Vec3(0, 0, 1)).norm(), 1e-6);
}

TEST(Integrator, FreeFall) {
  FullState x = level_at(Vec3(0, 0, 5));
  for (int i = 0; i < 100; ++i) x = integrate_rk4(x, ControlInput{}, Mode::Aerial, 1e-3, kParams).x;
  EXPECT_NEAR(x.p.z() - 5.0, -0.5 * 9.81 * 0.01, 1e-7);
}

TEST(Integrator, GroundStaysFlat) {
  FullState x = level_at(Vec3::Zero());
  x.q = Quat(Eigen::AngleAxisd(0.1, Vec3::UnitY()));
  for (int i = 0; i < 500; ++i) x = integrate_rk4(x, ControlInput{4.0, Vec3::Zero()}, Mode::Terrestrial, 1e-3, kParams).x;
  EXPECT_EQ(x.p.z(), 0.0);
  EXPECT_GT(x.p.x(), 0.0);
}

TEST(Bounds, FromRotorLimits) {
  const InputBounds b = input_bounds(kParams);
  EXPECT_NEAR(b.upper(0), 4.0 * kParams.t_max, 1e-12);
  EXPECT_NEAR(b.upper(1), std::sqrt(2.0) * kParams.arm_length * kParams.t_max, 1e-12);
  EXPECT_NEAR(b.upper(3), 2.0 * kParams.c_m / kParams.c_t * kParams.t_max, 1e-12);
  EXPECT_NEAR(b.lower(1), -b.upper(1), 1e-12);
}
