#include "tabv/flatness.hpp"
#include "tabv/trajectories.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace tabv;

namespace {

const PhysicalParams kParams;
constexpr double kPi = 3.14159265358979323846;

// Body rate from finite differences of the attitude: omega = 2 vec(q^-1 dq/dt).
template <class Recover>
Vec3 rate_from_attitude(const Recover &recover, double t, double h) {
  const Quat qm = recover(t - h), q0 = recover(t), qp0 = recover(t + h);
  Quat qp = qp0, qmm = qm;
  if (qp.coeffs().dot(q0.coeffs()) < 0.0) qp.coeffs() *= -1.0;
  if (qmm.coeffs().dot(q0.coeffs()) < 0.0) qmm.coeffs() *= -1.0;
  const Eigen::Vector4d dq = (qp.coeffs() - qmm.coeffs()) / (2.0 * h);
  const Quat dq_q(dq(3), dq(0), dq(1), dq(2));
  return 2.0 * (q0.conjugate() * dq_q).vec();
}

FlatSample circle(double t, double r, double v, double z, Mode mode) {
  const double w = v / r;
  FlatSample s;
  s.p = Vec3(r * std::cos(w * t), r * std::sin(w * t), z);
  s.v = Vec3(-r * w * std::sin(w * t), r * w * std::cos(w * t), 0.0);
  s.a = Vec3(-r * w * w * std::cos(w * t), -r * w * w * std::sin(w * t), 0.0);
  s.j = Vec3(r * w * w * w * std::sin(w * t), -r * w * w * w * std::cos(w * t), 0.0);
  s.mode = mode;
  return s;
}

}  // namespace

TEST(Yaw, AxisAligned) {
  EXPECT_NEAR(*yaw_from_velocity(Vec3(1, 0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(*yaw_from_velocity(Vec3(0, 2, 0)), kPi / 2.0, 1e-15);
  EXPECT_NEAR(std::abs(*yaw_from_velocity(Vec3(1, 0, 0), -1)), kPi, 1e-15);
  EXPECT_FALSE(yaw_from_velocity(Vec3(1e-6, 0, 3)).has_value());
}

TEST(Terrestrial, Cruise) {
  FlatSample s;
  s.v = Vec3(1, 1, 0);
  s.mode = Mode::Terrestrial;
  YawContext yaw;
  const ReferencePoint r = terrestrial_flat_to_state(s, 4.0, kParams, yaw);
  const Quat expect(Eigen::AngleAxisd(kPi / 4.0, Vec3::UnitZ()));
  EXPECT_NEAR(std::abs(r.x.q.coeffs().dot(expect.coeffs())), 1.0, 1e-12);
  EXPECT_LT(r.x.omega.norm(), 1e-12);
  EXPECT_NEAR(r.contact.normal_force, kParams.weight() - 4.0, 1e-12);
}

TEST(Terrestrial, PitchFromAcceleration) {
  FlatSample s;
  s.v = Vec3(1, 0, 0);
  s.a = Vec3(1, 0, 0);
  s.mode = Mode::Terrestrial;
  YawContext yaw;
  const ReferencePoint r = terrestrial_flat_to_state(s, 4.0, kParams, yaw);
  const Vec3 zb = r.x.q * Vec3::UnitZ();
  const double theta = std::atan2(zb.x(), zb.z());
  EXPECT_NEAR(std::sin(theta), 0.2275, 1e-12);
  EXPECT_NEAR(theta, std::asin(0.2275), 1e-12);
  EXPECT_NEAR(theta, 0.2295, 1e-4);
}

TEST(Terrestrial, InfeasiblePitch) {
  FlatSample s;
  s.v = Vec3(1, 0, 0);
  s.a = Vec3(5, 0, 0);
  s.mode = Mode::Terrestrial;
  YawContext yaw;
  try {
    terrestrial_flat_to_state(s, 4.0, kParams, yaw);
    FAIL();
  } catch (const FlatnessError &e) {
    EXPECT_EQ(e.kind(), FlatnessError::Kind::InfeasiblePitch);
  }
}

TEST(Terrestrial, CircleYawRate) {
  const double r = 2.0, v = 1.0, T_ref = 4.0;
  auto recover = [&](double t) {
    YawContext yaw;
    return terrestrial_flat_to_state(circle(t, r, v, 0.0, Mode::Terrestrial), T_ref, kParams, yaw);
  };
  const ReferencePoint ref = recover(0.3);
  const Vec3 zb = ref.x.q * Vec3::UnitZ();
  EXPECT_NEAR(ref.x.omega.z(), (v / r) * zb.z(), 1e-12);
  const Vec3 fd = rate_from_attitude([&](double t) { return recover(t).x.q; }, 0.3, 1e-5);
  EXPECT_LT((fd - ref.x.omega).norm(), 1e-6);
}

TEST(Aerial, Hover) {
  FlatSample s;
  s.p = Vec3(0, 0, 1);
  YawContext yaw;
  yaw.last_yaw = 0.0;
  const ReferencePoint r = aerial_flat_to_state(s, kParams, yaw);
  EXPECT_NEAR(std::abs(r.x.q.w()), 1.0, 1e-12);
  EXPECT_NEAR(r.u.thrust, 8.9271, 1e-4);
  EXPECT_LT(r.x.omega.norm(), 1e-12);
  EXPECT_LT(r.u.torque.norm(), 1e-12);
}

TEST(Aerial, TiltUnderHorizontalAcceleration) {
  FlatSample s;
  s.v = Vec3(1, 0, 0);
  s.a = Vec3(1, 0, 0);
  YawContext yaw;
  const ReferencePoint r = aerial_flat_to_state(s, kParams, yaw);
  const Vec3 zb = r.x.q * Vec3::UnitZ();
  EXPECT_NEAR(std::acos(zb.z()), std::atan(1.0 / 9.81), 1e-12);
  EXPECT_NEAR(std::acos(zb.z()), 0.1016, 5e-5);
  // Tilted forward: rotation about body y, z_B leans toward +x.
  EXPECT_GT(zb.x(), 0.0);
  EXPECT_NEAR(zb.y(), 0.0, 1e-12);
}

TEST(Aerial, VerticalJerkGivesNoRate) {
  FlatSample s;
  s.j = Vec3(0, 0, 1);
  YawContext yaw;
  yaw.last_yaw = 0.0;
  const ReferencePoint r = aerial_flat_to_state(s, kParams, yaw);
  EXPECT_LT(r.x.omega.norm(), 1e-12);
}

TEST(Aerial, RateMatchesAttitudeDifferences) {
  auto sample = [](double t) {
    FlatSample s;
    s.p = Vec3(std::sin(t), 0.5 * std::sin(2 * t), 1.0 + 0.2 * std::sin(3 * t));
    s.v = Vec3(std::cos(t), std::cos(2 * t), 0.6 * std::cos(3 * t));
    s.a = Vec3(-std::sin(t), -2 * std::sin(2 * t), -1.8 * std::sin(3 * t));
    s.j = Vec3(-std::cos(t), -4 * std::cos(2 * t), -5.4 * std::cos(3 * t));
    return s;
  };
  auto recover = [&](double t) {
    YawContext yaw;
    return aerial_flat_to_state(sample(t), kParams, yaw);
  };
  for (double t : {0.2, 0.9, 1.7}) {
    const Vec3 fd = rate_from_attitude([&](double tt) { return recover(tt).x.q; }, t, 1e-5);
    EXPECT_LT((fd - recover(t).x.omega).norm(), 1e-6) << "t = " << t;
  }
}

TEST(Aerial, SingularThrust) {
  FlatSample s;
  s.a = Vec3(0, 0, -9.81);
  YawContext yaw;
  EXPECT_THROW(aerial_flat_to_state(s, kParams, yaw), FlatnessError);
}

TEST(Sampling, LengthAndHoverEnds) {
  HoldTrajectory hold(Vec3(0, 0, 1), Mode::Aerial, 1.003);
  const auto refs = sample_references(hold, 0.07, kParams, FlatnessConfig{});
  EXPECT_EQ(refs.size(), static_cast<std::size_t>(std::ceil(1.003 / 0.07)) + 1);
  EXPECT_NEAR(refs.back().t, 1.003, 1e-12);
  for (const auto *r : {&refs.front(), &refs.back()}) {
    EXPECT_NEAR(r->u.thrust, kParams.weight(), 1e-12);
    EXPECT_LT(r->u.torque.norm(), 1e-12);
  }
}

TEST(Sampling, TerrestrialPiecesFlatAndNoSlip) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
  a.col(1) = Vec3(0.5, 0, 0);
  b.col(0) = Vec3(2, 1, 0);
  b.col(1) = Vec3(0.5, 0.8, 0);
  PolynomialTrajectory traj(oracle::quintic_through(a, b, 3.0), 3.0, Mode::Terrestrial);
  const auto refs = sample_references(traj, 0.01, kParams, FlatnessConfig{});
  for (const auto &r : refs) {
    EXPECT_EQ(r.x.p.z(), 0.0);
    EXPECT_LT(std::abs(lateral_velocity(r.x)), 1e-12);
  }
}

TEST(Roundtrip, Hover) {
  HoldTrajectory hold(Vec3(1, 2, 1), Mode::Aerial, 2.0);
  EXPECT_LE(flatness_roundtrip_check(hold, 1e-3, kParams, FlatnessConfig{}), 1e-9);
}

TEST(Roundtrip, AerialQuintic) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
  a.col(0) = Vec3(0, 0, 1);
  a.col(1) = Vec3(0.5, 0, 0);
  b.col(0) = Vec3(2, 1, 1.5);
  b.col(1) = Vec3(0.5, 0.5, 0);
  PolynomialTrajectory traj(oracle::quintic_through(a, b, 2.0), 2.0, Mode::Aerial);
  EXPECT_LE(flatness_roundtrip_check(traj, 1e-3, kParams, FlatnessConfig{}), 1e-3);
}

TEST(Roundtrip, TerrestrialStraightAcceleration) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
  a.col(1) = Vec3(0.2, 0, 0);
  b.col(0) = Vec3(1.8, 0, 0);
  b.col(1) = Vec3(1.5, 0, 0);
  PolynomialTrajectory traj(oracle::quintic_through(a, b, 2.0), 2.0, Mode::Terrestrial);
  EXPECT_LE(flatness_roundtrip_check(traj, 1e-3, kParams, FlatnessConfig{}), 1e-3);
  for (const auto &r : sample_references(traj, 1e-3, kParams, FlatnessConfig{})) EXPECT_EQ(r.x.p.z(), 0.0);
}

TEST(Roundtrip, ModeSwitchKeepsYawContinuous) {
  // Straight run along +x, takeoff halfway with matching derivatives.
  LemniscateParams lp;
  lp.height = 1.0;
  lp.phase0 = kPi;
  lp.rate = 0.4;
  LemniscateTrajectory traj(lp);
  const auto refs = sample_references(traj, 1e-3, kParams, FlatnessConfig{});
  int switches = 0;
  for (std::size_t k = 1; k < refs.size(); ++k) {
    if (refs[k].contact.mode == refs[k - 1].contact.mode) continue;
    ++switches;
    EXPECT_LT((refs[k].x.p - refs[k - 1].x.p).norm(), 1e-2);
    EXPECT_LT((refs[k].x.v - refs[k - 1].x.v).norm(), 1e-2);
    const double y0 = *yaw_from_velocity(refs[k - 1].x.v), y1 = *yaw_from_velocity(refs[k].x.v);
    EXPECT_LT(std::abs(wrap_angle(y1 - y0)), 1e-2);
  }
  EXPECT_GE(switches, 1);
}

TEST(ReferenceCsv, RoundTrip) {
  HoldTrajectory hold(Vec3(0.1, 0.2, 0.3), Mode::Aerial, 0.05);
  const auto refs = sample_references(hold, 0.01, kParams, FlatnessConfig{});
  std::stringstream ss;
  write_references_csv(ss, refs);
  const auto back = read_references_csv(ss);
  ASSERT_EQ(back.size(), refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    EXPECT_EQ(back[k].x.p, refs[k].x.p);
    EXPECT_EQ(back[k].u.thrust, refs[k].u.thrust);
    EXPECT_EQ(back[k].contact.mode, refs[k].contact.mode);
  }
}
