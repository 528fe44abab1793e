#include "tabv/trajectories.hpp"

#include <algorithm>
#include <cmath>

namespace tabv {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

}  // namespace

PlannedTrajectory::PlannedTrajectory(MincoTrajectory traj, std::vector<Mode> modes)
    : traj_(std::move(traj)), modes_(std::move(modes)) {
  if (static_cast<int>(modes_.size()) != traj_.pieces())
    throw Error("planned trajectory: one mode per piece required");
}

FlatSample PlannedTrajectory::sample(double t) const {
  double local = 0.0;
  const int i = traj_.locate(t, local);
  FlatSample s;
  s.p = traj_.eval_piece(i, local, 0);
  s.v = traj_.eval_piece(i, local, 1);
  s.a = traj_.eval_piece(i, local, 2);
  s.j = traj_.eval_piece(i, local, 3);
  s.mode = modes_[i];
  if (s.mode == Mode::Terrestrial) s.p.z() = s.v.z() = s.a.z() = s.j.z() = 0.0;
  return s;
}

FlatSample HoldTrajectory::sample(double) const {
  FlatSample s;
  s.p = p_;
  if (mode_ == Mode::Terrestrial) s.p.z() = 0.0;
  s.mode = mode_;
  return s;
}

FlatSample PolynomialTrajectory::sample(double t) const {
  t = std::clamp(t, 0.0, duration_);
  FlatSample s;
  s.p = (poly_basis(t, 0) * c_).transpose();
  s.v = (poly_basis(t, 1) * c_).transpose();
  s.a = (poly_basis(t, 2) * c_).transpose();
  s.j = (poly_basis(t, 3) * c_).transpose();
  s.mode = mode_;
  if (mode_ == Mode::Terrestrial) s.p.z() = s.v.z() = s.a.z() = s.j.z() = 0.0;
  return s;
}

LemniscateTrajectory::LemniscateTrajectory(const LemniscateParams &params) : params_(params) {
  if (!(params.rate > 0.0 && params.ramp >= 0.0 && params.laps > 0.0))
    throw ConfigError("lemniscate: rate and laps must be positive");
  cruise_ = params.laps * kTwoPi / params.rate - params.ramp;
  if (cruise_ < 0.0) throw ConfigError("lemniscate: ramp too long for the requested laps");
  duration_ = cruise_ + 2.0 * params.ramp;
}

void LemniscateTrajectory::phase(double t, double &phi, double &dphi, double &ddphi, double &dddphi) const {
  const double w = params_.rate, Tr = params_.ramp;
  t = std::clamp(t, 0.0, duration_);
  auto S = [](double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); };
  auto dS = [](double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); };
  auto ddS = [](double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); };
  auto I = [](double u) { return u * u * u * u * (2.5 + u * (-3.0 + u)); };
  if (Tr > 0.0 && t < Tr) {
    const double u = t / Tr;
    phi = params_.phase0 + w * Tr * I(u);
    dphi = w * S(u);
    ddphi = w * dS(u) / Tr;
    dddphi = w * ddS(u) / (Tr * Tr);
  } else if (t <= Tr + cruise_) {
    phi = params_.phase0 + 0.5 * w * Tr + w * (t - Tr);
    dphi = w;
    ddphi = dddphi = 0.0;
  } else {
    const double u = (t - Tr - cruise_) / Tr;
    phi = params_.phase0 + 0.5 * w * Tr + w * cruise_ + w * Tr * (u - I(u));
    dphi = w * (1.0 - S(u));
    ddphi = -w * dS(u) / Tr;
    dddphi = -w * ddS(u) / (Tr * Tr);
  }
}

FlatSample LemniscateTrajectory::sample(double t) const {
  double phi, d1, d2, d3;
  phase(t, phi, d1, d2, d3);
  const double A = params_.a, B = params_.b, h = params_.height;
  const double s = std::sin(phi), c = std::cos(phi), s2 = std::sin(2.0 * phi), c2 = std::cos(2.0 * phi);
  Vec3 f0(A * s, 0.5 * B * s2, 0.0);
  Vec3 f1(A * c, B * c2, 0.0);
  Vec3 f2(-A * s, -2.0 * B * s2, 0.0);
  Vec3 f3(-A * c, -4.0 * B * c2, 0.0);
  const bool airborne = h > 0.0 && s > 0.0;
  if (airborne) {
    f0.z() = h * s * s * s * s;
    f1.z() = 4.0 * h * s * s * s * c;
    f2.z() = h * (12.0 * s * s * c * c - 4.0 * s * s * s * s);
    f3.z() = h * (24.0 * s * c * c * c - 40.0 * s * s * s * c);
  }
  FlatSample out;
  out.p = params_.center + f0;
  out.v = f1 * d1;
  out.a = f2 * d1 * d1 + f1 * d2;
  out.j = f3 * d1 * d1 * d1 + 3.0 * f2 * d1 * d2 + f1 * d3;
  out.mode = airborne ? Mode::Aerial : Mode::Terrestrial;
  return out;
}

double LemniscateTrajectory::initial_heading() const {
  const double phi = params_.phase0;
  return std::atan2(params_.b * std::cos(2.0 * phi), params_.a * std::cos(phi));
}

double LemniscateTrajectory::fit_rate(const LemniscateParams &shape, double v_max, double a_max) {
  double v_unit = 0.0, a_unit = 0.0;
  const double A = shape.a, B = shape.b, h = shape.height;
  for (int k = 0; k < 4000; ++k) {
    const double phi = kTwoPi * k / 4000.0;
    const double s = std::sin(phi), c = std::cos(phi);
    Vec3 f1(A * c, B * std::cos(2.0 * phi), 0.0);
    Vec3 f2(-A * s, -2.0 * B * std::sin(2.0 * phi), 0.0);
    if (h > 0.0 && s > 0.0) {
      f1.z() = 4.0 * h * s * s * s * c;
      f2.z() = h * (12.0 * s * s * c * c - 4.0 * s * s * s * s);
    }
    v_unit = std::max(v_unit, f1.norm());
    a_unit = std::max(a_unit, f2.norm());
  }
  return std::min(v_max / v_unit, std::sqrt(a_max / a_unit));
}

void LemniscateTrajectory::peaks(double &v_peak, double &a_peak, double dt) const {
  v_peak = a_peak = 0.0;
  for (double t = 0.0; t <= duration_; t += dt) {
    const FlatSample s = sample(t);
    v_peak = std::max(v_peak, s.v.norm());
    a_peak = std::max(a_peak, s.a.norm());
  }
}

}  // namespace tabv
