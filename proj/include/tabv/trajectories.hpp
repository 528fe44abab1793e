#pragma once

#include "tabv/flatness.hpp"
#include "tabv/minco.hpp"

#include <vector>

namespace tabv {

// MINCO trajectory with a locomotion mode per piece. Terrestrial pieces are
// reported with zero vertical components.
class PlannedTrajectory : public FlatTrajectory {
 public:
  PlannedTrajectory(MincoTrajectory traj, std::vector<Mode> modes);
  double duration() const override { return traj_.duration(); }
  FlatSample sample(double t) const override;
  const MincoTrajectory &minco() const { return traj_; }
  const std::vector<Mode> &modes() const { return modes_; }

 private:
  MincoTrajectory traj_;
  std::vector<Mode> modes_;
};

// Stationary flat output (hover in the air or rest on the ground).
class HoldTrajectory : public FlatTrajectory {
 public:
  HoldTrajectory(const Vec3 &p, Mode mode, double duration) : p_(p), mode_(mode), duration_(duration) {}
  double duration() const override { return duration_; }
  FlatSample sample(double t) const override;

 private:
  Vec3 p_;
  Mode mode_;
  double duration_;
};

// Single quintic piece p(t) = sum_k c_k t^k over [0, duration].
class PolynomialTrajectory : public FlatTrajectory {
 public:
  PolynomialTrajectory(const Eigen::Matrix<double, 6, 3> &coeffs, double duration, Mode mode)
      : c_(coeffs), duration_(duration), mode_(mode) {}
  double duration() const override { return duration_; }
  FlatSample sample(double t) const override;

 private:
  Eigen::Matrix<double, 6, 3> c_;
  double duration_;
  Mode mode_;
};

// Figure-eight of Gerono, x = A sin(phi), y = (B/2) sin(2 phi), driven by a
// phase whose rate ramps smoothly from rest to a cruise rate and back.
// With height > 0 the vehicle flies the half-cycles where sin(phi) > 0:
// z = height * sin(phi)^4 there and the ground elsewhere.
struct LemniscateParams {
  Vec3 center = Vec3::Zero();
  double a = 4.0;
  double b = 4.0;
  double height = 0.0;
  double rate = 0.3;       // cruise phase rate [rad/s]
  double ramp = 3.0;       // ramp-up and ramp-down time [s]
  double laps = 1.0;
  double phase0 = 0.0;
};

class LemniscateTrajectory : public FlatTrajectory {
 public:
  explicit LemniscateTrajectory(const LemniscateParams &params);
  double duration() const override { return duration_; }
  FlatSample sample(double t) const override;
  const LemniscateParams &params() const { return params_; }
  // Heading of the velocity when leaving the start point.
  double initial_heading() const;

  // Largest cruise rate keeping |v| <= v_max and |a| <= a_max (the ramps
  // stay within the acceleration bound when ramp is long enough).
  static double fit_rate(const LemniscateParams &shape, double v_max, double a_max);
  // Peak speed and acceleration over a dense sampling.
  void peaks(double &v_peak, double &a_peak, double dt = 1e-3) const;

 private:
  void phase(double t, double &phi, double &dphi, double &ddphi, double &dddphi) const;

  LemniscateParams params_;
  double cruise_ = 0.0;
  double duration_ = 0.0;
};

}  // namespace tabv
