#pragma once

#include "tabv/dynamics.hpp"

namespace tabv {

struct IndiConfig {
  bool enabled = true;
  double cutoff_hz = 12.0;
  double rate_hz = 200.0;
  int warmup_samples = 20;   // passthrough until the filters have settled

  void validate() const;
};

// Second-order Butterworth low-pass discretized with the bilinear transform
// (cutoff pre-warped). Direct form I, one channel per vector component.
class Butterworth2 {
 public:
  Butterworth2(double cutoff_hz, double rate_hz);
  // Starts the filter in steady state at x.
  void reset(const Vec3 &x);
  Vec3 step(const Vec3 &x);
  bool initialized() const { return initialized_; }
  // Magnitude of the discrete frequency response at f [Hz].
  double gain(double f_hz) const;

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double rate_;
  Vec3 x1_ = Vec3::Zero(), x2_ = Vec3::Zero(), y1_ = Vec3::Zero(), y2_ = Vec3::Zero();
  bool initialized_ = false;
};

struct FilteredSignals {
  Vec3 omega_hat = Vec3::Zero();
  Vec3 omega_dot_hat = Vec3::Zero();
  Vec3 tau_hat = Vec3::Zero();
  int samples = 0;
};

struct IndiOutput {
  Vec3 torque = Vec3::Zero();
  bool passthrough = true;
};

class IndiController {
 public:
  IndiController(const IndiConfig &config, const PhysicalParams &params);

  // Feeds one gyro sample and the torque applied over the last interval.
  const FilteredSignals &update_filters(const Vec3 &omega_meas, const Vec3 &tau_applied);

  // tau_d = tau_hat + M (omega_dot_des - omega_dot_hat) with
  // omega_dot_des = M^-1 (tau_nmpc - omega x M omega).
  IndiOutput torque_command(const Vec3 &tau_nmpc, const Vec3 &omega) const;

  // M omega_dot_hat - tau_hat + omega_hat x M omega_hat.
  Vec3 disturbance_estimate() const;

  const FilteredSignals &signals() const { return signals_; }
  bool warm() const { return signals_.samples >= config_.warmup_samples; }
  const IndiConfig &config() const { return config_; }
  void reset();

 private:
  IndiConfig config_;
  PhysicalParams params_;
  Butterworth2 omega_filter_;
  Butterworth2 tau_filter_;
  FilteredSignals signals_;
};

}  // namespace tabv
