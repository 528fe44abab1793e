#include "tabv/indi.hpp"

#include <cmath>
#include <complex>

namespace tabv {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void IndiConfig::validate() const {
  if (!(rate_hz > 0.0)) throw ConfigError("indi: rate_hz must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * rate_hz))
    throw ConfigError("indi: cutoff_hz must lie in (0, rate_hz / 2)");
  if (warmup_samples < 0) throw ConfigError("indi: warmup_samples must be non-negative");
}

Butterworth2::Butterworth2(double cutoff_hz, double rate_hz) : rate_(rate_hz) {
  const double k = std::tan(kPi * cutoff_hz / rate_hz);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k2);
  b0_ = k2 * norm;
  b1_ = 2.0 * b0_;
  b2_ = b0_;
  a1_ = 2.0 * (k2 - 1.0) * norm;
  a2_ = (1.0 - std::sqrt(2.0) * k + k2) * norm;
}

void Butterworth2::reset(const Vec3 &x) {
  x1_ = x2_ = y1_ = y2_ = x;
  initialized_ = true;
}

Vec3 Butterworth2::step(const Vec3 &x) {
  if (!initialized_) reset(x);
  const Vec3 y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = x;
  y2_ = y1_;
  y1_ = y;
  return y;
}

double Butterworth2::gain(double f_hz) const {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * f_hz / rate_);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((b0_ + b1_ * z1 + b2_ * z2) / (1.0 + a1_ * z1 + a2_ * z2));
}

IndiController::IndiController(const IndiConfig &config, const PhysicalParams &params)
    : config_(config),
      params_(params),
      omega_filter_(config.cutoff_hz, config.rate_hz),
      tau_filter_(config.cutoff_hz, config.rate_hz) {
  config_.validate();
}

void IndiController::reset() {
  omega_filter_ = Butterworth2(config_.cutoff_hz, config_.rate_hz);
  tau_filter_ = Butterworth2(config_.cutoff_hz, config_.rate_hz);
  signals_ = FilteredSignals{};
}

const FilteredSignals &IndiController::update_filters(const Vec3 &omega_meas, const Vec3 &tau_applied) {
  const Vec3 prev = signals_.omega_hat;
  signals_.omega_hat = omega_filter_.step(omega_meas);
  signals_.tau_hat = tau_filter_.step(tau_applied);
  signals_.omega_dot_hat = signals_.samples == 0 ? Vec3::Zero() : Vec3((signals_.omega_hat - prev) * config_.rate_hz);
  ++signals_.samples;
  return signals_;
}

IndiOutput IndiController::torque_command(const Vec3 &tau_nmpc, const Vec3 &omega) const {
  IndiOutput out;
  if (!config_.enabled || !warm()) {
    out.torque = tau_nmpc;
    return out;
  }
  const Vec3 &J = params_.inertia;
  const Vec3 omega_dot_des = (tau_nmpc - omega.cross(J.cwiseProduct(omega))).cwiseQuotient(J);
  out.torque = signals_.tau_hat + J.cwiseProduct(omega_dot_des - signals_.omega_dot_hat);
  out.passthrough = false;
  return out;
}

Vec3 IndiController::disturbance_estimate() const {
  const Vec3 &J = params_.inertia;
  const Vec3 &w = signals_.omega_hat;
  return J.cwiseProduct(signals_.omega_dot_hat) - signals_.tau_hat + w.cross(J.cwiseProduct(w));
}

}  // namespace tabv
