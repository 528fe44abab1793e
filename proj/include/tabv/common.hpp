#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <ctime>
#include <stdexcept>
#include <string>

namespace tabv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kGravity = 9.81;

// Locomotion mode. The numeric value doubles as the ground-contact flag
// used in the dynamics and the optimizer: 1 = terrestrial, 0 = aerial.
enum class Mode : int { Aerial = 0, Terrestrial = 1 };

inline int mode_flag(Mode m) { return static_cast<int>(m); }
inline const char *mode_name(Mode m) { return m == Mode::Terrestrial ? "terrestrial" : "aerial"; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// CPU time consumed by the calling thread [s]. Unlike wall time it does not
// grow when more worker threads than cores share the machine.
inline double thread_cpu_time() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = 3.14159265358979323846;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace tabv
