#pragma once

#include "tabv/common.hpp"
#include "tabv/dynamics.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace tabv {

// Flat output sample: position and its first three derivatives.
struct FlatSample {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Vec3 j = Vec3::Zero();
  Mode mode = Mode::Aerial;
};

struct ReferencePoint {
  double t = 0.0;
  FullState x;
  ControlInput u;
  GroundContact contact;
};

class FlatnessError : public Error {
 public:
  enum class Kind { YawUndefined, InfeasiblePitch, SingularThrust };
  FlatnessError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct FlatnessConfig {
  // Constant reference thrust on the ground, as a fraction of the weight.
  double terrestrial_thrust_ratio = 0.45;
  // Horizontal speed below which the heading is held rather than derived.
  double min_heading_speed = 1e-3;
  double initial_heading = 0.0;
};

// Caller-owned heading memory for hold-last-yaw at low speed.
struct YawContext {
  std::optional<double> last_yaw;
};

inline constexpr double kMinHeadingSpeed = 1e-3;

// psi = atan2(eta v_y, eta v_x); empty when the horizontal speed is below eps.
std::optional<double> yaw_from_velocity(const Vec3 &v, int eta = 1, double eps = kMinHeadingSpeed);

// Heading rate of the velocity direction, zero below eps.
double yaw_rate_from_velocity(const Vec3 &v, const Vec3 &a, double eps = kMinHeadingSpeed);

// Ground locomotion: pitch from the constant reference thrust, zero roll.
// The returned torque omits the angular-acceleration term (see fill_reference_torques).
ReferencePoint terrestrial_flat_to_state(const FlatSample &s, double thrust_ref,
                                         const PhysicalParams &params, YawContext &yaw,
                                         double eps = kMinHeadingSpeed);

// Flight: standard quadrotor map with heading along the velocity.
ReferencePoint aerial_flat_to_state(const FlatSample &s, const PhysicalParams &params,
                                    YawContext &yaw, double eps = kMinHeadingSpeed);

ReferencePoint flat_to_state(const FlatSample &s, const PhysicalParams &params,
                             const FlatnessConfig &config, YawContext &yaw);

// tau = M omega_dot + omega x M omega with omega_dot from central differences
// of the uniformly sampled sequence (one-sided at the ends).
void fill_reference_torques(std::vector<ReferencePoint> &refs, double dt,
                            const PhysicalParams &params);

// Flat trajectory interface shared by planned (MINCO) and analytic references.
class FlatTrajectory {
 public:
  virtual ~FlatTrajectory() = default;
  virtual double duration() const = 0;
  virtual FlatSample sample(double t) const = 0;
};

// Uniform sampling at dt (ceil(duration/dt)+1 points, last one clamped to the end)
// followed by flatness recovery and torque filling.
std::vector<ReferencePoint> sample_references(const FlatTrajectory &traj, double dt,
                                              const PhysicalParams &params,
                                              const FlatnessConfig &config);

// Open-loop check: integrate the recovered inputs (first-order hold) from the
// recovered initial state and report max |p_sim - p_flat|.
double flatness_roundtrip_check(const FlatTrajectory &traj, double dt,
                                const PhysicalParams &params, const FlatnessConfig &config);

void write_references_csv(std::ostream &os, const std::vector<ReferencePoint> &refs);
std::vector<ReferencePoint> read_references_csv(std::istream &is);

}  // namespace tabv
