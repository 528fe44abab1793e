#pragma once

#include "tabv/common.hpp"
#include "tabv/world.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tabv {

struct SearchConfig {
  double v_max = 2.0;          // longitudinal (ground) and per-norm (air) speed limit [m/s]
  double a_max = 2.0;          // primitive acceleration magnitude per axis [m/s^2]
  double omega_max = 1.0;      // largest sampled heading rate [rad/s]
  int omega_samples = 5;
  double tau_p = 0.5;          // primitive duration [s]
  double rho_air = 3.0;        // cost multiplier on aerial primitives
  double d_s = 0.5;            // clearance required along primitives [m]
  double heuristic_weight = 1.0;
  int shot_interval = 10;      // analytic shot every K expansions
  double goal_tolerance = 0.3; // [m]
  double heading_tolerance = 0.3;  // [rad]
  double landing_vz_max = 0.5; // [m/s]
  double prune_cell_factor = 2.0;  // pruning cell = factor * map resolution
  double v_bin = 0.5;
  double phi_bin = 3.14159265358979323846 / 8.0;
  int max_expansions = 200000;
  bool allow_aerial = true;

  void validate() const;
};

// Search state. Terrestrial nodes use (p_xy, speed, phi); aerial nodes use (p, v).
struct SearchState {
  Mode mode = Mode::Terrestrial;
  Vec3 p = Vec3::Zero();
  double speed = 0.0;          // terrestrial longitudinal speed
  double phi = 0.0;            // terrestrial heading
  Vec3 v = Vec3::Zero();       // aerial velocity

  Vec3 velocity() const;
};

struct SearchGoal {
  Vec3 p = Vec3::Zero();
  std::optional<double> heading;
  double speed = 0.0;          // speed along the heading on arrival
};

// Successor produced by one primitive.
struct Primitive {
  SearchState end;
  Mode mode = Mode::Terrestrial;  // locomotion mode while executing the primitive
  double duration = 0.0;
  double cost = 0.0;
  Vec3 input = Vec3::Zero();      // (a, omega, 0) on the ground, a in the air
  std::vector<Vec3> samples;      // positions along the primitive
};

struct SearchResult {
  std::vector<Vec3> waypoints;    // M + 1 positions, first = start, last = goal
  std::vector<Vec3> velocities;   // M + 1 velocities at the waypoints
  std::vector<double> durations;  // M
  std::vector<Mode> modes;        // M
  std::vector<Vec3> path;         // dense samples for plotting
  std::vector<Mode> path_modes;
  std::vector<int> path_offsets;  // index in path of the first sample of each piece
  double cost = 0.0;
  int expanded = 0;
  double wall_time = 0.0;
  double cpu_time = 0.0;
  bool used_shot = false;

  int pieces() const { return static_cast<int>(durations.size()); }
  int mode_switches() const;
  double length() const;
};

class NoPathError : public Error {
 public:
  NoPathError(const std::string &what, int explored) : Error(what), explored_(explored) {}
  int explored() const { return explored_; }

 private:
  int explored_;
};

// Unicycle rollout (p_xy, v, phi) under constant (a, omega).
SearchState rollout_terrestrial(const SearchState &s, double a, double omega, double t);
// Double-integrator rollout.
SearchState rollout_aerial(const SearchState &s, const Vec3 &a, double t);

class HybridAStar {
 public:
  HybridAStar(const SearchConfig &config, WorldPtr world);

  const SearchConfig &config() const { return config_; }

  std::vector<Primitive> expand_terrestrial(const SearchState &s) const;
  // Aerial successors; from a terrestrial node these are takeoffs. Primitives
  // that reach the ground softly over free cells end as terrestrial nodes.
  std::vector<Primitive> expand_aerial(const SearchState &s) const;

  SearchResult search(const SearchState &start, const SearchGoal &goal) const;

 private:
  bool primitive_clear(const std::vector<Vec3> &samples, Mode mode) const;
  std::optional<Primitive> analytic_shot(const SearchState &s, const SearchGoal &goal) const;

  SearchConfig config_;
  WorldPtr world_;
};

}  // namespace tabv
