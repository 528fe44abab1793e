#include "tabv/kino_search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace tabv {

void SearchConfig::validate() const {
  if (!(v_max > 0.0 && a_max > 0.0 && omega_max >= 0.0 && tau_p > 0.0 && d_s >= 0.0))
    throw ConfigError("search: limits must be positive");
  if (omega_samples < 1) throw ConfigError("search: omega_samples must be at least 1");
  if (!(rho_air >= 1.0)) throw ConfigError("search: rho_air must be at least 1");
  if (!(heuristic_weight >= 1.0)) throw ConfigError("search: heuristic_weight must be at least 1");
  if (shot_interval < 1) throw ConfigError("search: shot_interval must be at least 1");
}

Vec3 SearchState::velocity() const {
  if (mode == Mode::Terrestrial) return Vec3(speed * std::cos(phi), speed * std::sin(phi), 0.0);
  return v;
}

int SearchResult::mode_switches() const {
  int n = 0;
  for (std::size_t i = 1; i < modes.size(); ++i) n += modes[i] != modes[i - 1];
  return n;
}

double SearchResult::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

SearchState rollout_terrestrial(const SearchState &s, double a, double omega, double t) {
  SearchState out = s;
  out.mode = Mode::Terrestrial;
  const double v0 = s.speed, v1 = s.speed + a * t;
  const double p0 = s.phi, p1 = s.phi + omega * t;
  if (std::abs(omega) < 1e-9) {
    const double d = v0 * t + 0.5 * a * t * t;
    out.p.x() += d * std::cos(p0);
    out.p.y() += d * std::sin(p0);
  } else {
    const double w = omega, w2 = omega * omega;
    out.p.x() += (v1 * std::sin(p1) - v0 * std::sin(p0)) / w + a * (std::cos(p1) - std::cos(p0)) / w2;
    out.p.y() += (-v1 * std::cos(p1) + v0 * std::cos(p0)) / w + a * (std::sin(p1) - std::sin(p0)) / w2;
  }
  out.p.z() = 0.0;
  out.speed = v1;
  out.phi = wrap_angle(p1);
  out.v = out.velocity();
  return out;
}

SearchState rollout_aerial(const SearchState &s, const Vec3 &a, double t) {
  SearchState out = s;
  out.mode = Mode::Aerial;
  const Vec3 v0 = s.velocity();
  out.p = s.p + v0 * t + 0.5 * a * t * t;
  out.v = v0 + a * t;
  const double vh = std::hypot(out.v.x(), out.v.y());
  if (vh > 1e-3) out.phi = std::atan2(out.v.y(), out.v.x());
  out.speed = vh;
  return out;
}

HybridAStar::HybridAStar(const SearchConfig &config, WorldPtr world) : config_(config), world_(std::move(world)) {
  config_.validate();
  if (!world_) throw ConfigError("search: world is required");
}

bool HybridAStar::primitive_clear(const std::vector<Vec3> &samples, Mode mode) const {
  for (const Vec3 &p : samples) {
    if (!world_->inside(p, mode)) return false;
    if (world_->clearance(p, mode) < config_.d_s) return false;
  }
  return true;
}

namespace {

constexpr double kSampleSpacing = 0.1;

int sample_count(double length) { return std::max(4, static_cast<int>(std::ceil(length / kSampleSpacing))); }

}  // namespace

std::vector<Primitive> HybridAStar::expand_terrestrial(const SearchState &s) const {
  std::vector<Primitive> out;
  const double tau = config_.tau_p;
  const double accels[3] = {-config_.a_max, 0.0, config_.a_max};
  for (double a : accels) {
    const double v1 = s.speed + a * tau;
    if (v1 < -1e-9 || v1 > config_.v_max + 1e-9) continue;
    for (int k = 0; k < config_.omega_samples; ++k) {
      const double omega = config_.omega_samples == 1
                               ? 0.0
                               : -config_.omega_max + 2.0 * config_.omega_max * k / (config_.omega_samples - 1);
      // No pivoting in place and no standing still.
      if (s.speed < 1e-9 && a <= 0.0) continue;
      Primitive prim;
      prim.mode = Mode::Terrestrial;
      prim.duration = tau;
      prim.cost = tau;
      prim.input = Vec3(a, omega, 0.0);
      const double length = std::max(s.speed, std::max(v1, 0.0)) * tau;
      const int n = sample_count(length);
      prim.samples.reserve(n);
      for (int i = 1; i <= n; ++i) prim.samples.push_back(rollout_terrestrial(s, a, omega, tau * i / n).p);
      prim.end = rollout_terrestrial(s, a, omega, tau);
      prim.end.speed = std::clamp(prim.end.speed, 0.0, config_.v_max);
      if (!primitive_clear(prim.samples, Mode::Terrestrial)) continue;
      out.push_back(std::move(prim));
    }
  }
  return out;
}

std::vector<Primitive> HybridAStar::expand_aerial(const SearchState &s) const {
  std::vector<Primitive> out;
  if (!config_.allow_aerial) return out;
  const double tau = config_.tau_p;
  const double am = config_.a_max;
  const bool takeoff = s.mode == Mode::Terrestrial;
  const Vec3 v0 = s.velocity();
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = -1; iy <= 1; ++iy) {
      for (int iz = -1; iz <= 1; ++iz) {
        if (takeoff && iz <= 0) continue;
        const Vec3 a(ix * am, iy * am, iz * am);
        // Touchdown: first time z returns to the ground within the primitive.
        double t_end = tau;
        bool lands = false;
        if (!takeoff) {
          const double z0 = s.p.z(), vz = v0.z(), az = a.z();
          double t_hit = -1.0;
          if (std::abs(az) < 1e-12) {
            if (vz < 0.0) t_hit = -z0 / vz;
          } else {
            double disc = vz * vz - 2.0 * az * z0;
            if (disc < 0.0 && disc > -1e-9) disc = 0.0;
            if (disc >= 0.0) {
              const double r1 = (-vz - std::sqrt(disc)) / az, r2 = (-vz + std::sqrt(disc)) / az;
              const double lo = std::min(r1, r2), hi = std::max(r1, r2);
              t_hit = lo > 1e-9 ? lo : (hi > 1e-9 ? hi : -1.0);
            }
          }
          if (t_hit > 0.0 && t_hit <= tau + 1e-9) {
            t_end = std::min(t_hit, tau);
            lands = true;
          }
        }
        if (lands && t_end < 0.1) continue;
        SearchState end = rollout_aerial(s, a, t_end);
        if (end.v.norm() > config_.v_max + 1e-9) continue;

        Primitive prim;
        prim.mode = Mode::Aerial;
        prim.duration = t_end;
        prim.cost = config_.rho_air * t_end;
        prim.input = a;
        const double length = std::max(v0.norm(), end.v.norm()) * t_end + 0.5 * am * t_end * t_end;
        const int n = sample_count(length);
        for (int i = 1; i <= n; ++i) {
          Vec3 p = rollout_aerial(s, a, t_end * i / n).p;
          if (lands && i == n) p.z() = 0.0;
          prim.samples.push_back(p);
        }
        if (!primitive_clear(prim.samples, Mode::Aerial)) continue;

        if (lands) {
          if (std::abs(end.v.z()) > config_.landing_vz_max + 1e-9) continue;
          SearchState ground;
          ground.mode = Mode::Terrestrial;
          ground.p = Vec3(end.p.x(), end.p.y(), 0.0);
          const double vh = std::hypot(end.v.x(), end.v.y());
          ground.speed = vh;
          ground.phi = vh > 1e-3 ? std::atan2(end.v.y(), end.v.x()) : s.phi;
          ground.v = ground.velocity();
          if (world_->clearance(ground.p, Mode::Terrestrial) < config_.d_s) continue;
          prim.end = ground;
        } else {
          if (end.p.z() <= 1e-9) continue;
          prim.end = end;
        }
        out.push_back(std::move(prim));
      }
    }
  }
  return out;
}

std::optional<Primitive> HybridAStar::analytic_shot(const SearchState &s, const SearchGoal &goal) const {
  if (s.mode != Mode::Terrestrial) return std::nullopt;
  const Vec2 p0 = s.p.head<2>(), p1 = goal.p.head<2>();
  const double dist = (p1 - p0).norm();
  if (dist < 1e-6) return std::nullopt;
  const Vec2 v0 = s.velocity().head<2>();
  const double goal_phi = goal.heading.value_or(std::atan2(p1.y() - p0.y(), p1.x() - p0.x()));
  const Vec2 v1 = goal.speed * Vec2(std::cos(goal_phi), std::sin(goal_phi));
  const double omega_lim = 1.5 * config_.omega_max;

  const double base = std::max(dist / config_.v_max, 0.5);
  for (double scale : {1.2, 1.5, 2.0, 3.0}) {
    const double T = base * scale;
    // Quintic per axis with zero boundary accelerations.
    Eigen::Matrix<double, 6, 2> c;
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    for (int ax = 0; ax < 2; ++ax) {
      const double x0 = p0(ax), dx0 = v0(ax), x1 = p1(ax), dx1 = v1(ax);
      c(0, ax) = x0;
      c(1, ax) = dx0;
      c(2, ax) = 0.0;
      const double h = x1 - x0 - dx0 * T;
      const double hv = dx1 - dx0;
      c(3, ax) = (10.0 * h - 4.0 * hv * T) / T3;
      c(4, ax) = (-15.0 * h + 7.0 * hv * T) / T4;
      c(5, ax) = (6.0 * h - 3.0 * hv * T) / T5;
    }
    const int n = std::max(20, sample_count(dist * 1.5));
    Primitive prim;
    prim.mode = Mode::Terrestrial;
    prim.duration = T;
    prim.cost = T;
    bool ok = true;
    double last_heading = s.phi;
    bool moving = s.speed > 0.05;
    for (int i = 1; i <= n && ok; ++i) {
      const double t = T * i / n;
      Eigen::Matrix<double, 1, 6> b0, b1, b2;
      for (int k = 0; k < 6; ++k) {
        b0(k) = std::pow(t, k);
        b1(k) = k >= 1 ? k * std::pow(t, k - 1) : 0.0;
        b2(k) = k >= 2 ? k * (k - 1) * std::pow(t, k - 2) : 0.0;
      }
      const Vec2 p = (b0 * c).transpose(), v = (b1 * c).transpose(), a = (b2 * c).transpose();
      const double speed = v.norm();
      if (speed > config_.v_max * 1.05 || a.norm() > config_.a_max * 1.2) ok = false;
      if (speed > 0.05) {
        const double heading = std::atan2(v.y(), v.x());
        // Forward-only: heading must evolve continuously from the node heading.
        const double jump = std::abs(wrap_angle(heading - last_heading));
        if (jump > (moving ? 0.5 : config_.heading_tolerance)) ok = false;
        if (std::abs(v.x() * a.y() - v.y() * a.x()) / (speed * speed) > omega_lim) ok = false;
        last_heading = heading;
        moving = true;
      }
      prim.samples.emplace_back(p.x(), p.y(), 0.0);
    }
    if (!ok) continue;
    if (goal.heading && std::abs(wrap_angle(last_heading - *goal.heading)) > config_.heading_tolerance) continue;
    if (!primitive_clear(prim.samples, Mode::Terrestrial)) continue;
    prim.end.mode = Mode::Terrestrial;
    prim.end.p = Vec3(p1.x(), p1.y(), 0.0);
    prim.end.speed = goal.speed;
    prim.end.phi = goal.heading.value_or(last_heading);
    prim.end.v = prim.end.velocity();
    return prim;
  }
  return std::nullopt;
}

namespace {

struct Node {
  SearchState state;
  double g = 0.0;
  int parent = -1;
  Primitive prim;
};

struct OpenEntry {
  double f, h;
  std::uint64_t seq;
  int node;
  bool operator>(const OpenEntry &o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    return seq > o.seq;
  }
};

}  // namespace

SearchResult HybridAStar::search(const SearchState &start, const SearchGoal &goal) const {
  const auto t0 = std::chrono::steady_clock::now();
  const double cpu0 = thread_cpu_time();
  if (!world_->inside(start.p, start.mode)) throw NoPathError("search: start outside the map", 0);
  if (!world_->inside(goal.p, Mode::Terrestrial)) throw NoPathError("search: goal outside the map", 0);

  auto finish = [&](SearchResult &r) {
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.cpu_time = thread_cpu_time() - cpu0;
    return r;
  };

  const bool heading_ok_start =
      !goal.heading || std::abs(wrap_angle(start.phi - *goal.heading)) <= config_.heading_tolerance;
  if ((start.p - goal.p).norm() <= 1e-9 && heading_ok_start) {
    SearchResult r;
    r.waypoints.push_back(start.p);
    r.velocities.push_back(start.velocity());
    r.path.push_back(start.p);
    r.path_modes.push_back(start.mode);
    return finish(r);
  }

  const double cell = config_.prune_cell_factor * world_->spec().ground_resolution;
  const double cell_air = config_.prune_cell_factor * world_->spec().air_resolution;
  const Vec3 org = world_->lower();
  auto key_of = [&](const SearchState &s) {
    const bool air = s.mode == Mode::Aerial;
    const double c = air ? cell_air : cell;
    auto q = [](double x, double h, int bits) {
      const std::int64_t v = static_cast<std::int64_t>(std::floor(x / h));
      return static_cast<std::uint64_t>(v & ((std::int64_t(1) << bits) - 1));
    };
    std::uint64_t k = air ? 1 : 0;
    k = (k << 14) | q(s.p.x() - org.x(), c, 14);
    k = (k << 14) | q(s.p.y() - org.y(), c, 14);
    if (air) {
      k = (k << 8) | q(s.p.z() - org.z(), c, 8);
      k = (k << 6) | q(s.v.x() + 16.0, config_.v_bin, 6);
      k = (k << 6) | q(s.v.y() + 16.0, config_.v_bin, 6);
      k = (k << 6) | q(s.v.z() + 16.0, config_.v_bin, 6);
    } else {
      k = (k << 8) | q(s.speed, config_.v_bin, 8);
      k = (k << 6) | q(wrap_angle(s.phi) + 3.14159265358979323846, config_.phi_bin, 6);
    }
    return k;
  };
  auto heuristic = [&](const SearchState &s) {
    // Airborne nodes must still descend to the ground at no more than v_max, at the aerial rate.
    const double descent = s.mode == Mode::Aerial ? (config_.rho_air - 1.0) * std::max(s.p.z(), 0.0) : 0.0;
    return config_.heuristic_weight * ((s.p - goal.p).norm() + descent) / config_.v_max;
  };
  auto at_goal = [&](const SearchState &s) {
    if (s.mode != Mode::Terrestrial) return false;
    if ((s.p - goal.p).norm() > config_.goal_tolerance) return false;
    if (goal.heading && std::abs(wrap_angle(s.phi - *goal.heading)) > config_.heading_tolerance) return false;
    return std::abs(s.speed - goal.speed) <= 0.5 * config_.v_bin;
  };

  std::vector<Node> nodes;
  nodes.reserve(4096);
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<OpenEntry>> open;
  std::unordered_map<std::uint64_t, double> best;
  std::unordered_set<std::uint64_t> closed;
  std::uint64_t seq = 0;

  Node root;
  root.state = start;
  root.state.v = start.velocity();
  nodes.push_back(root);
  open.push({heuristic(start), heuristic(start), seq++, 0});
  best[key_of(start)] = 0.0;

  int expanded = 0;
  int goal_node = -1;
  std::optional<Primitive> shot;
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    const SearchState cur_state = nodes[top.node].state;
    const double cur_g = nodes[top.node].g;
    const std::uint64_t key = key_of(cur_state);
    if (!closed.insert(key).second) continue;

    if (at_goal(cur_state)) {
      goal_node = top.node;
      break;
    }
    if (expanded % config_.shot_interval == 0) {
      shot = analytic_shot(cur_state, goal);
      if (shot) {
        goal_node = top.node;
        break;
      }
    }
    if (++expanded > config_.max_expansions) break;

    std::vector<Primitive> succ;
    if (cur_state.mode == Mode::Terrestrial) succ = expand_terrestrial(cur_state);
    auto air = expand_aerial(cur_state);
    succ.insert(succ.end(), std::make_move_iterator(air.begin()), std::make_move_iterator(air.end()));
    for (auto &prim : succ) {
      const double g = cur_g + prim.cost;
      const std::uint64_t k = key_of(prim.end);
      auto it = best.find(k);
      if (it != best.end() && it->second <= g) continue;
      best[k] = g;
      Node child;
      child.state = prim.end;
      child.g = g;
      child.parent = top.node;
      child.prim = std::move(prim);
      nodes.push_back(std::move(child));
      const double h = heuristic(nodes.back().state);
      open.push({g + h, h, seq++, static_cast<int>(nodes.size()) - 1});
    }
  }
  if (goal_node < 0) throw NoPathError("search: no path found", expanded);

  std::vector<int> chain;
  for (int n = goal_node; n > 0; n = nodes[n].parent) chain.push_back(n);
  std::reverse(chain.begin(), chain.end());

  SearchResult r;
  r.expanded = expanded;
  r.waypoints.push_back(start.p);
  r.velocities.push_back(start.velocity());
  r.path.push_back(start.p);
  r.path_modes.push_back(start.mode);
  auto append = [&](const Primitive &prim) {
    r.waypoints.push_back(prim.end.p);
    r.velocities.push_back(prim.end.velocity());
    r.durations.push_back(prim.duration);
    r.modes.push_back(prim.mode);
    r.path_offsets.push_back(static_cast<int>(r.path.size()));
    for (const Vec3 &p : prim.samples) {
      r.path.push_back(p);
      r.path_modes.push_back(prim.mode);
    }
    r.cost += prim.cost;
  };
  for (int n : chain) append(nodes[n].prim);
  if (shot) {
    append(*shot);
    r.used_shot = true;
  }
  // Start already within the goal tolerances: zero pieces.
  if (r.durations.empty()) return finish(r);
  r.waypoints.back() = goal.p;
  if (goal.heading)
    r.velocities.back() = goal.speed * Vec3(std::cos(*goal.heading), std::sin(*goal.heading), 0.0);
  return finish(r);
}

}  // namespace tabv
