#include "tabv/io.hpp"

namespace tabv {

JsonReader::JsonReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError("config: '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
}

std::string JsonReader::key_path(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

const Json &JsonReader::at(const std::string &key, bool (Json::*is)() const noexcept, const char *expected) {
  used_.insert(key);
  const Json &v = j_.at(key);
  if (!(v.*is)()) throw ConfigError("config: key '" + key_path(key) + "' expects " + expected);
  return v;
}

void JsonReader::get(const std::string &key, double &out) {
  if (has(key)) out = at(key, &Json::is_number, "a number").get<double>();
}

void JsonReader::get(const std::string &key, int &out) {
  if (has(key)) out = at(key, &Json::is_number_integer, "an integer").get<int>();
}

void JsonReader::get(const std::string &key, std::uint64_t &out) {
  if (!has(key)) return;
  const Json &v = at(key, &Json::is_number_integer, "a non-negative integer");
  if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
    throw ConfigError("config: key '" + key_path(key) + "' expects a non-negative integer");
  out = v.get<std::uint64_t>();
}

void JsonReader::get(const std::string &key, bool &out) {
  if (has(key)) out = at(key, &Json::is_boolean, "a boolean").get<bool>();
}

void JsonReader::get(const std::string &key, std::string &out) {
  if (has(key)) out = at(key, &Json::is_string, "a string").get<std::string>();
}

template <int N>
void JsonReader::get_fixed(const std::string &key, Eigen::Matrix<double, N, 1> &out) {
  if (!has(key)) return;
  const Json &v = at(key, &Json::is_array, "an array");
  if (static_cast<int>(v.size()) != N)
    throw ConfigError("config: key '" + key_path(key) + "' expects " + std::to_string(N) + " numbers");
  for (int i = 0; i < N; ++i) {
    if (!v[i].is_number())
      throw ConfigError("config: key '" + key_path(key) + "' expects " + std::to_string(N) + " numbers");
    out(i) = v[i].get<double>();
  }
}

template void JsonReader::get_fixed<13>(const std::string &, Eigen::Matrix<double, 13, 1> &);

void JsonReader::get(const std::string &key, Vec2 &out) { get_fixed<2>(key, out); }
void JsonReader::get(const std::string &key, Vec3 &out) { get_fixed<3>(key, out); }
void JsonReader::get(const std::string &key, Vec4 &out) { get_fixed<4>(key, out); }

void JsonReader::get(const std::string &key, Mode &out) {
  if (!has(key)) return;
  const std::string s = at(key, &Json::is_string, "\"aerial\" or \"terrestrial\"").get<std::string>();
  if (s == "aerial")
    out = Mode::Aerial;
  else if (s == "terrestrial")
    out = Mode::Terrestrial;
  else
    throw ConfigError("config: key '" + key_path(key) + "' expects \"aerial\" or \"terrestrial\"");
}

const Json &JsonReader::raw(const std::string &key) {
  if (!has(key)) throw ConfigError("config: missing key '" + key_path(key) + "'");
  used_.insert(key);
  return j_.at(key);
}

JsonReader JsonReader::child(const std::string &key) { return JsonReader(raw(key), key_path(key)); }

void JsonReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it)
    if (!used_.count(it.key())) throw ConfigError("config: unknown key '" + key_path(it.key()) + "'");
}

void read_json(JsonReader &r, PhysicalParams &p) {
  r.get("mass", p.mass);
  r.get("inertia", p.inertia);
  r.get("arm_length", p.arm_length);
  r.get("c_t", p.c_t);
  r.get("c_m", p.c_m);
  r.get("gravity", p.gravity);
  r.get("t_min", p.t_min);
  r.get("t_max", p.t_max);
  r.finish();
  p.validate();
}

void read_json(JsonReader &r, SearchConfig &c) {
  r.get("v_max", c.v_max);
  r.get("a_max", c.a_max);
  r.get("omega_max", c.omega_max);
  r.get("omega_samples", c.omega_samples);
  r.get("tau_p", c.tau_p);
  r.get("rho_air", c.rho_air);
  r.get("d_s", c.d_s);
  r.get("heuristic_weight", c.heuristic_weight);
  r.get("shot_interval", c.shot_interval);
  r.get("goal_tolerance", c.goal_tolerance);
  r.get("heading_tolerance", c.heading_tolerance);
  r.get("landing_vz_max", c.landing_vz_max);
  r.get("prune_cell_factor", c.prune_cell_factor);
  r.get("v_bin", c.v_bin);
  r.get("phi_bin", c.phi_bin);
  r.get("max_expansions", c.max_expansions);
  r.get("allow_aerial", c.allow_aerial);
  r.finish();
  c.validate();
}

void read_json(JsonReader &r, OptimizerConfig &c) {
  r.get("lambda", c.lambda);
  r.get("v_max", c.v_max);
  r.get("a_max", c.a_max);
  r.get("omega_max", c.omega_max);
  r.get("alpha_max", c.alpha_max);
  r.get("d_s", c.d_s);
  r.get("kappa", c.kappa);
  r.get("smooth_eps", c.smooth_eps);
  r.get("heading_delta", c.heading_delta);
  r.get("audit_heading_speed", c.audit_heading_speed);
  r.get("penalty_rounds", c.penalty_rounds);
  r.get("penalty_growth", c.penalty_growth);
  r.get("feasibility_tol", c.feasibility_tol);
  if (r.has("solver")) {
    JsonReader s = r.child("solver");
    s.get("memory", c.solver.memory);
    s.get("g_epsilon", c.solver.g_epsilon);
    s.get("past", c.solver.past);
    s.get("delta", c.solver.delta);
    s.get("max_iterations", c.solver.max_iterations);
    s.get("max_linesearch", c.solver.max_linesearch);
    s.finish();
  }
  r.finish();
  c.validate();
}

void read_json(JsonReader &r, NmpcConfig &c) {
  r.get("horizon", c.horizon);
  r.get("dt", c.dt);
  r.get_fixed<13>("w_x", c.w_x);
  r.get("w_u", c.w_u);
  r.get("mode_weight", c.mode_weight);
  r.get("sqp_iterations", c.sqp_iterations);
  r.get("regularization", c.regularization);
  r.get("qp_max_iterations", c.qp_max_iterations);
  r.get("qp_tolerance", c.qp_tolerance);
  r.finish();
  c.validate();
}

void read_json(JsonReader &r, IndiConfig &c) {
  r.get("enabled", c.enabled);
  r.get("cutoff_hz", c.cutoff_hz);
  r.get("rate_hz", c.rate_hz);
  r.get("warmup_samples", c.warmup_samples);
  r.finish();
  c.validate();
}

void read_json(JsonReader &r, SimConfig &c) {
  r.get("dt_sim", c.dt_sim);
  r.get("dt_ctrl", c.dt_ctrl);
  r.get("gyro_noise", c.gyro_noise);
  r.get("seed", c.seed);
  r.get("duration", c.duration);
  r.get("touchdown_height", c.touchdown_height);
  r.get("touchdown_vz", c.touchdown_vz);
  r.get("divergence_margin", c.divergence_margin);
  if (r.has("disturbance")) {
    JsonReader d = r.child("disturbance");
    d.get("torque", c.disturbance.torque);
    d.get("force", c.disturbance.force);
    d.get("start_time", c.disturbance.start_time);
    d.finish();
  }
  r.finish();
  c.validate();
}

void read_json(JsonReader &r, FlatnessConfig &c) {
  r.get("terrestrial_thrust_ratio", c.terrestrial_thrust_ratio);
  r.get("min_heading_speed", c.min_heading_speed);
  r.finish();
  if (!(c.terrestrial_thrust_ratio > 0.0 && c.terrestrial_thrust_ratio < 1.0))
    throw ConfigError("config: key '" + r.key_path("terrestrial_thrust_ratio") + "' must lie in (0, 1)");
}

void read_json(JsonReader &r, ForestParams &c) {
  r.get("extent", c.extent);
  r.get("height", c.height);
  r.get("count", c.count);
  r.get("min_radius", c.min_radius);
  r.get("max_radius", c.max_radius);
  r.get("min_height", c.min_height);
  r.get("max_height", c.max_height);
  r.get("tall_fraction", c.tall_fraction);
  r.get("start", c.start);
  r.get("goal", c.goal);
  r.get("keep_out", c.keep_out);
  r.finish();
  if (!(c.extent > 0.0 && c.count >= 0 && c.min_radius > 0.0 && c.max_radius >= c.min_radius))
    throw ConfigError("config: invalid forest parameters in '" + r.path() + "'");
}

void read_json(JsonReader &r, LemniscateParams &c) {
  r.get("center", c.center);
  r.get("a", c.a);
  r.get("b", c.b);
  r.get("height", c.height);
  r.get("rate", c.rate);
  r.get("ramp", c.ramp);
  r.get("laps", c.laps);
  r.get("phase0", c.phase0);
  r.finish();
}

Json to_json(const Vec3 &v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const RunMetrics &m) {
  return Json{{"rmse", m.rmse},
              {"max_error", m.max_error},
              {"rmse_terrestrial", m.rmse_terrestrial},
              {"rmse_aerial", m.rmse_aerial},
              {"mode_switches", m.mode_switches},
              {"hard_landings", m.hard_landings},
              {"degraded_solves", m.degraded_solves},
              {"saturation_fraction", m.saturation_fraction},
              {"solve_p50_ms", 1e3 * m.solve_p50},
              {"solve_p99_ms", 1e3 * m.solve_p99},
              {"max_lateral_velocity", m.max_lateral_velocity},
              {"transition_vz_peak", m.transition_vz_peak},
              {"max_position_step", m.max_position_step},
              {"duration", m.duration},
              {"samples", m.samples}};
}

Json to_json(const SearchResult &r) {
  Json wp = Json::array(), dur = Json::array(), modes = Json::array();
  for (const auto &p : r.waypoints) wp.push_back(to_json(p));
  for (double d : r.durations) dur.push_back(d);
  for (Mode m : r.modes) modes.push_back(mode_name(m));
  return Json{{"waypoints", wp},      {"durations", dur},         {"modes", modes},
              {"cost", r.cost},       {"expanded", r.expanded},   {"wall_time_ms", 1e3 * r.wall_time},
              {"cpu_time_ms", 1e3 * r.cpu_time}, {"length", r.length()}, {"used_shot", r.used_shot}, {"mode_switches", r.mode_switches()}};
}

Json to_json(const CostBreakdown &c) {
  return Json{{"time", c.time},
              {"state", c.state},
              {"collision", c.collision},
              {"nonholonomic", c.nonholonomic},
              {"total", c.total}};
}

Json trajectory_json(const MincoTrajectory &traj, const std::vector<Mode> &modes) {
  Json pieces = Json::array();
  for (int i = 0; i < traj.pieces(); ++i) {
    Json coeffs = Json::array();
    for (int ax = 0; ax < 3; ++ax) {
      Json row = Json::array();
      for (int k = 0; k < 6; ++k) row.push_back(traj.coeffs()(6 * i + k, ax));
      coeffs.push_back(row);
    }
    pieces.push_back(Json{{"duration", traj.durations()(i)}, {"mode", mode_name(modes[i])}, {"coeffs", coeffs}});
  }
  return Json{{"duration", traj.duration()}, {"pieces", pieces}};
}

Json cost_log_json(const OptimizeResult &r) {
  Json it = Json::array();
  for (const auto &l : r.log) {
    Json e = to_json(l.cost);
    e["iteration"] = l.iteration;
    it.push_back(e);
  }
  return Json{{"final", to_json(r.cost)},
              {"status", lbfgs_status_name(r.solver.status)},
              {"iterations", r.solver.iterations},
              {"evaluations", r.solver.evaluations},
              {"wall_time_ms", 1e3 * r.wall_time},
              {"cpu_time_ms", 1e3 * r.cpu_time},
              {"warning", r.warning},
              {"log", it}};
}

}  // namespace tabv
