#include "tabv/scenario.hpp"

#include <filesystem>
#include <fstream>

namespace tabv {

namespace {

constexpr double kPi = 3.14159265358979323846;

void read_world(JsonReader &r, WorldSource &w, const std::string &base_dir) {
  std::string kind;
  r.get("kind", kind);
  if (!kind.empty()) {
    if (kind == "empty")
      w.kind = WorldKind::Empty;
    else if (kind == "forest")
      w.kind = WorldKind::Forest;
    else if (kind == "fence")
      w.kind = WorldKind::Fence;
    else if (kind == "file")
      w.kind = WorldKind::File;
    else
      throw ConfigError("config: key '" + r.key_path("kind") + "' expects empty, forest, fence or file");
  }
  r.get("origin", w.origin);
  r.get("extent", w.extent);
  r.get("ground_resolution", w.ground_resolution);
  r.get("air_resolution", w.air_resolution);
  r.get("ground_band", w.ground_band);
  if (r.has("cylinders")) {
    const Json &arr = r.raw("cylinders");
    if (!arr.is_array()) throw ConfigError("config: key '" + r.key_path("cylinders") + "' expects an array");
    w.cylinders.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      JsonReader c(arr[i], r.key_path("cylinders") + "[" + std::to_string(i) + "]");
      Cylinder cyl;
      c.get("center", cyl.center);
      c.get("radius", cyl.radius);
      c.get("height", cyl.height);
      c.finish();
      w.cylinders.push_back(cyl);
    }
  }
  if (r.has("boxes")) {
    const Json &arr = r.raw("boxes");
    if (!arr.is_array()) throw ConfigError("config: key '" + r.key_path("boxes") + "' expects an array");
    w.boxes.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      JsonReader c(arr[i], r.key_path("boxes") + "[" + std::to_string(i) + "]");
      Box box;
      c.get("min", box.min);
      c.get("max", box.max);
      c.finish();
      w.boxes.push_back(box);
    }
  }
  if (r.has("forest")) {
    JsonReader f = r.child("forest");
    read_json(f, w.forest);
  }
  r.get("seed", w.forest_seed);
  if (r.has("fence")) {
    JsonReader f = r.child("fence");
    f.get("length", w.fence.length);
    f.get("width", w.fence.width);
    f.get("x_wall", w.fence.x_wall);
    f.get("wall_height", w.fence.wall_height);
    f.get("ceiling", w.fence.ceiling);
    f.finish();
  }
  if (r.has("map_file")) {
    std::string file;
    r.get("map_file", file);
    std::filesystem::path p(file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (!std::filesystem::exists(p))
      throw ConfigError("config: key '" + r.key_path("map_file") + "' names a missing file: " + p.string());
    w.map_file = p.string();
  }
  r.finish();
  if (w.kind == WorldKind::File && w.map_file.empty())
    throw ConfigError("config: key '" + r.key_path("map_file") + "' is required for a file world");
}

void read_task(JsonReader &r, TaskSpec &t) {
  std::string kind;
  r.get("kind", kind);
  if (!kind.empty()) {
    if (kind == "goals")
      t.kind = TaskKind::Goals;
    else if (kind == "lemniscate")
      t.kind = TaskKind::Lemniscate;
    else if (kind == "hold")
      t.kind = TaskKind::Hold;
    else
      throw ConfigError("config: key '" + r.key_path("kind") + "' expects goals, lemniscate or hold");
  }
  r.get("start", t.start);
  r.get("start_heading", t.start_heading);
  if (r.has("goals")) {
    const Json &arr = r.raw("goals");
    if (!arr.is_array()) throw ConfigError("config: key '" + r.key_path("goals") + "' expects an array");
    t.goals.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      JsonReader g(arr[i], r.key_path("goals") + "[" + std::to_string(i) + "]");
      GoalSpec goal;
      g.get("p", goal.p);
      if (g.has("heading") && !g.raw("heading").is_null()) {
        double h = 0.0;
        g.get("heading", h);
        goal.heading = h;
      }
      g.get("speed", goal.speed);
      g.finish();
      if (goal.speed < 0.0) throw ConfigError("config: key '" + g.key_path("speed") + "' must be non-negative");
      if (goal.speed > 0.0 && !goal.heading)
        throw ConfigError("config: key '" + g.key_path("heading") + "' is required with a pass-through speed");
      t.goals.push_back(goal);
    }
  }
  if (r.has("shape")) {
    JsonReader s = r.child("shape");
    read_json(s, t.lemniscate);
  }
  r.get("v_max", t.v_max);
  r.get("a_max", t.a_max);
  r.get("fit_rate", t.fit_rate);
  r.get("position", t.hold_position);
  r.get("mode", t.hold_mode);
  r.get("duration", t.hold_duration);
  r.finish();
  if (t.kind == TaskKind::Goals && t.goals.empty())
    throw ConfigError("config: key '" + r.key_path("goals") + "' must list at least one goal");
  if (t.kind == TaskKind::Hold && !(t.hold_duration > 0.0))
    throw ConfigError("config: key '" + r.key_path("duration") + "' must be positive");
}

}  // namespace

void ScenarioConfig::apply_seed(std::uint64_t seed) {
  sim.seed = seed;
  if (world.kind == WorldKind::Forest) world.forest_seed = seed;
}

std::vector<std::string> preset_names() {
  return {"goals-course", "lemniscate-2d", "lemniscate-3d", "hover", "ground-rest", "fence", "forest", "indi-ab"};
}

ScenarioConfig preset_scenario(const std::string &name) {
  ScenarioConfig s;
  s.name = name;
  if (name == "goals-course") {
    s.world.kind = WorldKind::Empty;
    s.world.origin = Vec3(-5.0, -5.0, 0.0);
    s.world.extent = Vec3(20.0, 20.0, 3.0);
    s.search.allow_aerial = false;
    s.task.kind = TaskKind::Goals;
    s.task.start = Vec3(0.0, 0.0, 0.0);
    s.task.start_heading = 0.0;
    s.task.goals = {GoalSpec{Vec3(6.0, 0.0, 0.0), 0.5 * kPi, 1.0},
                    GoalSpec{Vec3(6.0, 6.0, 0.0), kPi, 1.0},
                    GoalSpec{Vec3(0.0, 6.0, 0.0), 0.0, 1.0},
                    GoalSpec{Vec3(0.0, 0.0, 0.0), -0.5 * kPi, 0.0},
                    GoalSpec{Vec3(0.0, 3.0, 0.0), 0.5 * kPi, 0.0}};
  } else if (name == "lemniscate-2d") {
    s.task.kind = TaskKind::Lemniscate;
    s.task.lemniscate = LemniscateParams{};
    s.task.v_max = 2.0;
    s.task.a_max = 1.8;
    s.world.origin = Vec3(-6.0, -4.0, 0.0);
    s.world.extent = Vec3(12.0, 8.0, 4.0);
  } else if (name == "lemniscate-3d") {
    s.task.kind = TaskKind::Lemniscate;
    s.task.lemniscate = LemniscateParams{};
    s.task.lemniscate.height = 1.5;
    s.task.lemniscate.laps = 1.5;
    s.task.lemniscate.phase0 = kPi;
    s.task.v_max = 3.0;
    s.task.a_max = 2.5;
    s.world.origin = Vec3(-6.0, -4.0, 0.0);
    s.world.extent = Vec3(12.0, 8.0, 4.0);
  } else if (name == "hover" || name == "ground-rest") {
    s.task.kind = TaskKind::Hold;
    s.task.hold_mode = name == "hover" ? Mode::Aerial : Mode::Terrestrial;
    s.task.hold_position = name == "hover" ? Vec3(0.0, 0.0, 1.0) : Vec3::Zero();
    s.task.hold_duration = 10.0;
    s.sim.gyro_noise = 0.0;
  } else if (name == "fence") {
    s.world.kind = WorldKind::Fence;
    // The ground route is closed, so an admissible search floods the whole near side first.
    s.search.prune_cell_factor = 4.0;
    s.search.heuristic_weight = 2.0;
    s.task.kind = TaskKind::Goals;
    s.task.start = Vec3(1.0, 0.0, 0.0);
    s.task.goals = {GoalSpec{Vec3(15.0, 0.0, 0.0), std::nullopt, 0.0}};
  } else if (name == "forest") {
    s.world.kind = WorldKind::Forest;
    s.task.kind = TaskKind::Goals;
    s.task.start = Vec3(s.world.forest.start.x(), s.world.forest.start.y(), 0.0);
    s.task.start_heading = 0.25 * kPi;
    s.task.goals = {GoalSpec{Vec3(s.world.forest.goal.x(), s.world.forest.goal.y(), 0.0), std::nullopt, 0.0}};
  } else if (name == "indi-ab") {
    s.task.kind = TaskKind::Hold;
    s.task.hold_mode = Mode::Aerial;
    s.task.hold_position = Vec3(0.0, 0.0, 1.5);
    s.task.hold_duration = 10.0;
    s.sim.disturbance.torque = Vec3(0.05, 0.0, 0.0);
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  return s;
}

ScenarioConfig parse_scenario(const Json &j, const std::string &base_dir) {
  JsonReader r(j, "");
  ScenarioConfig s;
  if (r.has("preset")) {
    std::string name;
    r.get("preset", name);
    s = preset_scenario(name);
  }
  r.get("name", s.name);
  if (r.has("world")) {
    JsonReader w = r.child("world");
    read_world(w, s.world, base_dir);
  }
  if (r.has("task")) {
    JsonReader t = r.child("task");
    read_task(t, s.task);
  }
  auto section = [&](const char *key, auto &target) {
    if (!r.has(key)) return;
    JsonReader c = r.child(key);
    read_json(c, target);
  };
  section("physical", s.physical);
  section("flatness", s.flatness);
  section("search", s.search);
  section("optimizer", s.optimizer);
  section("nmpc", s.nmpc);
  section("indi", s.indi);
  section("sim", s.sim);
  r.get("ref_dt", s.ref_dt);
  r.get("piece_duration", s.piece_duration);
  r.get("rest_acceleration", s.rest_acceleration);
  r.finish();
  if (!(s.ref_dt > 0.0)) throw ConfigError("config: key 'ref_dt' must be positive");
  if (!(s.piece_duration > 0.0)) throw ConfigError("config: key 'piece_duration' must be positive");
  if (!(s.rest_acceleration >= 0.0)) throw ConfigError("config: key 'rest_acceleration' must be non-negative");
  s.source = j;
  return s;
}

ScenarioConfig load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw ConfigError(std::string("config: malformed JSON in ") + path + ": " + e.what());
  }
  return parse_scenario(j, std::filesystem::path(path).parent_path().string());
}

WorldSpec world_spec(const WorldSource &src) {
  WorldSpec spec;
  switch (src.kind) {
    case WorldKind::Forest:
      spec = make_forest(src.forest, src.forest_seed);
      break;
    case WorldKind::Fence:
      spec = make_fence(src.fence.length, src.fence.width, src.fence.x_wall, src.fence.wall_height, src.fence.ceiling);
      break;
    case WorldKind::File: {
      std::ifstream in(src.map_file);
      if (!in) throw ConfigError("config: cannot open map file " + src.map_file);
      spec.map = read_grid(in);
      break;
    }
    case WorldKind::Empty:
      spec = make_empty(src.origin, src.extent);
      break;
  }
  if (src.kind != WorldKind::Forest) {
    spec.ground_resolution = src.ground_resolution;
    spec.air_resolution = src.air_resolution;
  }
  spec.ground_band = src.ground_band;
  spec.cylinders.insert(spec.cylinders.end(), src.cylinders.begin(), src.cylinders.end());
  spec.boxes.insert(spec.boxes.end(), src.boxes.begin(), src.boxes.end());
  return spec;
}

WorldPtr build_world(const WorldSource &src) { return std::make_shared<const World>(world_spec(src)); }

}  // namespace tabv
