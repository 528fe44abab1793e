#pragma once

#include "tabv/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tabv {

struct GoalSpec {
  Vec3 p = Vec3::Zero();
  std::optional<double> heading;
  double speed = 0.0;              // pass-through speed along the heading
};

enum class TaskKind { Goals, Lemniscate, Hold };

struct TaskSpec {
  TaskKind kind = TaskKind::Goals;
  // Goals: start pose and an ordered goal list.
  Vec3 start = Vec3::Zero();
  double start_heading = 0.0;
  std::vector<GoalSpec> goals;
  // Lemniscate: shape plus speed and acceleration bounds used to fit the rate.
  LemniscateParams lemniscate;
  double v_max = 2.0;
  double a_max = 1.8;
  bool fit_rate = true;
  // Hold: stationary reference.
  Vec3 hold_position = Vec3(0.0, 0.0, 1.0);
  Mode hold_mode = Mode::Aerial;
  double hold_duration = 10.0;
};

enum class WorldKind { Empty, Forest, Fence, File };

struct FenceParams {
  double length = 16.0;
  double width = 8.0;
  double x_wall = 8.0;
  double wall_height = 1.0;
  double ceiling = 4.0;
};

struct WorldSource {
  WorldKind kind = WorldKind::Empty;
  Vec3 origin = Vec3(-2.0, -2.0, 0.0);
  Vec3 extent = Vec3(20.0, 20.0, 4.0);
  double ground_resolution = 0.1;
  double air_resolution = 0.2;
  double ground_band = 0.3;
  std::vector<Cylinder> cylinders;
  std::vector<Box> boxes;
  ForestParams forest;
  std::uint64_t forest_seed = 0;
  FenceParams fence;
  std::string map_file;            // resolved path
};

struct ScenarioConfig {
  std::string name = "scenario";
  WorldSource world;
  TaskSpec task;
  PhysicalParams physical;
  FlatnessConfig flatness;
  SearchConfig search;
  OptimizerConfig optimizer;
  NmpcConfig nmpc;
  IndiConfig indi;
  SimConfig sim;
  double ref_dt = 5e-3;            // reference table step [s]
  double piece_duration = 1.0;     // target MINCO piece length when merging primitives [s]
  // Acceleration along the heading imposed where a ground leg starts or ends
  // at rest, so the direction of motion there matches the heading [m/s^2].
  double rest_acceleration = 0.3;
  Json source;                     // the JSON the config was read from

  // Applies a run seed: simulator noise and, for forests, the obstacle layout.
  void apply_seed(std::uint64_t seed);
};

// Built-in configurations: goals-course, lemniscate-2d, lemniscate-3d,
// hover, ground-rest, fence, forest, indi-ab.
ScenarioConfig preset_scenario(const std::string &name);
std::vector<std::string> preset_names();

// A document may start from {"preset": name} and override any section.
ScenarioConfig parse_scenario(const Json &j, const std::string &base_dir = ".");
ScenarioConfig load_scenario(const std::string &path);

WorldSpec world_spec(const WorldSource &src);
WorldPtr build_world(const WorldSource &src);

}  // namespace tabv
