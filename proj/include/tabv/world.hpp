#pragma once

#include "tabv/common.hpp"
#include "tabv/esdf.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tabv {

// Vertical cylinder standing on the ground.
struct Cylinder {
  Vec2 center = Vec2::Zero();
  double radius = 0.5;
  double height = 3.0;
};

// Axis-aligned box.
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct WorldSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 extent = Vec3(20.0, 20.0, 4.0);  // size of the planning box [m]
  double ground_resolution = 0.1;
  double air_resolution = 0.2;
  // Obstacles reaching into [0, ground_band] block wheeled motion.
  double ground_band = 0.3;
  std::vector<Cylinder> cylinders;
  std::vector<Box> boxes;
  // Occupancy loaded from a map file. When set it replaces the origin,
  // extent and air resolution, and its cells are added to the obstacles.
  std::optional<OccupancyGrid> map;
};

struct ForestParams {
  double extent = 50.0;
  double height = 4.0;
  int count = 60;
  double min_radius = 0.3;
  double max_radius = 0.8;
  double min_height = 0.6;     // short obstacles can be flown over
  double max_height = 4.0;
  double tall_fraction = 0.6;
  Vec2 start = Vec2(2.0, 2.0);
  Vec2 goal = Vec2(48.0, 48.0);
  double keep_out = 2.0;       // obstacle-free radius around start and goal
};

// Rasterized world with one planar field for ground clearance and one
// volumetric field for flight clearance. Immutable once built.
class World {
 public:
  explicit World(const WorldSpec &spec);

  const WorldSpec &spec() const { return spec_; }
  const OccupancyGrid &ground_grid() const { return ground_grid_; }
  const OccupancyGrid &air_grid() const { return air_grid_; }
  const EsdfGrid &ground() const { return ground_; }
  const EsdfGrid &air() const { return air_; }
  const EsdfGrid &field(Mode mode) const { return mode == Mode::Terrestrial ? ground_ : air_; }

  Vec3 lower() const { return spec_.origin; }
  Vec3 upper() const { return spec_.origin + spec_.extent; }
  bool inside(const Vec3 &p, Mode mode) const;
  double clearance(const Vec3 &p, Mode mode) const { return field(mode).query(p).dist; }

 private:
  WorldSpec spec_;
  OccupancyGrid ground_grid_, air_grid_;
  EsdfGrid ground_, air_;
};

using WorldPtr = std::shared_ptr<const World>;

WorldSpec make_forest(const ForestParams &params, std::uint64_t seed);

// Low wall across the whole width at x = x_wall: blocks the ground, free above.
WorldSpec make_fence(double length, double width, double x_wall, double wall_height,
                     double ceiling = 4.0);

WorldSpec make_empty(const Vec3 &origin, const Vec3 &extent);

}  // namespace tabv
