#include "tabv/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tabv {

namespace {

Vec3i cells_for(const Vec3 &extent, double res, bool planar) {
  auto n = [&](double len) { return std::max(1, static_cast<int>(std::ceil(len / res - 1e-9))); };
  return Vec3i(n(extent.x()), n(extent.y()), planar ? 1 : n(extent.z()));
}

bool in_cylinder(const Cylinder &c, const Vec3 &p) {
  return p.z() <= c.height && (p.head<2>() - c.center).squaredNorm() <= c.radius * c.radius;
}

bool in_box(const Box &b, const Vec3 &p) {
  return (p.array() >= b.min.array()).all() && (p.array() <= b.max.array()).all();
}

// Marks cells whose centers fall inside an obstacle, visiting only each
// obstacle's bounding cells. The planar grid tests the ground band.
void rasterize(OccupancyGrid &grid, const WorldSpec &spec, bool planar) {
  auto mark = [&](const Vec3 &lo, const Vec3 &hi, auto &&pred) {
    const Vec3i a = grid.cell_of(lo).cwiseMax(Vec3i::Zero());
    const Vec3i b = grid.cell_of(hi).cwiseMin(grid.dims - Vec3i::Ones());
    for (int k = planar ? 0 : a.z(); k <= (planar ? 0 : b.z()); ++k)
      for (int j = a.y(); j <= b.y(); ++j)
        for (int i = a.x(); i <= b.x(); ++i) {
          Vec3 c = grid.cell_center(i, j, k);
          if (planar) c.z() = 0.0;
          if (pred(c)) grid.set(i, j, k, true);
        }
  };
  for (const auto &cyl : spec.cylinders) {
    const Vec3 lo(cyl.center.x() - cyl.radius, cyl.center.y() - cyl.radius, 0.0);
    const Vec3 hi(cyl.center.x() + cyl.radius, cyl.center.y() + cyl.radius, cyl.height);
    mark(lo, hi, [&](const Vec3 &c) { return in_cylinder(cyl, c); });
  }
  for (const auto &box : spec.boxes) {
    if (planar && !(box.min.z() < spec.ground_band && box.max.z() >= 0.0)) continue;
    mark(box.min, box.max, [&](const Vec3 &c) {
      if (planar)
        return c.x() >= box.min.x() && c.x() <= box.max.x() && c.y() >= box.min.y() && c.y() <= box.max.y();
      return in_box(box, c);
    });
  }
}

// Copies map occupancy into the air grid (same geometry) and into the
// ground grid wherever an occupied map cell reaches into the ground band.
void stamp_map(const OccupancyGrid &map, double band, OccupancyGrid &ground, OccupancyGrid &air) {
  for (int k = 0; k < map.dims.z(); ++k)
    for (int j = 0; j < map.dims.y(); ++j)
      for (int i = 0; i < map.dims.x(); ++i) {
        if (!map.occupied(i, j, k)) continue;
        air.set(i, j, k, true);
        const double z_lo = map.origin.z() + k * map.resolution;
        if (z_lo >= band || z_lo + map.resolution <= 0.0) continue;
        const Vec3 lo = map.origin + Vec3(i, j, 0).cast<double>() * map.resolution;
        const Vec3i a = ground.cell_of(lo).cwiseMax(Vec3i::Zero());
        const Vec3i b = ground.cell_of(lo + Vec3::Constant(map.resolution)).cwiseMin(ground.dims - Vec3i::Ones());
        for (int gj = a.y(); gj <= b.y(); ++gj)
          for (int gi = a.x(); gi <= b.x(); ++gi) {
            const Vec3 c = ground.cell_center(gi, gj, 0);
            if (c.x() >= lo.x() && c.x() < lo.x() + map.resolution && c.y() >= lo.y() &&
                c.y() < lo.y() + map.resolution)
              ground.set(gi, gj, 0, true);
          }
      }
}

}  // namespace

World::World(const WorldSpec &spec_in) : spec_(spec_in) {
  if (spec_.map) {
    spec_.map->validate();
    if (spec_.map->planar()) throw ConfigError("world: map file must be volumetric");
    spec_.origin = spec_.map->origin;
    spec_.extent = spec_.map->max_corner() - spec_.map->origin;
    spec_.air_resolution = spec_.map->resolution;
  }
  const WorldSpec &spec = spec_;
  if (!(spec.extent.minCoeff() > 0.0)) throw ConfigError("world: extent must be positive");
  if (!(spec.ground_resolution > 0.0) || !(spec.air_resolution > 0.0))
    throw ConfigError("world: resolutions must be positive");
  ground_grid_ = OccupancyGrid(spec.ground_resolution, spec.origin,
                               cells_for(spec.extent, spec.ground_resolution, true));
  air_grid_ = OccupancyGrid(spec.air_resolution, spec.origin,
                            cells_for(spec.extent, spec.air_resolution, false));

  rasterize(ground_grid_, spec, true);
  rasterize(air_grid_, spec, false);
  if (spec.map) stamp_map(*spec.map, spec.ground_band, ground_grid_, air_grid_);
  ground_ = EsdfGrid::build(ground_grid_);
  air_ = EsdfGrid::build(air_grid_);
}

bool World::inside(const Vec3 &p, Mode mode) const {
  const Vec3 lo = lower(), hi = upper();
  const bool xy = p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  if (mode == Mode::Terrestrial) return xy;
  return xy && p.z() >= lo.z() && p.z() <= hi.z();
}

WorldSpec make_forest(const ForestParams &params, std::uint64_t seed) {
  WorldSpec spec;
  spec.origin = Vec3::Zero();
  spec.extent = Vec3(params.extent, params.extent, params.height);
  spec.ground_resolution = 0.1;
  spec.air_resolution = 0.2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, params.extent);
  std::uniform_real_distribution<double> rad(params.min_radius, params.max_radius);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> short_h(params.min_height, 0.5 * (params.min_height + params.max_height));
  int attempts = 0;
  while (static_cast<int>(spec.cylinders.size()) < params.count && attempts < 100 * params.count) {
    ++attempts;
    Cylinder c;
    c.center = Vec2(pos(rng), pos(rng));
    c.radius = rad(rng);
    c.height = unit(rng) < params.tall_fraction ? params.max_height : short_h(rng);
    const double keep = params.keep_out + c.radius;
    if ((c.center - params.start).norm() < keep || (c.center - params.goal).norm() < keep) continue;
    spec.cylinders.push_back(c);
  }
  return spec;
}

WorldSpec make_fence(double length, double width, double x_wall, double wall_height, double ceiling) {
  WorldSpec spec;
  spec.origin = Vec3(0.0, -0.5 * width, 0.0);
  spec.extent = Vec3(length, width, ceiling);
  Box wall;
  wall.min = Vec3(x_wall - 0.15, -0.5 * width - 1.0, 0.0);
  wall.max = Vec3(x_wall + 0.15, 0.5 * width + 1.0, wall_height);
  spec.boxes.push_back(wall);
  return spec;
}

WorldSpec make_empty(const Vec3 &origin, const Vec3 &extent) {
  WorldSpec spec;
  spec.origin = origin;
  spec.extent = extent;
  return spec;
}

}  // namespace tabv
