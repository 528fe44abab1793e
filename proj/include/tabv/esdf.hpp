#pragma once

#include "tabv/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace tabv {

using Vec3i = Eigen::Vector3i;

// Regular occupancy grid. Cell (i,j,k) covers
// [origin + (i,j,k) * resolution, origin + (i+1,j+1,k+1) * resolution).
// A grid with dims.z() == 1 is planar: queries ignore the z coordinate.
struct OccupancyGrid {
  double resolution = 0.1;
  Vec3 origin = Vec3::Zero();
  Vec3i dims = Vec3i(1, 1, 1);
  std::vector<std::uint8_t> cells;

  OccupancyGrid() = default;
  OccupancyGrid(double res, const Vec3 &org, const Vec3i &size);

  bool planar() const { return dims.z() == 1; }
  std::size_t size() const { return static_cast<std::size_t>(dims.prod()); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i;
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims.x() && j < dims.y() && k < dims.z();
  }
  bool occupied(int i, int j, int k) const { return cells[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool occ) { cells[index(i, j, k)] = occ ? 1 : 0; }
  Vec3 cell_center(int i, int j, int k) const;
  // Cell containing p; coordinates may fall outside the grid.
  Vec3i cell_of(const Vec3 &p) const;
  Vec3 max_corner() const { return origin + dims.cast<double>() * resolution; }
  void validate() const;
};

struct DistQuery {
  double dist = 0.0;
  Vec3 grad = Vec3::Zero();
  bool in_bounds = true;
};

class EsdfGrid {
 public:
  EsdfGrid() = default;

  // Exact Euclidean distance transform (separable lower-envelope pass per axis).
  static EsdfGrid build(const OccupancyGrid &grid);

  const OccupancyGrid &geometry() const { return geom_; }
  double at(int i, int j, int k) const { return dist_[geom_.index(i, j, k)]; }
  // Distance assigned when the grid has no obstacle at all.
  double cap() const { return cap_; }

  // Trilinear (bilinear when planar) interpolation of the cell-center values
  // and its analytic gradient. Out-of-box queries are clamped and flagged; the
  // gradient component along a clamped axis is zero.
  DistQuery query(const Vec3 &p) const;

  // Like query, but outside the box the distance keeps decreasing with the
  // depth outside and the gradient points back inside. Used by penalty costs.
  DistQuery query_penalized(const Vec3 &p) const;

 private:
  OccupancyGrid geom_;
  std::vector<double> dist_;
  double cap_ = 0.0;
};

// ASCII grid: "resolution r", "origin x y z", "dims nx ny nz", then for each
// layer k and row j a line of nx '0'/'1' characters.
void write_grid(std::ostream &os, const OccupancyGrid &grid);
OccupancyGrid read_grid(std::istream &is);

}  // namespace tabv
