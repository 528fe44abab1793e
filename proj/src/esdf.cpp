#include "tabv/esdf.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace tabv {

OccupancyGrid::OccupancyGrid(double res, const Vec3 &org, const Vec3i &size)
    : resolution(res), origin(org), dims(size) {
  validate();
  cells.assign(this->size(), 0);
}

Vec3 OccupancyGrid::cell_center(int i, int j, int k) const {
  return origin + (Vec3(i, j, k) + Vec3::Constant(0.5)) * resolution;
}

Vec3i OccupancyGrid::cell_of(const Vec3 &p) const {
  const Vec3 u = (p - origin) / resolution;
  Vec3i c(static_cast<int>(std::floor(u.x())), static_cast<int>(std::floor(u.y())),
          static_cast<int>(std::floor(u.z())));
  if (planar()) c.z() = 0;
  return c;
}

void OccupancyGrid::validate() const {
  if (!(resolution > 0.0)) throw ConfigError("occupancy grid: resolution must be positive");
  if (dims.minCoeff() < 1) throw ConfigError("occupancy grid: every dimension needs at least one cell");
  if (!cells.empty() && cells.size() != size()) throw ConfigError("occupancy grid: cell count does not match dims");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform over f (in cell units) using the lower
// envelope of parabolas; infinite entries are not sites.
void edt_1d(const std::vector<double> &f, std::vector<double> &d, std::vector<int> &v,
            std::vector<double> &z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (k >= 0) {
      const int r = v[k];
      const double s = ((f[q] + double(q) * q) - (f[r] + double(r) * r)) / (2.0 * (q - r));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : ((f[q] + double(q) * q) - (f[v[k - 1]] + double(v[k - 1]) * v[k - 1])) /
                                (2.0 * (q - v[k - 1]));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

EsdfGrid EsdfGrid::build(const OccupancyGrid &grid) {
  grid.validate();
  if (grid.cells.size() != grid.size()) throw ConfigError("esdf: occupancy grid has no cells");
  EsdfGrid out;
  out.geom_ = grid;
  out.cap_ = grid.resolution * grid.dims.cast<double>().norm();

  const std::size_t n = grid.size();
  std::size_t free = 0;
  std::vector<double> sq(n);
  for (std::size_t c = 0; c < n; ++c) {
    sq[c] = grid.cells[c] ? 0.0 : kInf;
    free += grid.cells[c] ? 0 : 1;
  }
  if (free == 0) throw Error("esdf: grid has no free cell");

  const int nmax = grid.dims.maxCoeff();
  std::vector<double> f(nmax), d(nmax), z(nmax + 1);
  std::vector<int> v(nmax);
  const Vec3i &D = grid.dims;
  for (int axis = 0; axis < 3; ++axis) {
    const int len = D(axis);
    if (len == 1) continue;
    f.resize(len);
    d.resize(len);
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int u = 0; u < D(a1); ++u) {
      for (int w = 0; w < D(a2); ++w) {
        Vec3i c;
        c(a1) = u;
        c(a2) = w;
        for (int q = 0; q < len; ++q) {
          c(axis) = q;
          f[q] = sq[grid.index(c.x(), c.y(), c.z())];
        }
        edt_1d(f, d, v, z);
        for (int q = 0; q < len; ++q) {
          c(axis) = q;
          sq[grid.index(c.x(), c.y(), c.z())] = d[q];
        }
      }
    }
  }

  out.dist_.resize(n);
  for (std::size_t c = 0; c < n; ++c)
    out.dist_[c] = sq[c] == kInf ? out.cap_ : grid.resolution * std::sqrt(sq[c]);
  return out;
}

DistQuery EsdfGrid::query(const Vec3 &p) const {
  const OccupancyGrid &g = geom_;
  DistQuery out;
  if (!p.allFinite()) {
    out.in_bounds = false;
    out.dist = std::numeric_limits<double>::quiet_NaN();
    out.grad.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  const int naxes = g.planar() ? 2 : 3;
  const Vec3 lo = g.origin, hi = g.max_corner();
  for (int a = 0; a < naxes; ++a)
    if (p(a) < lo(a) || p(a) > hi(a)) out.in_bounds = false;

  // Continuous index relative to cell centers.
  int i0[3] = {0, 0, 0};
  double t[3] = {0.0, 0.0, 0.0};
  bool active[3] = {false, false, false};
  for (int a = 0; a < naxes; ++a) {
    const int n = g.dims(a);
    if (n < 2) continue;
    const double u = (p(a) - g.origin(a)) / g.resolution - 0.5;
    if (u <= 0.0) {
      i0[a] = 0;
      t[a] = 0.0;
    } else if (u >= n - 1) {
      i0[a] = n - 2;
      t[a] = 1.0;
    } else {
      i0[a] = std::min(static_cast<int>(std::floor(u)), n - 2);
      t[a] = u - i0[a];
      active[a] = true;
    }
  }

  const int nx = g.dims.x() > 1 ? 2 : 1;
  const int ny = g.dims.y() > 1 ? 2 : 1;
  const int nz = (naxes == 3 && g.dims.z() > 1) ? 2 : 1;
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  for (int dz = 0; dz < nz; ++dz) {
    for (int dy = 0; dy < ny; ++dy) {
      for (int dx = 0; dx < nx; ++dx) {
        const int off[3] = {dx, dy, dz};
        const int n_off[3] = {nx, ny, nz};
        double w = 1.0;
        double dw[3] = {1.0, 1.0, 1.0};
        for (int a = 0; a < 3; ++a) {
          if (n_off[a] == 1) continue;
          const double wa = off[a] ? t[a] : 1.0 - t[a];
          const double da = off[a] ? 1.0 : -1.0;
          for (int b = 0; b < 3; ++b) dw[b] *= (a == b) ? da : wa;
          w *= wa;
        }
        const double val = at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        value += w * val;
        for (int a = 0; a < 3; ++a)
          if (n_off[a] == 2) grad(a) += dw[a] * val;
      }
    }
  }
  for (int a = 0; a < 3; ++a) grad(a) = active[a] ? grad(a) / g.resolution : 0.0;
  out.dist = value;
  out.grad = grad;
  return out;
}

DistQuery EsdfGrid::query_penalized(const Vec3 &p) const {
  const OccupancyGrid &g = geom_;
  const int naxes = g.planar() ? 2 : 3;
  const Vec3 lo = g.origin, hi = g.max_corner();
  Vec3 inside = p;
  for (int a = 0; a < naxes; ++a) inside(a) = std::clamp(p(a), lo(a), hi(a));
  DistQuery out = query(inside);
  const Vec3 outward = p - inside;
  const double depth = outward.norm();
  if (depth > 0.0) {
    out.in_bounds = false;
    out.dist -= depth;
    // Along clamped axes query() reports zero slope; add the inward direction.
    out.grad -= outward / depth;
  }
  return out;
}

void write_grid(std::ostream &os, const OccupancyGrid &grid) {
  os.precision(17);
  os << "resolution " << grid.resolution << "\n";
  os << "origin " << grid.origin.x() << ' ' << grid.origin.y() << ' ' << grid.origin.z() << "\n";
  os << "dims " << grid.dims.x() << ' ' << grid.dims.y() << ' ' << grid.dims.z() << "\n";
  std::string row(grid.dims.x(), '0');
  for (int k = 0; k < grid.dims.z(); ++k) {
    for (int j = 0; j < grid.dims.y(); ++j) {
      for (int i = 0; i < grid.dims.x(); ++i) row[i] = grid.occupied(i, j, k) ? '1' : '0';
      os << row << "\n";
    }
  }
}

OccupancyGrid read_grid(std::istream &is) {
  auto header = [&](const char *key, int count) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(std::string("grid file: missing '") + key + "' line");
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw ConfigError(std::string("grid file: expected '") + key + "', got '" + k + "'");
    std::vector<double> vals(count);
    for (auto &x : vals)
      if (!(ss >> x)) throw ConfigError(std::string("grid file: bad values for '") + key + "'");
    return vals;
  };
  const auto res = header("resolution", 1);
  const auto org = header("origin", 3);
  const auto dims = header("dims", 3);
  OccupancyGrid grid(res[0], Vec3(org[0], org[1], org[2]),
                     Vec3i(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])));
  std::string line;
  for (int k = 0; k < grid.dims.z(); ++k) {
    for (int j = 0; j < grid.dims.y(); ++j) {
      if (!std::getline(is, line)) throw ConfigError("grid file: truncated body");
      if (static_cast<int>(line.size()) < grid.dims.x()) throw ConfigError("grid file: short row");
      for (int i = 0; i < grid.dims.x(); ++i) {
        const char c = line[i];
        if (c != '0' && c != '1') throw ConfigError("grid file: cells must be '0' or '1'");
        grid.set(i, j, k, c == '1');
      }
    }
  }
  return grid;
}

}  // namespace tabv
