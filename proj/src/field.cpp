#include "cardiostrain/field.hpp"

#include "cardiostrain/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace cardiostrain {

void Grid3::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ConfigError("grid dimension must be >= 1");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw ConfigError("grid spacing must be positive and finite");
  }
  if (!origin.allFinite()) throw ConfigError("grid origin must be finite");
}

Index3 Grid3::unravel(std::size_t v) const {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  return {static_cast<int>(v % nx), static_cast<int>((v / nx) % ny),
          static_cast<int>(v / (nx * ny))};
}

bool Grid3::same_shape(const Grid3& other) const {
  return dims == other.dims && spacing == other.spacing;
}

bool Grid3::operator==(const Grid3& other) const {
  return same_shape(other) && origin == other.origin;
}

int components_of(FrameKind kind) {
  return kind == FrameKind::StrainTensor ? 6 : 3;
}

const char* to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::Lagrangian: return "lagrangian";
    case FrameKind::Eulerian: return "eulerian";
    case FrameKind::StrainProjections: return "strain-projections";
    case FrameKind::StrainTensor: return "strain-tensor";
  }
  return "unknown";
}

DisplacementField4D::DisplacementField4D(Grid3 grid, int frames, FrameKind kind)
    : grid_(grid), frames_(frames), kind_(kind) {
  grid_.validate();
  if (frames < 1) throw ConfigError("field needs at least one frame");
  data_.assign(grid_.voxel_count() * static_cast<std::size_t>(frames) * components(), 0.0);
}

void DisplacementField4D::set_kind(FrameKind kind) {
  if (components_of(kind) != components())
    throw DimensionError("frame kind change would alter component count");
  kind_ = kind;
}

bool DisplacementField4D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void DisplacementField4D::require_same_shape(const DisplacementField4D& other,
                                             const char* what) const {
  if (!grid_.same_shape(other.grid_) || frames_ != other.frames_ ||
      components() != other.components())
    throw DimensionError(std::string(what) + ": field shapes differ");
}

std::size_t VoxelMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto m) { return m != 0; }));
}

VoxelMask VoxelMask::eroded() const {
  VoxelMask out(grid);
  const auto& d = grid.dims;
  for (int k = 1; k + 1 < d[2]; ++k)
    for (int j = 1; j + 1 < d[1]; ++j)
      for (int i = 1; i + 1 < d[0]; ++i) {
        bool all = true;
        for (int dk = -1; dk <= 1 && all; ++dk)
          for (int dj = -1; dj <= 1 && all; ++dj)
            for (int di = -1; di <= 1 && all; ++di) all = at(i + di, j + dj, k + dk);
        out.data[grid.index(i, j, k)] = all ? 1 : 0;
      }
  return out;
}

namespace {

struct TrilinearStencil {
  int i0, j0, k0, i1, j1, k1;
  double fx, fy, fz;
};

TrilinearStencil make_stencil(const Grid3& g, const Vec3& c) {
  auto axis = [](double x, int n, int& lo, int& hi, double& f) {
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    lo = std::min(static_cast<int>(std::floor(x)), n - 1);
    hi = std::min(lo + 1, n - 1);
    f = x - lo;
  };
  TrilinearStencil s{};
  axis(c.x(), g.dims[0], s.i0, s.i1, s.fx);
  axis(c.y(), g.dims[1], s.j0, s.j1, s.fy);
  axis(c.z(), g.dims[2], s.k0, s.k1, s.fz);
  return s;
}

}  // namespace

double sample_trilinear(const ScalarVolume& vol, const Vec3& voxel_coord) {
  const auto s = make_stencil(vol.grid, voxel_coord);
  auto v = [&](int i, int j, int k) { return vol.at(i, j, k); };
  const double c00 = v(s.i0, s.j0, s.k0) * (1 - s.fx) + v(s.i1, s.j0, s.k0) * s.fx;
  const double c10 = v(s.i0, s.j1, s.k0) * (1 - s.fx) + v(s.i1, s.j1, s.k0) * s.fx;
  const double c01 = v(s.i0, s.j0, s.k1) * (1 - s.fx) + v(s.i1, s.j0, s.k1) * s.fx;
  const double c11 = v(s.i0, s.j1, s.k1) * (1 - s.fx) + v(s.i1, s.j1, s.k1) * s.fx;
  const double c0 = c00 * (1 - s.fy) + c10 * s.fy;
  const double c1 = c01 * (1 - s.fy) + c11 * s.fy;
  return c0 * (1 - s.fz) + c1 * s.fz;
}

Vec3 sample_trilinear(const DisplacementField4D& field, int t, const Vec3& voxel_coord) {
  const auto s = make_stencil(field.grid(), voxel_coord);
  auto v = [&](int i, int j, int k) { return Vec3(field.vec(t, i, j, k)); };
  const Vec3 c00 = v(s.i0, s.j0, s.k0) * (1 - s.fx) + v(s.i1, s.j0, s.k0) * s.fx;
  const Vec3 c10 = v(s.i0, s.j1, s.k0) * (1 - s.fx) + v(s.i1, s.j1, s.k0) * s.fx;
  const Vec3 c01 = v(s.i0, s.j0, s.k1) * (1 - s.fx) + v(s.i1, s.j0, s.k1) * s.fx;
  const Vec3 c11 = v(s.i0, s.j1, s.k1) * (1 - s.fx) + v(s.i1, s.j1, s.k1) * s.fx;
  const Vec3 c0 = c00 * (1 - s.fy) + c10 * s.fy;
  const Vec3 c1 = c01 * (1 - s.fy) + c11 * s.fy;
  return c0 * (1 - s.fz) + c1 * s.fz;
}

ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma) {
  if (sigma <= 0.0) return vol;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int r = -radius; r <= radius; ++r) kernel[r + radius] = std::exp(-0.5 * r * r / (sigma * sigma));

  const Grid3& g = vol.grid;
  ScalarVolume cur = vol;
  ScalarVolume next(g);
  for (int axis = 0; axis < 3; ++axis) {
    const int n = g.dims[axis];
    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          Index3 p{i, j, k};
          const int c = p[axis];
          double acc = 0.0, wsum = 0.0;
          for (int r = std::max(-radius, -c); r <= std::min(radius, n - 1 - c); ++r) {
            Index3 q = p;
            q[axis] = c + r;
            const double w = kernel[r + radius];
            acc += w * cur.data[g.index(q)];
            wsum += w;
          }
          next.data[g.index(p)] = acc / wsum;
        }
    std::swap(cur, next);
  }
  return cur;
}

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(); }
void set_thread_count(int n) { g_threads.store(std::max(1, n)); }

}  // namespace cardiostrain
