#pragma once

#include "cardiostrain/common.hpp"

#include <span>
#include <vector>

namespace cardiostrain {

/// Voxel index triple (i, j, k), x-fastest.
using Index3 = std::array<int, 3>;

/// Regular 3D voxel grid. Positions are voxel centers: origin + spacing .* (i, j, k).
struct Grid3 {
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm / voxel
  Vec3 origin{0.0, 0.0, 0.0};   // mm

  void validate() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  std::size_t index(const Index3& ijk) const { return index(ijk[0], ijk[1], ijk[2]); }
  Index3 unravel(std::size_t v) const;
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  Vec3 position(int i, int j, int k) const {
    return origin + spacing.cwiseProduct(Vec3(i, j, k));
  }
  Vec3 position(const Index3& ijk) const { return position(ijk[0], ijk[1], ijk[2]); }
  /// Continuous voxel coordinate of a physical point.
  Vec3 to_voxel(const Vec3& p) const { return (p - origin).cwiseQuotient(spacing); }

  bool same_shape(const Grid3& other) const;
  bool operator==(const Grid3& other) const;
};

enum class FrameKind : std::uint8_t {
  Lagrangian = 0,
  Eulerian = 1,
  StrainProjections = 2,  // (radial, circumferential, longitudinal)
  StrainTensor = 3,       // (xx, yy, zz, xy, xz, yz)
};

int components_of(FrameKind kind);
const char* to_string(FrameKind kind);

/// Dense per-voxel vector field over a frame sequence.
///
/// Storage is interleaved: component fastest, then x, y, z, frame. Displacements in mm.
/// Lagrangian fields are referenced to frame 0, which is identically zero.
class DisplacementField4D {
 public:
  DisplacementField4D() = default;
  DisplacementField4D(Grid3 grid, int frames, FrameKind kind);

  const Grid3& grid() const { return grid_; }
  int frames() const { return frames_; }
  FrameKind kind() const { return kind_; }
  void set_kind(FrameKind kind);
  int components() const { return components_of(kind_); }

  std::size_t frame_stride() const { return grid_.voxel_count() * components(); }
  std::size_t offset(int t, std::size_t voxel) const {
    return static_cast<std::size_t>(t) * frame_stride() + voxel * components();
  }

  Eigen::Map<Vec3> vec(int t, std::size_t voxel) {
    return Eigen::Map<Vec3>(data_.data() + offset(t, voxel));
  }
  Eigen::Map<const Vec3> vec(int t, std::size_t voxel) const {
    return Eigen::Map<const Vec3>(data_.data() + offset(t, voxel));
  }
  Eigen::Map<Vec3> vec(int t, int i, int j, int k) { return vec(t, grid_.index(i, j, k)); }
  Eigen::Map<const Vec3> vec(int t, int i, int j, int k) const {
    return vec(t, grid_.index(i, j, k));
  }

  std::span<double> frame(int t) { return {data_.data() + t * frame_stride(), frame_stride()}; }
  std::span<const double> frame(int t) const {
    return {data_.data() + t * frame_stride(), frame_stride()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  /// Throws DimensionError unless grids and frame counts agree.
  void require_same_shape(const DisplacementField4D& other, const char* what) const;

 private:
  Grid3 grid_;
  int frames_ = 0;
  FrameKind kind_ = FrameKind::Lagrangian;
  std::vector<double> data_;
};

/// Single-component 3D scalar volume (image intensities).
struct ScalarVolume {
  Grid3 grid;
  std::vector<double> data;

  ScalarVolume() = default;
  explicit ScalarVolume(Grid3 g) : grid(g), data(g.voxel_count(), 0.0) {}
  double at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
  double& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
};

/// Binary voxel mask.
struct VoxelMask {
  Grid3 grid;
  std::vector<std::uint8_t> data;

  VoxelMask() = default;
  explicit VoxelMask(Grid3 g, std::uint8_t fill = 0) : grid(g), data(g.voxel_count(), fill) {}
  bool at(int i, int j, int k) const { return data[grid.index(i, j, k)] != 0; }
  bool at(std::size_t v) const { return data[v] != 0; }
  std::size_t count() const;
  /// Mask voxels whose full 3x3x3 neighbourhood lies inside the grid and the mask.
  VoxelMask eroded() const;
};

/// Trilinear interpolation of a scalar volume at a continuous voxel coordinate (clamped to the grid).
double sample_trilinear(const ScalarVolume& vol, const Vec3& voxel_coord);

/// Trilinear interpolation of one frame of a 3-component field at a continuous voxel coordinate.
Vec3 sample_trilinear(const DisplacementField4D& field, int t, const Vec3& voxel_coord);

/// Separable Gaussian smoothing (sigma in voxels, kernel truncated at 3 sigma). Near the
/// grid boundary the kernel is renormalized over in-grid taps. sigma <= 0 returns a copy.
ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma);

}  // namespace cardiostrain
