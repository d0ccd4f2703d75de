#pragma once

#include "cardiostrain/field.hpp"

#include <optional>

namespace cardiostrain {

/// Spatiotemporal patch extent (sx, sy, sz, T); the component axis (3) is implicit.
struct PatchDims {
  int sx = 5, sy = 5, sz = 5, frames = 16;

  std::size_t spatial() const { return static_cast<std::size_t>(sx) * sy * sz; }
  /// Flattened length sx*sy*sz*T*3.
  std::size_t length() const { return spatial() * frames * 3; }
  /// Position of (x, y, z, t, c) in a flattened patch: x fastest, then y, z, t, c.
  std::size_t flat(int x, int y, int z, int t, int c) const {
    return (((static_cast<std::size_t>(c) * frames + t) * sz + z) * sy + y) * sx + x;
  }
  bool operator==(const PatchDims&) const = default;
};

/// Flattened patches (one column per patch) with the anchors they came from.
struct PatchSet {
  PatchDims dims;
  Index3 stride{1, 1, 1};
  Grid3 source_grid;
  std::vector<Index3> anchors;  // lower corner of each patch
  Eigen::MatrixXd patches;      // dims.length() x anchors.size()

  std::size_t size() const { return anchors.size(); }
};

/// Anchors on the stride lattice (0, s, 2s, ... while the patch fits), optionally kept only
/// where the patch centre voxel lies inside the mask.
std::vector<Index3> patch_anchors(const Grid3& grid, const PatchDims& dims, const Index3& stride,
                                  const VoxelMask* mask = nullptr);

PatchSet extract_patches(const DisplacementField4D& field, const PatchDims& dims,
                         const Index3& stride, const VoxelMask* mask = nullptr);

/// Same anchors as `like`, values taken from `field`.
PatchSet extract_patches_at(const DisplacementField4D& field, const PatchSet& like);

/// Mean of all overlapping patch values per voxel-frame; voxels no patch covers keep the
/// fallback value.
DisplacementField4D merge_patches(const PatchSet& patches, const DisplacementField4D& fallback);

/// Reshapes one flattened patch into a small Lagrangian field on a (sx, sy, sz) grid.
DisplacementField4D patch_as_field(const Eigen::Ref<const Eigen::VectorXd>& patch,
                                   const PatchDims& dims, const Vec3& spacing);

}  // namespace cardiostrain
