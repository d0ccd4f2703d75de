#include "cardiostrain/patches.hpp"

namespace cardiostrain {

namespace {

void check_fits(const Grid3& grid, const PatchDims& dims) {
  if (dims.sx < 1 || dims.sy < 1 || dims.sz < 1 || dims.frames < 1)
    throw DimensionError("patch dimensions must be >= 1");
  if (dims.sx > grid.dims[0] || dims.sy > grid.dims[1] || dims.sz > grid.dims[2])
    throw DimensionError("patch larger than grid");
}

void fill_patch(const DisplacementField4D& field, const PatchDims& dims, const Index3& a,
                Eigen::Ref<Eigen::VectorXd> out) {
  for (int t = 0; t < dims.frames; ++t)
    for (int z = 0; z < dims.sz; ++z)
      for (int y = 0; y < dims.sy; ++y)
        for (int x = 0; x < dims.sx; ++x) {
          const auto u = field.vec(t, a[0] + x, a[1] + y, a[2] + z);
          for (int c = 0; c < 3; ++c) out[dims.flat(x, y, z, t, c)] = u[c];
        }
}

}  // namespace

std::vector<Index3> patch_anchors(const Grid3& grid, const PatchDims& dims, const Index3& stride,
                                  const VoxelMask* mask) {
  check_fits(grid, dims);
  if (stride[0] < 1 || stride[1] < 1 || stride[2] < 1) throw ConfigError("stride must be >= 1");
  if (mask && !mask->grid.same_shape(grid)) throw DimensionError("mask grid differs from field grid");
  std::vector<Index3> anchors;
  for (int k = 0; k + dims.sz <= grid.dims[2]; k += stride[2])
    for (int j = 0; j + dims.sy <= grid.dims[1]; j += stride[1])
      for (int i = 0; i + dims.sx <= grid.dims[0]; i += stride[0]) {
        if (mask && !mask->at(i + dims.sx / 2, j + dims.sy / 2, k + dims.sz / 2)) continue;
        anchors.push_back({i, j, k});
      }
  return anchors;
}

PatchSet extract_patches(const DisplacementField4D& field, const PatchDims& dims,
                         const Index3& stride, const VoxelMask* mask) {
  if (field.components() != 3) throw DimensionError("patches need a 3-component field");
  if (dims.frames != field.frames()) throw DimensionError("patch T must equal field T");
  PatchSet set;
  set.dims = dims;
  set.stride = stride;
  set.source_grid = field.grid();
  set.anchors = patch_anchors(field.grid(), dims, stride, mask);
  set.patches.resize(static_cast<Eigen::Index>(dims.length()),
                     static_cast<Eigen::Index>(set.anchors.size()));
  for (std::size_t p = 0; p < set.anchors.size(); ++p)
    fill_patch(field, dims, set.anchors[p], set.patches.col(static_cast<Eigen::Index>(p)));
  return set;
}

PatchSet extract_patches_at(const DisplacementField4D& field, const PatchSet& like) {
  if (!field.grid().same_shape(like.source_grid) || field.frames() != like.dims.frames)
    throw DimensionError("field does not match patch set geometry");
  PatchSet set = like;
  for (std::size_t p = 0; p < set.anchors.size(); ++p)
    fill_patch(field, set.dims, set.anchors[p], set.patches.col(static_cast<Eigen::Index>(p)));
  return set;
}

DisplacementField4D merge_patches(const PatchSet& patches, const DisplacementField4D& fallback) {
  if (patches.size() == 0) throw DimensionError("cannot merge an empty patch set");
  if (!fallback.grid().same_shape(patches.source_grid) || fallback.frames() != patches.dims.frames)
    throw DimensionError("fallback field does not match patch source grid");
  if (patches.patches.rows() != static_cast<Eigen::Index>(patches.dims.length()) ||
      patches.patches.cols() != static_cast<Eigen::Index>(patches.size()))
    throw DimensionError("patch matrix shape inconsistent with patch dims");

  // Running mean keeps the result bit-exact when all overlapping values agree.
  const auto& d = patches.dims;
  const Grid3& g = patches.source_grid;
  DisplacementField4D out = fallback;
  out.set_kind(FrameKind::Lagrangian);
  std::vector<int> hits(g.voxel_count(), 0);

  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto& a = patches.anchors[p];
    const auto col = patches.patches.col(static_cast<Eigen::Index>(p));
    for (int z = 0; z < d.sz; ++z)
      for (int y = 0; y < d.sy; ++y)
        for (int x = 0; x < d.sx; ++x) {
          const std::size_t v = g.index(a[0] + x, a[1] + y, a[2] + z);
          const int n = ++hits[v];
          for (int t = 0; t < d.frames; ++t) {
            auto u = out.vec(t, v);
            for (int c = 0; c < 3; ++c) {
              const double val = col[static_cast<Eigen::Index>(d.flat(x, y, z, t, c))];
              u[c] = n == 1 ? val : u[c] + (val - u[c]) / n;
            }
          }
        }
  }
  return out;
}

DisplacementField4D patch_as_field(const Eigen::Ref<const Eigen::VectorXd>& patch,
                                   const PatchDims& dims, const Vec3& spacing) {
  if (patch.size() != static_cast<Eigen::Index>(dims.length()))
    throw DimensionError("patch length does not match patch dims");
  Grid3 g{{dims.sx, dims.sy, dims.sz}, spacing, Vec3::Zero()};
  DisplacementField4D f(g, dims.frames, FrameKind::Lagrangian);
  for (int t = 0; t < dims.frames; ++t)
    for (int z = 0; z < dims.sz; ++z)
      for (int y = 0; y < dims.sy; ++y)
        for (int x = 0; x < dims.sx; ++x)
          for (int c = 0; c < 3; ++c)
            f.vec(t, x, y, z)[c] = patch[static_cast<Eigen::Index>(dims.flat(x, y, z, t, c))];
  return f;
}

}  // namespace cardiostrain
