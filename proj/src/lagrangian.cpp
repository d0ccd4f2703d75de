#include "cardiostrain/lagrangian.hpp"

#include <algorithm>

namespace cardiostrain {

LagrangianResult eulerian_to_lagrangian(const DisplacementField4D& eulerian) {
  if (eulerian.components() != 3) throw DimensionError("expected a displacement field");
  const Grid3& g = eulerian.grid();
  LagrangianResult res{DisplacementField4D(g, eulerian.frames(), FrameKind::Lagrangian),
                       VoxelMask(g), 0.0};
  const Vec3 upper(g.dims[0] - 1, g.dims[1] - 1, g.dims[2] - 1);

  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    const Index3 ijk = g.unravel(v);
    const Vec3 start(ijk[0], ijk[1], ijk[2]);
    Vec3 pos = start;
    bool left = false;
    for (int t = 1; t < eulerian.frames(); ++t) {
      pos += sample_trilinear(eulerian, t, pos).cwiseQuotient(g.spacing);
      const Vec3 clamped = pos.cwiseMax(Vec3::Zero()).cwiseMin(upper);
      if (clamped != pos) {
        left = true;
        pos = clamped;
      }
      res.field.vec(t, v) = (pos - start).cwiseProduct(g.spacing);
    }
    res.flagged.data[v] = left ? 1 : 0;
  }
  res.flagged_fraction =
      static_cast<double>(res.flagged.count()) / static_cast<double>(g.voxel_count());
  return res;
}

}  // namespace cardiostrain
