#include "cardiostrain/metrics.hpp"

#include "cardiostrain/stats.hpp"

#include <cmath>

namespace cardiostrain {

namespace {

std::vector<std::size_t> voxels_of(const Grid3& g, const VoxelMask* mask) {
  if (mask && !mask->grid.same_shape(g)) throw DimensionError("mask grid differs from field grid");
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.voxel_count(); ++v)
    if (!mask || mask->at(v)) out.push_back(v);
  if (out.empty()) throw ConfigError("mask selects no voxels");
  return out;
}

}  // namespace

TrackingError tracking_error(const DisplacementField4D& est, const DisplacementField4D& gt,
                             const VoxelMask* mask) {
  est.require_same_shape(gt, "tracking_error");
  const auto vox = voxels_of(gt.grid(), mask);
  TrackingError te;
  std::vector<double> e(vox.size());
  for (int t = 0; t < gt.frames(); ++t) {
    for (std::size_t i = 0; i < vox.size(); ++i) e[i] = (est.vec(t, vox[i]) - gt.vec(t, vox[i])).norm();
    const double q25 = quantile_inplace(e, 0.25);
    const double q50 = quantile_inplace(e, 0.5);
    const double q75 = quantile_inplace(e, 0.75);
    te.median.push_back(q50);
    te.iqr.push_back(q75 - q25);
  }
  const std::size_t first = gt.frames() > 1 ? 1 : 0;
  te.summary = median({te.median.begin() + static_cast<std::ptrdiff_t>(first), te.median.end()});
  te.summary_iqr = median({te.iqr.begin() + static_cast<std::ptrdiff_t>(first), te.iqr.end()});
  return te;
}

StrainError strain_error(const DisplacementField4D& est, const DisplacementField4D& gt,
                         const LvFrameField& frames, const VoxelMask* mask) {
  est.require_same_shape(gt, "strain_error");
  const DisplacementField4D pe = projected_strain_field(est, frames);
  const DisplacementField4D pg = projected_strain_field(gt, frames);
  const auto vox = voxels_of(gt.grid(), mask);
  std::array<std::vector<double>, 3> d;
  for (int t = gt.frames() > 1 ? 1 : 0; t < gt.frames(); ++t)
    for (std::size_t v : vox) {
      const Vec3 diff = (pe.vec(t, v) - pg.vec(t, v)).cwiseAbs() * 100.0;
      for (int a = 0; a < 3; ++a) d[static_cast<std::size_t>(a)].push_back(diff[a]);
    }
  StrainError se;
  for (int a = 0; a < 3; ++a) {
    auto& v = d[static_cast<std::size_t>(a)];
    se.iqr[a] = quantile(v, 0.75) - quantile(v, 0.25);
    se.median[a] = median(std::move(v));
  }
  return se;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionError("pearson: length mismatch");
  if (xs.size() < 2) throw DimensionError("pearson needs at least two samples");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace cardiostrain
