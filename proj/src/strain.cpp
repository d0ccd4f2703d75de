#include "cardiostrain/strain.hpp"

#include "cardiostrain/operators.hpp"
#include "cardiostrain/parallel.hpp"
#include "cardiostrain/stats.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace cardiostrain {

StrainTensor green_lagrange(const DisplacementField4D& field, int t, const Index3& voxel) {
  const Mat3 F = Mat3::Identity() + gradient_tensor(field, t, voxel);
  return 0.5 * (F.transpose() * F - Mat3::Identity());
}

DisplacementField4D green_lagrange_field(const DisplacementField4D& field) {
  if (field.components() != 3) throw DimensionError("strain needs a displacement field");
  DisplacementField4D out(field.grid(), field.frames(), FrameKind::StrainTensor);
  const Grid3& g = field.grid();
  for (int t = 0; t < field.frames(); ++t)
    parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
      for (std::size_t v = b; v < e; ++v) {
        const Mat3 E = green_lagrange(field, t, g.unravel(v));
        double* o = out.data().data() + out.offset(t, v);
        o[0] = E(0, 0);
        o[1] = E(1, 1);
        o[2] = E(2, 2);
        o[3] = E(0, 1);
        o[4] = E(0, 2);
        o[5] = E(1, 2);
      }
    });
  return out;
}

namespace {

struct SliceBins {
  double origin = 0.0;
  double width = 1.0;
  int count = 1;
};

SliceBins slice_bins(const Grid3& g, const Vec3& axis) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p = g.position((c & 1) ? g.dims[0] - 1 : 0, (c & 2) ? g.dims[1] - 1 : 0, (c & 4) ? g.dims[2] - 1 : 0);
    lo = std::min(lo, p.dot(axis));
    hi = std::max(hi, p.dot(axis));
  }
  SliceBins b;
  b.origin = lo;
  b.width = g.spacing.minCoeff();
  b.count = static_cast<int>(std::floor((hi - lo) / b.width + 0.5)) + 1;
  return b;
}

int bin_of(const SliceBins& b, double proj) {
  return std::clamp(static_cast<int>(std::floor((proj - b.origin) / b.width + 0.5)), 0, b.count - 1);
}

Vec3 unit_axis(const Vec3& a) {
  const double n = a.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("long axis must be a non-zero vector");
  return a / n;
}

}  // namespace

LvFrameField::LvFrameField(const VoxelMask& mask, const Vec3& long_axis)
    : grid_(mask.grid), axis_(unit_axis(long_axis)) {
  const SliceBins bins = slice_bins(grid_, axis_);
  std::vector<Vec3> sum(static_cast<std::size_t>(bins.count), Vec3::Zero());
  std::vector<int> n(static_cast<std::size_t>(bins.count), 0);
  for (std::size_t v = 0; v < grid_.voxel_count(); ++v) {
    if (!mask.at(v)) continue;
    const Vec3 p = grid_.position(grid_.unravel(v));
    const auto s = static_cast<std::size_t>(bin_of(bins, p.dot(axis_)));
    sum[s] += p;
    ++n[s];
  }
  if (mask.count() == 0) throw ConfigError("LV frame needs a non-empty mask");
  // Slices without mask voxels borrow the nearest populated slice.
  std::vector<Vec3> c(sum.size());
  for (std::size_t s = 0; s < sum.size(); ++s) {
    std::size_t best = 0;
    long dist = std::numeric_limits<long>::max();
    for (std::size_t q = 0; q < sum.size(); ++q)
      if (n[q] > 0 && std::labs(static_cast<long>(q) - static_cast<long>(s)) < dist) {
        dist = std::labs(static_cast<long>(q) - static_cast<long>(s));
        best = q;
      }
    c[s] = sum[best] / n[best];
  }
  build(c, bins.origin, bins.width);
}

LvFrameField::LvFrameField(const Grid3& grid, const Vec3& axis_point, const Vec3& long_axis)
    : grid_(grid), axis_(unit_axis(long_axis)) {
  const SliceBins bins = slice_bins(grid_, axis_);
  build(std::vector<Vec3>(static_cast<std::size_t>(bins.count), axis_point), bins.origin, bins.width);
}

void LvFrameField::build(const std::vector<Vec3>& centroid_of_slice, double origin_proj, double bin) {
  centroids_ = centroid_of_slice;
  const SliceBins bins{origin_proj, bin, static_cast<int>(centroid_of_slice.size())};
  // Fallback radial direction for voxels on the axis.
  Vec3 any = axis_.cross(Vec3::UnitX());
  if (any.norm() < 0.5) any = axis_.cross(Vec3::UnitY());
  any.normalize();
  triads_.resize(grid_.voxel_count());
  for (std::size_t v = 0; v < grid_.voxel_count(); ++v) {
    const Vec3 p = grid_.position(grid_.unravel(v));
    const Vec3 d = p - centroids_[static_cast<std::size_t>(bin_of(bins, p.dot(axis_)))];
    Vec3 r = d - d.dot(axis_) * axis_;
    r = r.norm() > 1e-12 ? Vec3(r.normalized()) : any;
    Mat3 T;
    T.col(0) = r;
    T.col(1) = axis_.cross(r);
    T.col(2) = axis_;
    triads_[v] = T;
  }
}

Vec3 project_strain(const StrainTensor& E, const Mat3& triad) {
  if ((triad.transpose() * triad - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-8)
    throw ConfigError("strain projection needs an orthonormal triad");
  Vec3 out;
  for (int a = 0; a < 3; ++a) out[a] = triad.col(a).dot(E * triad.col(a));
  return out;
}

DisplacementField4D projected_strain_field(const DisplacementField4D& field, const LvFrameField& frames) {
  if (!field.grid().same_shape(frames.grid())) throw DimensionError("LV frame grid differs from field grid");
  DisplacementField4D out(field.grid(), field.frames(), FrameKind::StrainProjections);
  const Grid3& g = field.grid();
  for (int t = 0; t < field.frames(); ++t)
    parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
      for (std::size_t v = b; v < e; ++v)
        out.vec(t, v) = project_strain(green_lagrange(field, t, g.unravel(v)), frames.triad(v));
    });
  return out;
}

PrincipalStrain principal_strain(const StrainTensor& E) {
  const Mat3 S = 0.5 * (E + E.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  // Eigen sorts ascending.
  PrincipalStrain p;
  for (int i = 0; i < 3; ++i) {
    p.values[i] = es.eigenvalues()[2 - i];
    p.vectors.col(i) = es.eigenvectors().col(2 - i);
  }
  return p;
}

double dominant_principal(const StrainTensor& E) {
  const Vec3 l = principal_strain(E).values;
  return std::abs(l[2]) > std::abs(l[0]) ? l[2] : l[0];
}

PeakStrain peak_strain(const std::vector<double>& series) {
  PeakStrain p;
  for (std::size_t t = 0; t < series.size(); ++t)
    if (std::abs(series[t]) > std::abs(p.value)) {
      p.value = series[t];
      p.frame = static_cast<int>(t);
    }
  return p;
}

ScalarVolume differential_strain(const ScalarVolume& rest, const ScalarVolume& stress) {
  if (!rest.grid.same_shape(stress.grid)) throw DimensionError("differential strain: grids differ");
  ScalarVolume d(rest.grid);
  for (std::size_t v = 0; v < d.data.size(); ++v) d.data[v] = stress.data[v] - rest.data[v];
  return d;
}

std::vector<ZoneSummary> zone_medians(const ScalarVolume& map,
                                      const std::vector<std::pair<std::string, VoxelMask>>& zones) {
  std::vector<ZoneSummary> out;
  for (const auto& [name, mask] : zones) {
    if (!mask.grid.same_shape(map.grid)) throw DimensionError("zone mask grid differs from map");
    std::vector<double> vals;
    for (std::size_t v = 0; v < map.data.size(); ++v)
      if (mask.at(v)) vals.push_back(map.data[v]);
    if (vals.empty()) throw ConfigError("zone " + name + " is empty");
    out.push_back({name, median(vals), vals.size()});
  }
  return out;
}

}  // namespace cardiostrain
