#pragma once

#include "cardiostrain/field.hpp"

#include <string>
#include <vector>

namespace cardiostrain {

/// Symmetric 3x3 Green-Lagrange strain tensor (dimensionless).
using StrainTensor = Mat3;

/// E = (F^T F - I) / 2 with F = I + grad U at one voxel.
StrainTensor green_lagrange(const DisplacementField4D& field, int t, const Index3& voxel);

/// Strain tensors of every frame, stored as a StrainTensor field (xx, yy, zz, xy, xz, yz).
DisplacementField4D green_lagrange_field(const DisplacementField4D& field);

/// Per-voxel cardiac directions. Columns of each triad: radial, circumferential, longitudinal.
class LvFrameField {
 public:
  /// Longitudinal = long_axis; radial = in-plane unit vector from the slice centroid to the
  /// voxel; circumferential = longitudinal x radial. Slice centroids come from the mask.
  LvFrameField(const VoxelMask& mask, const Vec3& long_axis);
  /// Same construction with the axis passing through `axis_point` in every slice.
  LvFrameField(const Grid3& grid, const Vec3& axis_point, const Vec3& long_axis);

  const Grid3& grid() const { return grid_; }
  const Vec3& long_axis() const { return axis_; }
  const Mat3& triad(std::size_t voxel) const { return triads_[voxel]; }
  /// Centroid used for slice `s` (slices are unit-spacing bins along the axis).
  const std::vector<Vec3>& centroids() const { return centroids_; }

 private:
  void build(const std::vector<Vec3>& centroid_of_slice, double origin_proj, double bin);

  Grid3 grid_;
  Vec3 axis_;
  std::vector<Vec3> centroids_;
  std::vector<Mat3> triads_;
};

/// (radial, circumferential, longitudinal) projections d^T E d. Throws ConfigError when the
/// triad is not orthonormal.
Vec3 project_strain(const StrainTensor& E, const Mat3& triad);

/// Projected strain of every voxel and frame (a StrainProjections field).
DisplacementField4D projected_strain_field(const DisplacementField4D& field, const LvFrameField& frames);

struct PrincipalStrain {
  Vec3 values;   // descending
  Mat3 vectors;  // matching unit eigenvectors as columns
};

PrincipalStrain principal_strain(const StrainTensor& E);

/// Eigenvalue of largest magnitude, sign kept.
double dominant_principal(const StrainTensor& E);

struct PeakStrain {
  double value = 0.0;
  int frame = 0;
};

/// Signed extremum (largest |value|, first occurrence) of a strain series.
PeakStrain peak_strain(const std::vector<double>& series);

/// stress - rest per voxel. Throws DimensionError on grid mismatch.
ScalarVolume differential_strain(const ScalarVolume& rest, const ScalarVolume& stress);

struct ZoneSummary {
  std::string zone;
  double median = 0.0;
  std::size_t count = 0;
};

/// Median of `map` over each zone mask.
std::vector<ZoneSummary> zone_medians(const ScalarVolume& map,
                                      const std::vector<std::pair<std::string, VoxelMask>>& zones);

}  // namespace cardiostrain
