#pragma once

#include "cardiostrain/strain.hpp"

namespace cardiostrain {

struct TrackingError {
  std::vector<double> median;  // per frame, mm
  std::vector<double> iqr;     // per frame, q75 - q25
  double summary = 0.0;        // median of per-frame medians over frames t >= 1
  double summary_iqr = 0.0;    // median of per-frame IQRs over frames t >= 1
};

/// Per-frame median and IQR of |U_est - U_gt| over mask voxels (all voxels without a mask).
TrackingError tracking_error(const DisplacementField4D& est, const DisplacementField4D& gt,
                             const VoxelMask* mask = nullptr);

struct StrainError {
  Vec3 median = Vec3::Zero();  // %, (radial, circumferential, longitudinal)
  Vec3 iqr = Vec3::Zero();
};

/// |projected strain difference| * 100 over mask voxels and frames t >= 1.
StrainError strain_error(const DisplacementField4D& est, const DisplacementField4D& gt,
                         const LvFrameField& frames, const VoxelMask* mask = nullptr);

/// Sample Pearson correlation. Throws DimensionError for unequal or too short inputs and
/// NumericalError for zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace cardiostrain
