#pragma once

#include "cardiostrain/field.hpp"

namespace cardiostrain {

/// Displacement gradient J(i, j) = dU_i / dx_j at one voxel of one frame.
///
/// Second-order central differences in the interior, first-order one-sided differences on
/// the grid boundary; an axis of extent 1 contributes zero derivative.
Mat3 gradient_tensor(const DisplacementField4D& field, int t, const Index3& voxel);

/// Mean over voxel-frames of (tr grad U)^2. With a mask only mask voxels are counted.
double divergence_penalty(const DisplacementField4D& field, const VoxelMask* mask = nullptr);

enum class LoopMode {
  Literal,  // sum_t |U_{t+1} - U_t|^2
  Closure,  // |sum_t (U_{t+1} - U_t)|^2 = |U_{T-1} - U_0|^2
};

LoopMode parse_loop_mode(const std::string& s);
const char* to_string(LoopMode mode);

/// Temporal periodicity penalty, normalized by the number of (mask) voxels.
/// Throws DimensionError when the field has fewer than two frames.
double loop_penalty(const DisplacementField4D& field, LoopMode mode,
                    const VoxelMask* mask = nullptr);

}  // namespace cardiostrain
