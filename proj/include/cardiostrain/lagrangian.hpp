#pragma once

#include "cardiostrain/field.hpp"

namespace cardiostrain {

struct LagrangianResult {
  DisplacementField4D field;
  VoxelMask flagged;             // trajectories that left the grid and were clamped
  double flagged_fraction = 0.0;
};

/// Accumulates frame-to-frame displacements along material trajectories.
///
/// Eulerian frame t (t >= 1) holds the displacement from frame t-1 to frame t at fixed grid
/// positions; frame 0 is ignored. Each material point starts at a frame-0 voxel centre and is
/// advanced by trilinear sampling of frame t at its current position.
LagrangianResult eulerian_to_lagrangian(const DisplacementField4D& eulerian);

}  // namespace cardiostrain
