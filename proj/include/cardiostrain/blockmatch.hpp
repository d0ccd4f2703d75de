#pragma once

#include "cardiostrain/field.hpp"

namespace cardiostrain {

enum class BlockWindow { Uniform, Triangular };

BlockWindow parse_block_window(const std::string& s);

struct BlockMatchConfig {
  Index3 block{9, 9, 9};     // voxels, odd
  Index3 search{4, 4, 4};    // +/- voxels
  BlockWindow window = BlockWindow::Uniform;
  double ncc_smooth_sigma = 1.0;  // voxels; 0 disables smoothing
  bool subvoxel = true;

  void validate() const;
};

struct NccValue {
  double rho = 0.0;
  bool padded = false;  // block or shifted block reached outside a volume (zero-padded)
};

/// Windowed zero-mean normalized cross-correlation between the block of A centred at
/// `center` and the block of B centred at `center + shift`. Flat blocks give 0.
NccValue ncc(const ScalarVolume& a, const ScalarVolume& b, const Index3& center,
             const Index3& shift, const BlockMatchConfig& config);

struct FrameTrack {
  DisplacementField4D displacement;  // single Eulerian frame, mm
  ScalarVolume confidence;           // peak correlation; 0 off-mask and for boundary peaks
};

/// Displacement of the texture from `a` to `b` per voxel: the shift maximising the
/// (optionally smoothed) correlation map, refined per axis by a parabola through the peak.
/// Voxels outside `mask` (if given) are left at zero.
FrameTrack track_frame(const ScalarVolume& a, const ScalarVolume& b, const VoxelMask* mask,
                       const BlockMatchConfig& config);

struct SequenceTrack {
  DisplacementField4D field;  // Eulerian; frame t holds frame t-1 -> t, frame 0 zero
  std::vector<ScalarVolume> confidence;
};

/// Frame-to-frame tracking of a volume sequence. Throws DimensionError for fewer than two
/// volumes or mismatched grids.
SequenceTrack track_sequence(const std::vector<ScalarVolume>& volumes, const VoxelMask* mask,
                             const BlockMatchConfig& config);

}  // namespace cardiostrain
