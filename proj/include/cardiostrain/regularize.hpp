#pragma once

#include "cardiostrain/mlp.hpp"

namespace cardiostrain {

/// Runs a trained model over every patch of `field` and merges the predictions back.
/// Voxels no patch covers keep their input value; frame 0 is reset to zero.
DisplacementField4D regularize_field(const MlpModel& model, const DisplacementField4D& field,
                                     const Index3& stride, const VoxelMask* mask = nullptr);

/// Two-view variant: patch pairs are concatenated A then B at the input layer.
/// Throws DimensionError when the fields do not share grid and frame count.
DisplacementField4D fuse_multiview(const MlpModel& model, const DisplacementField4D& field_a,
                                   const DisplacementField4D& field_b, const Index3& stride,
                                   const VoxelMask* mask = nullptr);

/// Model inputs for a patch set: one column per patch, views stacked.
Eigen::MatrixXd stack_views(const std::vector<const PatchSet*>& views);

struct DomainActivations {
  Eigen::MatrixXd activations;       // one row per patch
  std::vector<std::string> domain;   // label per row
};

/// Eval-mode hidden activations of several patch groups, each tagged with its domain label.
DomainActivations export_hidden_activations(const MlpModel& model,
                                            const std::vector<Eigen::MatrixXd>& inputs,
                                            const std::vector<std::string>& labels,
                                            int layer_index);

}  // namespace cardiostrain
