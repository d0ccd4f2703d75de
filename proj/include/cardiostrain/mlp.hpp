#pragma once

#include "cardiostrain/patches.hpp"

#include <filesystem>
#include <iosfwd>
#include <random>

namespace cardiostrain {

/// Fully connected network: ReLU hidden layers, identity output, inverted dropout on hidden
/// activations in training mode.
///
/// Inputs are `views` concatenated flattened patches (single view: d = patch length; two
/// views: 2d) and the output is one patch of length d. `input_scale` multiplies inputs before
/// the first layer and divides outputs after the last, so the network sees normalized data
/// while callers work in mm.
struct MlpModel {
  std::vector<int> layer_sizes;  // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;
  double dropout_p = 0.0;
  double input_scale = 1.0;
  PatchDims patch_dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  int views = 1;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int hidden_layers() const { return static_cast<int>(layer_sizes.size()) - 2; }
  std::size_t parameter_count() const;
  void validate() const;
};

struct MlpArchitecture {
  PatchDims patch_dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  int views = 1;
  int hidden_width = 1000;
  int hidden_layers = 3;
  double dropout_p = 0.2;
};

/// He-normal weights (std sqrt(2 / fan_in)), zero biases.
MlpModel make_mlp(const MlpArchitecture& arch, std::uint64_t seed);

/// Per-layer values kept for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] scaled input, [l] output of hidden layer l
  std::vector<Eigen::MatrixXd> dropout;      // per hidden layer; empty when dropout is off
  Eigen::MatrixXd output;                    // network output (mm)
};

/// Batched forward pass; columns are samples. `dropout_rng` non-null selects training mode.
ForwardCache forward_batch(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           std::mt19937_64* dropout_rng = nullptr);

/// Single-sample forward pass. Throws DimensionError on input length mismatch.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                        std::mt19937_64* dropout_rng = nullptr);

/// Eval-mode activations of hidden layer `layer_index` (0-based), one row per input column.
Eigen::MatrixXd hidden_activations(const MlpModel& model,
                                   const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                   int layer_index);

/// Parameters flattened layer by layer (weights column-major, then biases).
Eigen::VectorXd flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& flat);

// Checkpoint: "MLPC" u32 version, u32 layer count, u32 sizes[], u32 views, u32 patch dims[4],
// f64 spacing[3], f64 dropout, f64 input_scale, then per layer f64 weights (row-major) and
// biases, little-endian.
void write_checkpoint(std::ostream& os, const MlpModel& model);
MlpModel read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace cardiostrain
