#pragma once

#include "cardiostrain/mlp.hpp"
#include "cardiostrain/operators.hpp"

#include <Eigen/SparseCore>

namespace cardiostrain {

enum class SupervisedLoss { LogCosh, Squared };

SupervisedLoss parse_supervised_loss(const std::string& s);
const char* to_string(SupervisedLoss s);

/// Weights of the regularization objective. Every term is a per-sample mean:
///
///   lambda_recon * mean (U_noise - U_pred)^2
/// + lambda_super * [supervised] * s(U_true, U_pred)
/// + lambda_div   * divergence_penalty(U_pred)
/// + lambda_loop  * loop_penalty(U_pred)
///
/// and the batch loss is the mean over samples.
struct LossConfig {
  double lambda_recon = 1.0;
  double lambda_super = 1.0;
  double lambda_div = 0.5;
  double lambda_loop = 0.5;
  LoopMode loop_mode = LoopMode::Literal;
  SupervisedLoss supervised_loss = SupervisedLoss::Squared;

  void validate() const;

  /// Noisy -> true regression with log-cosh, no reconstruction or penalty terms.
  static LossConfig supervised();
  /// Reconstruction plus biomechanical penalties (lambda_super = 0).
  static LossConfig autoencoder(double lambda_div = 0.5, double lambda_loop = 0.5);
  /// Autoencoder objective plus the squared supervised term.
  static LossConfig semi_supervised(double lambda_super = 1.0, double lambda_div = 0.5,
                                    double lambda_loop = 0.5);
};

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;
  double super = 0.0;
  double div = 0.0;
  double loop = 0.0;
};

/// mean_i log cosh(target_i - pred_i), evaluated as |r| + log(1 + e^{-2|r|}) - log 2.
double logcosh_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                    const Eigen::Ref<const Eigen::VectorXd>& target);

/// Linear penalty operators on a flattened patch. Divergence uses the same finite-difference
/// stencils as gradient_tensor; loop operators take forward temporal differences.
class PatchPenaltyOperators {
 public:
  PatchPenaltyOperators(const PatchDims& dims, const Vec3& spacing);

  const PatchDims& dims() const { return dims_; }
  /// (tr grad U) per voxel-frame; rows = voxels * frames.
  const Eigen::SparseMatrix<double>& divergence() const { return div_; }
  /// U_{t+1} - U_t per voxel-frame-component.
  const Eigen::SparseMatrix<double>& temporal_difference() const { return tdiff_; }
  /// U_{T-1} - U_0 per voxel-component.
  const Eigen::SparseMatrix<double>& closure() const { return closure_; }

  /// Penalty values per column of `patches` (matching the field operators' normalization).
  Eigen::VectorXd divergence_penalty(const Eigen::Ref<const Eigen::MatrixXd>& patches) const;
  Eigen::VectorXd loop_penalty(const Eigen::Ref<const Eigen::MatrixXd>& patches, LoopMode mode) const;
  /// Gradient of the per-sample penalty with respect to each patch column.
  Eigen::MatrixXd divergence_gradient(const Eigen::Ref<const Eigen::MatrixXd>& patches) const;
  Eigen::MatrixXd loop_gradient(const Eigen::Ref<const Eigen::MatrixXd>& patches, LoopMode mode) const;

 private:
  PatchDims dims_;
  Eigen::SparseMatrix<double> div_, tdiff_, closure_;
  double voxels_ = 1.0;
};

/// A mini-batch; columns are samples.
struct TrainBatch {
  Eigen::MatrixXd inputs;   // model input (views * d rows)
  Eigen::MatrixXd noisy;    // reconstruction reference (d rows); empty means `inputs`
  Eigen::MatrixXd targets;  // d rows; columns of unsupervised samples are ignored
  std::vector<std::uint8_t> supervised;

  Eigen::Index size() const { return inputs.cols(); }
  /// Throws DimensionError when shapes or the supervised flags are inconsistent.
  void validate(const MlpModel& model) const;
};

/// Loss terms of already computed predictions. When `grad` is non-null it receives
/// d(total) / d(pred), one column per sample.
LossTerms evaluate_loss(const Eigen::Ref<const Eigen::MatrixXd>& pred, const TrainBatch& batch,
                        const LossConfig& config, const PatchPenaltyOperators& ops,
                        Eigen::MatrixXd* grad = nullptr);

/// Eval-mode objective of the model on a batch.
LossTerms total_loss(const MlpModel& model, const TrainBatch& batch, const LossConfig& config);

struct ModelGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  LossTerms loss;

  Eigen::VectorXd flatten() const;
};

/// Exact reverse-mode gradient of total_loss with respect to all weights and biases. A
/// non-null `dropout_rng` evaluates the training-mode (dropout) objective instead.
ModelGradient backward(const MlpModel& model, const TrainBatch& batch, const LossConfig& config,
                       std::mt19937_64* dropout_rng = nullptr,
                       const PatchPenaltyOperators* ops = nullptr);

}  // namespace cardiostrain
