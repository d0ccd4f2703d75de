#pragma once

#include "cardiostrain/loss.hpp"

#include <functional>

namespace cardiostrain {

/// Training samples, one column per sample.
///
/// Supervised samples carry a target (the "synthetic" domain); unsupervised samples do not
/// (the "in-vivo" domain). For multi-view models `inputs` stacks the views and `noisy` holds
/// the reconstruction reference; empty `noisy` means the first d rows of `inputs`.
struct TrainingSet {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd noisy;
  Eigen::MatrixXd targets;  // d x N; unsupervised columns unused
  std::vector<std::uint8_t> supervised;

  Eigen::Index size() const { return inputs.cols(); }
  std::size_t supervised_count() const;

  /// Appends samples; `targets` may be empty when none of them is supervised.
  void append(const Eigen::Ref<const Eigen::MatrixXd>& in, const Eigen::Ref<const Eigen::MatrixXd>& tgt,
              bool is_supervised, const Eigen::Ref<const Eigen::MatrixXd>& noisy_ref = Eigen::MatrixXd());
};

struct TrainOptions {
  int epochs = 30;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;            // multiplicative per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double supervised_fraction = 0.5; // share of each mixed batch drawn from supervised samples
  double identity_fraction = 1.0;   // identity (target, target) pairs per supervised sample
  bool normalize_inputs = false;    // scale inputs to unit RMS
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  std::vector<LossTerms> history;  // per-epoch means over batches
};

using EpochCallback = std::function<void(int epoch, const LossTerms&)>;

/// Mini-batch training with Adam. Supervised samples get identity-pair augmentation; each
/// batch mixes supervised and unsupervised samples at `supervised_fraction`. Deterministic for
/// a given seed. Throws NumericalError if the loss becomes non-finite.
TrainResult train(MlpModel model, const TrainingSet& data, const LossConfig& config,
                  const TrainOptions& options, const EpochCallback& on_epoch = {});

}  // namespace cardiostrain
