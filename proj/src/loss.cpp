#include "cardiostrain/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace cardiostrain {

SupervisedLoss parse_supervised_loss(const std::string& s) {
  if (s == "logcosh") return SupervisedLoss::LogCosh;
  if (s == "mse" || s == "squared") return SupervisedLoss::Squared;
  throw ConfigError("unknown supervised loss: " + s);
}

const char* to_string(SupervisedLoss s) {
  return s == SupervisedLoss::LogCosh ? "logcosh" : "mse";
}

void LossConfig::validate() const {
  for (double l : {lambda_recon, lambda_super, lambda_div, lambda_loop})
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be finite and >= 0");
}

LossConfig LossConfig::supervised() {
  return {0.0, 1.0, 0.0, 0.0, LoopMode::Literal, SupervisedLoss::LogCosh};
}

LossConfig LossConfig::autoencoder(double lambda_div, double lambda_loop) {
  return {1.0, 0.0, lambda_div, lambda_loop, LoopMode::Literal, SupervisedLoss::Squared};
}

LossConfig LossConfig::semi_supervised(double lambda_super, double lambda_div, double lambda_loop) {
  return {1.0, lambda_super, lambda_div, lambda_loop, LoopMode::Literal, SupervisedLoss::Squared};
}

namespace {

// log cosh r without overflow.
double logcosh(double r) {
  const double a = std::abs(r);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

double logcosh_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                    const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (pred.size() != target.size()) throw DimensionError("logcosh: length mismatch");
  if (pred.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) sum += logcosh(target[i] - pred[i]);
  return sum / static_cast<double>(pred.size());
}

PatchPenaltyOperators::PatchPenaltyOperators(const PatchDims& dims, const Vec3& spacing)
    : dims_(dims) {
  const int n = static_cast<int>(dims.spatial());
  const int T = dims.frames;
  const auto d = static_cast<Eigen::Index>(dims.length());
  voxels_ = n;
  const std::array<int, 3> ext{dims.sx, dims.sy, dims.sz};
  using Triplet = Eigen::Triplet<double>;

  std::vector<Triplet> div;
  for (int t = 0; t < T; ++t)
    for (int z = 0; z < dims.sz; ++z)
      for (int y = 0; y < dims.sy; ++y)
        for (int x = 0; x < dims.sx; ++x) {
          const int row = t * n + (z * dims.sy + y) * dims.sx + x;
          const std::array<int, 3> p{x, y, z};
          for (int a = 0; a < 3; ++a) {
            if (ext[a] < 2) continue;
            std::array<int, 3> lo = p, hi = p;
            double h = spacing[a];
            if (p[a] == 0) {
              hi[a] = 1;
            } else if (p[a] == ext[a] - 1) {
              lo[a] = p[a] - 1;
            } else {
              lo[a] = p[a] - 1;
              hi[a] = p[a] + 1;
              h *= 2.0;
            }
            div.emplace_back(row, static_cast<int>(dims.flat(hi[0], hi[1], hi[2], t, a)), 1.0 / h);
            div.emplace_back(row, static_cast<int>(dims.flat(lo[0], lo[1], lo[2], t, a)), -1.0 / h);
          }
        }
  div_.resize(static_cast<Eigen::Index>(n) * T, d);
  div_.setFromTriplets(div.begin(), div.end());

  std::vector<Triplet> td, cl;
  for (int z = 0; z < dims.sz; ++z)
    for (int y = 0; y < dims.sy; ++y)
      for (int x = 0; x < dims.sx; ++x) {
        const int v = (z * dims.sy + y) * dims.sx + x;
        for (int c = 0; c < 3; ++c) {
          for (int t = 0; t + 1 < T; ++t) {
            const int row = (t * n + v) * 3 + c;
            td.emplace_back(row, static_cast<int>(dims.flat(x, y, z, t + 1, c)), 1.0);
            td.emplace_back(row, static_cast<int>(dims.flat(x, y, z, t, c)), -1.0);
          }
          if (T >= 2) {
            cl.emplace_back(v * 3 + c, static_cast<int>(dims.flat(x, y, z, T - 1, c)), 1.0);
            cl.emplace_back(v * 3 + c, static_cast<int>(dims.flat(x, y, z, 0, c)), -1.0);
          }
        }
      }
  tdiff_.resize(static_cast<Eigen::Index>(n) * std::max(T - 1, 0) * 3, d);
  tdiff_.setFromTriplets(td.begin(), td.end());
  closure_.resize(static_cast<Eigen::Index>(n) * 3, d);
  closure_.setFromTriplets(cl.begin(), cl.end());
}

Eigen::VectorXd PatchPenaltyOperators::divergence_penalty(const Eigen::Ref<const Eigen::MatrixXd>& patches) const {
  const Eigen::MatrixXd r = div_ * patches;
  return r.colwise().squaredNorm().transpose() / (voxels_ * dims_.frames);
}

Eigen::MatrixXd PatchPenaltyOperators::divergence_gradient(const Eigen::Ref<const Eigen::MatrixXd>& patches) const {
  const Eigen::MatrixXd r = div_ * patches;
  return (2.0 / (voxels_ * dims_.frames)) * (div_.transpose() * r);
}

Eigen::VectorXd PatchPenaltyOperators::loop_penalty(const Eigen::Ref<const Eigen::MatrixXd>& patches,
                                                    LoopMode mode) const {
  if (dims_.frames < 2) throw DimensionError("loop penalty needs at least two frames");
  const auto& op = mode == LoopMode::Literal ? tdiff_ : closure_;
  const Eigen::MatrixXd r = op * patches;
  return r.colwise().squaredNorm().transpose() / voxels_;
}

Eigen::MatrixXd PatchPenaltyOperators::loop_gradient(const Eigen::Ref<const Eigen::MatrixXd>& patches,
                                                     LoopMode mode) const {
  if (dims_.frames < 2) throw DimensionError("loop penalty needs at least two frames");
  const auto& op = mode == LoopMode::Literal ? tdiff_ : closure_;
  const Eigen::MatrixXd r = op * patches;
  return (2.0 / voxels_) * (op.transpose() * r);
}

void TrainBatch::validate(const MlpModel& model) const {
  const Eigen::Index B = inputs.cols();
  const Eigen::Index d = model.output_dim();
  if (inputs.rows() != model.input_dim()) throw DimensionError("batch inputs do not match model input dim");
  if (noisy.size() != 0 && (noisy.rows() != d || noisy.cols() != B))
    throw DimensionError("batch noisy reference has wrong shape");
  if (static_cast<Eigen::Index>(supervised.size()) != B)
    throw DimensionError("supervised flags must have one entry per sample");
  const bool any = std::any_of(supervised.begin(), supervised.end(), [](auto s) { return s != 0; });
  if (any && (targets.rows() != d || targets.cols() != B))
    throw DimensionError("supervised samples need a target column each");
}

LossTerms evaluate_loss(const Eigen::Ref<const Eigen::MatrixXd>& pred, const TrainBatch& batch,
                        const LossConfig& config, const PatchPenaltyOperators& ops,
                        Eigen::MatrixXd* grad) {
  const Eigen::Index B = pred.cols();
  const Eigen::Index d = pred.rows();
  if (B == 0) throw DimensionError("empty batch");
  if (d != static_cast<Eigen::Index>(ops.dims().length()))
    throw DimensionError("prediction length does not match patch dims");
  const Eigen::MatrixXd& noisy_src = batch.noisy.size() ? batch.noisy : batch.inputs;
  const auto noisy = noisy_src.topRows(d);

  LossTerms terms;
  const double inv_d = 1.0 / static_cast<double>(d);
  const double inv_b = 1.0 / static_cast<double>(B);
  if (grad) grad->setZero(d, B);

  {
    const Eigen::MatrixXd r = pred - noisy;
    terms.recon = r.squaredNorm() * inv_d * inv_b;
    if (grad && config.lambda_recon > 0.0) *grad += (2.0 * config.lambda_recon * inv_d * inv_b) * r;
  }

  for (Eigen::Index i = 0; i < B; ++i) {
    if (!batch.supervised[static_cast<std::size_t>(i)]) continue;
    const auto p = pred.col(i);
    const auto t = batch.targets.col(i);
    if (config.supervised_loss == SupervisedLoss::Squared) {
      terms.super += (p - t).squaredNorm() * inv_d;
      if (grad) grad->col(i) += (2.0 * config.lambda_super * inv_d * inv_b) * (p - t);
    } else {
      terms.super += logcosh_loss(p, t);
      if (grad) grad->col(i) += (config.lambda_super * inv_d * inv_b) * (p - t).array().tanh().matrix();
    }
  }
  terms.super *= inv_b;

  {
    terms.div = ops.divergence_penalty(pred).mean();
    if (grad && config.lambda_div > 0.0) *grad += (config.lambda_div * inv_b) * ops.divergence_gradient(pred);
  }
  if (ops.dims().frames >= 2) {
    terms.loop = ops.loop_penalty(pred, config.loop_mode).mean();
    if (grad && config.lambda_loop > 0.0)
      *grad += (config.lambda_loop * inv_b) * ops.loop_gradient(pred, config.loop_mode);
  }

  terms.total = config.lambda_recon * terms.recon + config.lambda_super * terms.super +
                config.lambda_div * terms.div + config.lambda_loop * terms.loop;
  return terms;
}

LossTerms total_loss(const MlpModel& model, const TrainBatch& batch, const LossConfig& config) {
  config.validate();
  batch.validate(model);
  const PatchPenaltyOperators ops(model.patch_dims, model.spacing);
  const ForwardCache cache = forward_batch(model, batch.inputs);
  return evaluate_loss(cache.output, batch, config, ops);
}

Eigen::VectorXd ModelGradient::flatten() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  Eigen::VectorXd flat(n);
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(pos, weights[l].size()) = Eigen::Map<const Eigen::VectorXd>(weights[l].data(), weights[l].size());
    pos += weights[l].size();
    flat.segment(pos, biases[l].size()) = biases[l];
    pos += biases[l].size();
  }
  return flat;
}

ModelGradient backward(const MlpModel& model, const TrainBatch& batch, const LossConfig& config,
                       std::mt19937_64* dropout_rng, const PatchPenaltyOperators* ops) {
  config.validate();
  batch.validate(model);
  std::optional<PatchPenaltyOperators> local;
  if (!ops) ops = &local.emplace(model.patch_dims, model.spacing);

  const ForwardCache cache = forward_batch(model, batch.inputs, dropout_rng);
  ModelGradient g;
  Eigen::MatrixXd delta;
  g.loss = evaluate_loss(cache.output, batch, config, *ops, &delta);
  delta /= model.input_scale;

  const std::size_t L = model.weights.size();
  g.weights.resize(L);
  g.biases.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd& a = cache.activations[l];
    g.weights[l].noalias() = delta * a.transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = model.weights[l].transpose() * delta;
    const bool has_mask = !cache.dropout.empty();
    for (Eigen::Index i = 0; i < back.size(); ++i) {
      const double act = a.data()[i];
      back.data()[i] = act > 0.0 ? back.data()[i] * (has_mask ? cache.dropout[l - 1].data()[i] : 1.0) : 0.0;
    }
    delta = std::move(back);
  }
  return g;
}

}  // namespace cardiostrain
