#include "cardiostrain/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cardiostrain {

std::size_t TrainingSet::supervised_count() const {
  return static_cast<std::size_t>(std::count_if(supervised.begin(), supervised.end(), [](auto s) { return s != 0; }));
}

void TrainingSet::append(const Eigen::Ref<const Eigen::MatrixXd>& in,
                         const Eigen::Ref<const Eigen::MatrixXd>& tgt, bool is_supervised,
                         const Eigen::Ref<const Eigen::MatrixXd>& noisy_ref) {
  const Eigen::Index n = in.cols();
  if (n == 0) return;
  if (inputs.size() != 0 && in.rows() != inputs.rows()) throw DimensionError("input rows differ from existing samples");
  if (is_supervised && tgt.cols() != n) throw DimensionError("supervised samples need targets");
  if (noisy_ref.size() != 0 && noisy_ref.cols() != n) throw DimensionError("noisy reference column count mismatch");

  Eigen::Index d = targets.rows();
  if (d == 0) d = tgt.size() ? tgt.rows() : (noisy_ref.size() ? noisy_ref.rows() : in.rows());
  if ((tgt.size() && tgt.rows() != d) || (noisy_ref.size() && noisy_ref.rows() != d))
    throw DimensionError("target / noisy rows differ from patch length");

  const Eigen::Index old = inputs.cols();
  inputs.conservativeResize(in.rows(), old + n);
  inputs.rightCols(n) = in;
  targets.conservativeResize(d, old + n);
  if (tgt.size()) targets.rightCols(n) = tgt;
  else targets.rightCols(n).setZero();

  if (noisy_ref.size() != 0 && noisy.size() == 0 && old > 0) noisy = inputs.leftCols(old).topRows(d);
  if (noisy_ref.size() != 0 || noisy.size() != 0) {
    noisy.conservativeResize(d, old + n);
    if (noisy_ref.size()) noisy.rightCols(n) = noisy_ref;
    else noisy.rightCols(n) = in.topRows(d);
  }
  supervised.insert(supervised.end(), static_cast<std::size_t>(n), is_supervised ? 1 : 0);
}

void TrainOptions::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("learning rate decay must be positive");
  if (supervised_fraction < 0.0 || supervised_fraction > 1.0)
    throw ConfigError("supervised fraction must lie in [0, 1]");
  if (identity_fraction < 0.0 || identity_fraction > 1.0)
    throw ConfigError("identity fraction must lie in [0, 1]");
}

namespace {

struct SampleRef {
  Eigen::Index index;
  bool identity;  // (target, target) augmentation pair
};

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const MlpModel& m) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      mw.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
      vw.push_back(mw.back());
      mb.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
      vb.push_back(mb.back());
    }
  }

  template <typename P, typename G>
  static void update(P& param, const G& grad, P& m, P& v, const TrainOptions& o, double lr,
                     double c1, double c2) {
    m = o.beta1 * m + (1.0 - o.beta1) * grad;
    v = o.beta2 * v + (1.0 - o.beta2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.epsilon);
  }

  void apply(MlpModel& model, const ModelGradient& g, const TrainOptions& o, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      update(model.weights[l], g.weights[l], mw[l], vw[l], o, lr, c1, c2);
      update(model.biases[l], g.biases[l], mb[l], vb[l], o, lr, c1, c2);
    }
  }
};

TrainBatch assemble(const TrainingSet& data, const std::vector<SampleRef>& refs, int views) {
  const Eigen::Index B = static_cast<Eigen::Index>(refs.size());
  const Eigen::Index d = data.targets.rows();
  TrainBatch b;
  b.inputs.resize(data.inputs.rows(), B);
  b.noisy.resize(d, B);
  b.targets.resize(d, B);
  b.supervised.resize(refs.size());
  for (Eigen::Index c = 0; c < B; ++c) {
    const auto& r = refs[static_cast<std::size_t>(c)];
    b.targets.col(c) = data.targets.col(r.index);
    b.supervised[static_cast<std::size_t>(c)] = data.supervised[static_cast<std::size_t>(r.index)];
    if (r.identity) {
      for (int v = 0; v < views; ++v) b.inputs.col(c).segment(v * d, d) = data.targets.col(r.index);
      b.noisy.col(c) = data.targets.col(r.index);
    } else {
      b.inputs.col(c) = data.inputs.col(r.index);
      if (data.noisy.size()) b.noisy.col(c) = data.noisy.col(r.index);
      else b.noisy.col(c) = data.inputs.col(r.index).head(d);
    }
  }
  return b;
}

void accumulate(LossTerms& acc, const LossTerms& t, double w) {
  acc.total += w * t.total;
  acc.recon += w * t.recon;
  acc.super += w * t.super;
  acc.div += w * t.div;
  acc.loop += w * t.loop;
}

}  // namespace

TrainResult train(MlpModel model, const TrainingSet& data, const LossConfig& config,
                  const TrainOptions& options, const EpochCallback& on_epoch) {
  options.validate();
  config.validate();
  model.validate();
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (data.inputs.rows() != model.input_dim() || data.targets.rows() != model.output_dim())
    throw DimensionError("training data does not match model dims");
  if (static_cast<Eigen::Index>(data.supervised.size()) != data.size())
    throw DimensionError("supervised flags must have one entry per sample");

  std::mt19937_64 rng(options.seed);
  if (options.normalize_inputs) {
    const double rms = std::sqrt(data.inputs.squaredNorm() / static_cast<double>(data.inputs.size()));
    model.input_scale = rms > 0.0 ? 1.0 / rms : 1.0;
  }

  std::vector<SampleRef> sup, unsup;
  std::bernoulli_distribution take_identity(options.identity_fraction);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (data.supervised[static_cast<std::size_t>(i)]) {
      sup.push_back({i, false});
      if (take_identity(rng)) sup.push_back({i, true});
    } else {
      unsup.push_back({i, false});
    }
  }

  const int B = options.batch_size;
  int n_sup = 0;
  if (!sup.empty() && !unsup.empty())
    n_sup = std::clamp(static_cast<int>(std::lround(B * options.supervised_fraction)), 1, B - 1);
  else if (!sup.empty())
    n_sup = B;
  const int n_unsup = B - n_sup;
  const auto batches_for = [](std::size_t pool, int per) {
    return per > 0 ? static_cast<long>((pool + per - 1) / static_cast<std::size_t>(per)) : 0L;
  };
  const long n_batches = std::max(1L, std::max(batches_for(sup.size(), n_sup), batches_for(unsup.size(), n_unsup)));

  const PatchPenaltyOperators ops(model.patch_dims, model.spacing);
  AdamState adam(model);
  TrainResult result;
  std::size_t sup_pos = 0, unsup_pos = 0;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(sup.begin(), sup.end(), rng);
    std::shuffle(unsup.begin(), unsup.end(), rng);
    sup_pos = unsup_pos = 0;
    const double lr = options.learning_rate * std::pow(options.lr_decay, epoch);
    LossTerms epoch_terms;

    for (long b = 0; b < n_batches; ++b) {
      std::vector<SampleRef> refs;
      refs.reserve(static_cast<std::size_t>(B));
      // Pools shorter than the epoch wrap around.
      for (int k = 0; k < n_sup; ++k) refs.push_back(sup[sup_pos++ % sup.size()]);
      for (int k = 0; k < n_unsup; ++k) refs.push_back(unsup[unsup_pos++ % unsup.size()]);
      const TrainBatch batch = assemble(data, refs, model.views);
      const ModelGradient g = backward(model, batch, config, &rng, &ops);
      if (!std::isfinite(g.loss.total)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << b << " (recon " << g.loss.recon
            << ", super " << g.loss.super << ", div " << g.loss.div << ", loop " << g.loss.loop << ")";
        throw NumericalError(msg.str());
      }
      adam.apply(model, g, options, lr);
      accumulate(epoch_terms, g.loss, 1.0 / static_cast<double>(n_batches));
    }
    result.history.push_back(epoch_terms);
    if (on_epoch) on_epoch(epoch, epoch_terms);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace cardiostrain
