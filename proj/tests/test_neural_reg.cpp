#include "test_util.hpp"

#include "cardiostrain/loss.hpp"
#include "cardiostrain/phantom.hpp"
#include "cardiostrain/regularize.hpp"
#include "cardiostrain/train.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace cardiostrain;
using namespace testutil;

namespace {

const PatchDims kTiny{2, 2, 1, 2};  // d = 24

MlpModel tiny_model(int width, int layers, std::uint64_t seed, double dropout = 0.0) {
  MlpArchitecture a;
  a.patch_dims = kTiny;
  a.spacing = Vec3(1.0, 0.5, 2.0);
  a.hidden_width = width;
  a.hidden_layers = layers;
  a.dropout_p = dropout;
  return make_mlp(a, seed);
}

// Exact identity through one ReLU layer: x = relu(x) - relu(-x).
MlpModel relu_identity(const PatchDims& dims, int views = 1, int pick_view = 0) {
  const int d = static_cast<int>(dims.length());
  MlpModel m;
  m.patch_dims = dims;
  m.views = views;
  m.layer_sizes = {d * views, 2 * d, d};
  Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(2 * d, d * views);
  W1.block(0, pick_view * d, d, d).setIdentity();
  W1.block(d, pick_view * d, d, d) = -Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd W2(d, 2 * d);
  W2 << Eigen::MatrixXd::Identity(d, d), -Eigen::MatrixXd::Identity(d, d);
  m.weights = {W1, W2};
  m.biases = {Eigen::VectorXd::Zero(2 * d), Eigen::VectorXd::Zero(d)};
  m.validate();
  return m;
}

MlpModel linear_model(const PatchDims& dims, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  MlpModel m;
  m.patch_dims = dims;
  m.layer_sizes = {static_cast<int>(W.cols()), static_cast<int>(W.rows())};
  m.weights = {W};
  m.biases = {b};
  m.validate();
  return m;
}

Eigen::MatrixXd random_matrix_xd(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TrainBatch mixed_batch(const MlpModel& m, std::uint64_t seed) {
  TrainBatch b;
  const Eigen::Index d = m.output_dim();
  b.inputs = random_matrix_xd(m.input_dim(), 5, seed);
  b.targets = random_matrix_xd(d, 5, seed + 1);
  b.supervised = {1, 0, 1, 1, 0};
  return b;
}

// Relative agreement of the analytic gradient with central differences on every parameter.
double gradient_check(MlpModel model, const TrainBatch& batch, const LossConfig& config) {
  const Eigen::VectorXd g = backward(model, batch, config).flatten();
  const Eigen::VectorXd theta = flatten_parameters(model);
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    assign_parameters(model, tp);
    const double fp = total_loss(model, batch, config).total;
    assign_parameters(model, tm);
    const double fm = total_loss(model, batch, config).total;
    const double fd = (fp - fm) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-4});
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_SUITE("forward") {
  TEST_CASE("zero weights and biases give zero output") {
    MlpModel m = tiny_model(8, 2, 1);
    for (auto& W : m.weights) W.setZero();
    const Eigen::VectorXd out = forward(m, Eigen::VectorXd::Random(24));
    CHECK(out.isZero(0.0));
  }

  TEST_CASE("identity linear layer passes the input through") {
    const MlpModel m = linear_model(kTiny, Eigen::MatrixXd::Identity(24, 24), Eigen::VectorXd::Zero(24));
    CHECK(m.hidden_layers() == 0);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(24);
    CHECK(forward(m, x) == x);
  }

  TEST_CASE("eval mode is deterministic; train mode depends on the dropout stream") {
    const MlpModel m = tiny_model(16, 2, 2, 0.3);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(24);
    CHECK(forward(m, x) == forward(m, x));
    std::mt19937_64 r1(5), r2(5);
    CHECK(forward(m, x, &r1) == forward(m, x, &r2));
    CHECK(forward(m, x, &r1) != forward(m, x));
  }

  TEST_CASE("input length mismatch is a dimension error") {
    const MlpModel m = tiny_model(8, 1, 3);
    CHECK_THROWS_AS(forward(m, Eigen::VectorXd::Zero(23)), DimensionError);
    CHECK_THROWS_AS(forward_batch(m, Eigen::MatrixXd::Zero(25, 2)), DimensionError);
  }

  TEST_CASE("inverted dropout: mean of many training passes approaches eval mode") {
    const MlpModel m = tiny_model(64, 1, 4, 0.2);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(24);
    const Eigen::VectorXd eval = forward(m, x);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(24);
    std::mt19937_64 rng(6);
    const int n = 4000;
    for (int i = 0; i < n; ++i) acc += forward(m, x, &rng);
    acc /= n;
    CHECK((acc - eval).norm() / eval.norm() < 0.02);
  }

  TEST_CASE("He initialization: per-layer weight spread and zero biases") {
    MlpArchitecture a;
    a.patch_dims = PatchDims{3, 3, 3, 4};
    a.hidden_width = 200;
    a.hidden_layers = 3;
    const MlpModel m = make_mlp(a, 7);
    CHECK(m.layer_sizes == std::vector<int>{324, 200, 200, 200, 324});
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      const double sd = std::sqrt(m.weights[l].squaredNorm() / static_cast<double>(m.weights[l].size()));
      CHECK(sd == doctest::Approx(std::sqrt(2.0 / m.layer_sizes[l])).epsilon(0.05));
      CHECK(m.biases[l].isZero(0.0));
    }
    a.views = 2;
    CHECK(make_mlp(a, 7).input_dim() == 648);
  }
}

TEST_SUITE("loss") {
  TEST_CASE("log-cosh values, asymptote and bounds") {
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
    CHECK(logcosh_loss(z, z) == 0.0);
    CHECK(logcosh_loss(z, Eigen::VectorXd::Constant(1, 0.1)) == doctest::Approx(0.00499168).epsilon(1e-6));
    CHECK(std::abs(logcosh_loss(z, Eigen::VectorXd::Constant(1, 20.0)) - (20.0 - std::numbers::ln2)) < 1e-12);
    CHECK(std::isfinite(logcosh_loss(z, Eigen::VectorXd::Constant(1, 1e6))));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
      const double r = n(rng);
      const double v = logcosh_loss(z, Eigen::VectorXd::Constant(1, r));
      CHECK(v >= 0.0);
      CHECK(v <= 0.5 * r * r + 1e-15);
      CHECK(v == doctest::Approx(std::log(std::cosh(r))).epsilon(1e-10));
    }
  }

  TEST_CASE("identical prediction, noisy and true constant patch: every term is zero") {
    const PatchDims dims{3, 3, 2, 3};
    const auto d = static_cast<Eigen::Index>(dims.length());
    const MlpModel m = linear_model(dims, Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d));
    TrainBatch b;
    b.inputs.resize(d, 2);
    for (int c = 0; c < 3; ++c) {
      b.inputs.col(0).segment(c * d / 3, d / 3).setConstant(0.5 * (c + 1));
      b.inputs.col(1).segment(c * d / 3, d / 3).setConstant(-0.2 * c);
    }
    b.targets = b.inputs;
    b.supervised = {1, 1};
    for (LossConfig cfg : {LossConfig::semi_supervised(), LossConfig::supervised()}) {
      cfg.lambda_div = cfg.lambda_loop = 1.0;
      const LossTerms t = total_loss(m, b, cfg);
      CHECK(t.total == 0.0);
      CHECK(t.div == 0.0);
      CHECK(t.loop == 0.0);
      const ModelGradient g = backward(m, b, cfg);
      CHECK(g.flatten().isZero(0.0));
    }
  }

  TEST_CASE("with every lambda zero but reconstruction the loss is the hand-computed MSE") {
    const PatchDims dims{1, 1, 1, 1};
    Eigen::VectorXd bias(3);
    bias << 1.0, 0.0, -1.0;
    const MlpModel m = linear_model(dims, Eigen::MatrixXd::Identity(3, 3), bias);
    TrainBatch b;
    b.inputs.resize(3, 2);
    b.inputs << 0, 1, 2, 1, 5, 1;
    b.supervised = {0, 0};
    const LossConfig cfg{1.0, 0.0, 0.0, 0.0, LoopMode::Literal, SupervisedLoss::Squared};
    // pred - noisy = bias for every sample: (1 + 0 + 1) / 3.
    CHECK(total_loss(m, b, cfg).total == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const PatchPenaltyOperators ops(dims, Vec3::Ones());
    Eigen::MatrixXd pred(3, 2), noisy(3, 2);
    pred << 1, 0, 2, 0, 3, 0;
    noisy << 0, 1, 2, 1, 5, 1;
    TrainBatch nb;
    nb.inputs = noisy;
    nb.supervised = {0, 0};
    // ((1 + 0 + 4) + (1 + 1 + 1)) / (3 * 2)
    CHECK(evaluate_loss(pred, nb, cfg, ops).total == doctest::Approx(8.0 / 6.0).epsilon(1e-15));
  }

  TEST_CASE("supervised term only counts supervised columns") {
    const PatchDims dims{1, 1, 1, 1};
    const PatchPenaltyOperators ops(dims, Vec3::Ones());
    Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(3, 2);
    TrainBatch b;
    b.inputs = pred;
    b.targets = Eigen::MatrixXd::Constant(3, 2, 0.1);
    b.supervised = {1, 0};
    LossConfig cfg = LossConfig::supervised();
    CHECK(evaluate_loss(pred, b, cfg, ops).super == doctest::Approx(std::log(std::cosh(0.1)) / 2.0).epsilon(1e-12));
    cfg.supervised_loss = SupervisedLoss::Squared;
    CHECK(evaluate_loss(pred, b, cfg, ops).super == doctest::Approx(0.01 / 2.0).epsilon(1e-12));
  }

  TEST_CASE("patch penalties equal the field operators on the reshaped prediction") {
    const PatchDims dims{4, 3, 3, 4};
    const Vec3 spacing(1.0, 0.7, 1.3);
    const PatchPenaltyOperators ops(dims, spacing);
    const Eigen::MatrixXd P = random_matrix_xd(static_cast<Eigen::Index>(dims.length()), 3, 9);
    const Eigen::VectorXd div = ops.divergence_penalty(P);
    const Eigen::VectorXd lit = ops.loop_penalty(P, LoopMode::Literal);
    const Eigen::VectorXd clo = ops.loop_penalty(P, LoopMode::Closure);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const DisplacementField4D f = patch_as_field(P.col(i), dims, spacing);
      CHECK(div[i] == doctest::Approx(divergence_penalty(f)).epsilon(1e-12));
      CHECK(lit[i] == doctest::Approx(loop_penalty(f, LoopMode::Literal)).epsilon(1e-12));
      CHECK(clo[i] == doctest::Approx(loop_penalty(f, LoopMode::Closure)).epsilon(1e-12));
    }
  }

  TEST_CASE("presets and validation") {
    CHECK(LossConfig::supervised().lambda_recon == 0.0);
    CHECK(LossConfig::supervised().supervised_loss == SupervisedLoss::LogCosh);
    CHECK(LossConfig::autoencoder().lambda_super == 0.0);
    CHECK(LossConfig::semi_supervised().supervised_loss == SupervisedLoss::Squared);
    LossConfig bad;
    bad.lambda_div = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(parse_supervised_loss("mse") == SupervisedLoss::Squared);
    CHECK_THROWS_AS(parse_supervised_loss("huber"), ConfigError);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("gradients match central differences on a tiny model, full objective") {
    MlpModel m = tiny_model(8, 2, 10);
    m.input_scale = 0.7;
    const TrainBatch b = mixed_batch(m, 11);
    for (LoopMode mode : {LoopMode::Literal, LoopMode::Closure})
      for (SupervisedLoss s : {SupervisedLoss::Squared, SupervisedLoss::LogCosh}) {
        const LossConfig cfg{1.0, 0.8, 0.5, 0.3, mode, s};
        CHECK(gradient_check(m, b, cfg) < 1e-6);
      }
  }

  TEST_CASE("penalty-only gradients match central differences") {
    const MlpModel m = tiny_model(8, 1, 12);
    const TrainBatch b = mixed_batch(m, 13);
    CHECK(gradient_check(m, b, LossConfig{0.0, 0.0, 1.0, 0.0, LoopMode::Literal, SupervisedLoss::Squared}) < 1e-6);
    CHECK(gradient_check(m, b, LossConfig{0.0, 0.0, 0.0, 1.0, LoopMode::Closure, SupervisedLoss::Squared}) < 1e-6);
  }

  TEST_CASE("multi-view model gradients match central differences") {
    MlpArchitecture a;
    a.patch_dims = kTiny;
    a.views = 2;
    a.hidden_width = 6;
    a.hidden_layers = 1;
    a.dropout_p = 0.0;
    const MlpModel m = make_mlp(a, 14);
    TrainBatch b = mixed_batch(m, 15);
    b.noisy = random_matrix_xd(24, 5, 16);
    CHECK(gradient_check(m, b, LossConfig::semi_supervised(1.0, 0.5, 0.5)) < 1e-6);
  }
}

TEST_SUITE("train") {
  TEST_CASE("identity pairs are learnable by a tiny model") {
    MlpArchitecture a;
    a.patch_dims = kTiny;
    a.hidden_width = 64;
    a.hidden_layers = 1;
    a.dropout_p = 0.0;
    const Eigen::MatrixXd X = random_matrix_xd(24, 512, 20);
    TrainingSet data;
    data.append(X, X, true);
    TrainOptions o;
    o.epochs = 50;
    o.batch_size = 32;
    o.learning_rate = 3e-3;
    const TrainResult r = train(make_mlp(a, 21), data, LossConfig::supervised(), o);
    const Eigen::MatrixXd held = random_matrix_xd(24, 200, 22);
    const Eigen::MatrixXd out = forward_batch(r.model, held).output;
    double rel = 0.0;
    for (Eigen::Index i = 0; i < held.cols(); ++i) rel += (out.col(i) - held.col(i)).norm() / held.col(i).norm();
    CHECK(rel / static_cast<double>(held.cols()) < 0.1);
    CHECK(r.history.size() == 50);
  }

  TEST_CASE("phantom regression: epoch losses trend down and training is deterministic") {
    PhantomConfig pc = named_case("normal", Grid3{{20, 20, 16}, {1, 1, 1}, {0, 0, 0}}, 4);
    pc.sparse_count = 10;
    const GeneratedCase gc = generate_case(pc);
    NoiseSpec ns;
    ns.gaussian_sigma = 0.5;
    const DisplacementField4D noisy = corrupt(gc.ground_truth, ns);
    const PatchDims dims{3, 3, 3, 4};
    const PatchSet clean = extract_patches(gc.ground_truth, dims, {2, 2, 2}, &gc.phantom.mask);
    const PatchSet dirty = extract_patches_at(noisy, clean);
    TrainingSet data;
    data.append(dirty.patches, clean.patches, true);

    MlpArchitecture a;
    a.patch_dims = dims;
    a.hidden_width = 64;
    a.hidden_layers = 2;
    TrainOptions o;
    o.epochs = 12;
    o.batch_size = 64;
    const auto run = [&] { return train(make_mlp(a, 30), data, LossConfig::supervised(), o); };
    const TrainResult r1 = run();
    for (std::size_t e = 1; e < r1.history.size(); ++e)
      CHECK(r1.history[e].total <= 1.05 * r1.history[e - 1].total);
    CHECK(r1.history.back().total < r1.history.front().total);
    const TrainResult r2 = run();
    CHECK(r2.history.back().total == r1.history.back().total);
    CHECK(flatten_parameters(r2.model) == flatten_parameters(r1.model));
  }

  TEST_CASE("mixed supervised and unsupervised data train with the semi-supervised loss") {
    const MlpModel m0 = tiny_model(16, 1, 40);
    TrainingSet data;
    const Eigen::MatrixXd X = random_matrix_xd(24, 64, 41, 0.5);
    data.append(X.leftCols(16), X.leftCols(16), true);
    data.append(X.rightCols(48), Eigen::MatrixXd(), false);
    CHECK(data.size() == 64);
    CHECK(data.supervised_count() == 16);
    TrainOptions o;
    o.epochs = 3;
    o.batch_size = 8;
    int calls = 0;
    const TrainResult r = train(m0, data, LossConfig::semi_supervised(), o, [&](int, const LossTerms&) { ++calls; });
    CHECK(calls == 3);
    CHECK(r.history.size() == 3);
  }

  TEST_CASE("input normalization sets the scale to the inverse RMS") {
    TrainingSet data;
    data.append(Eigen::MatrixXd::Constant(24, 10, 4.0), Eigen::MatrixXd::Constant(24, 10, 4.0), true);
    TrainOptions o;
    o.epochs = 1;
    o.batch_size = 5;
    o.normalize_inputs = true;
    CHECK(train(tiny_model(8, 1, 42), data, LossConfig::supervised(), o).model.input_scale == 0.25);
  }

  TEST_CASE("non-finite loss aborts with a numerical error; bad options are config errors") {
    TrainingSet data;
    Eigen::MatrixXd X = random_matrix_xd(24, 8, 43);
    X(0, 0) = std::nan("");
    data.append(X, X, true);
    TrainOptions o;
    o.epochs = 1;
    o.batch_size = 4;
    CHECK_THROWS_AS(train(tiny_model(8, 1, 44), data, LossConfig::supervised(), o), NumericalError);
    o.batch_size = 0;
    CHECK_THROWS_AS(train(tiny_model(8, 1, 44), data, LossConfig::supervised(), o), ConfigError);
    o = TrainOptions{};
    o.supervised_fraction = 1.5;
    CHECK_THROWS_AS(train(tiny_model(8, 1, 44), data, LossConfig::supervised(), o), ConfigError);
  }

  TEST_CASE("data that does not match the model is a dimension error") {
    TrainingSet data;
    data.append(Eigen::MatrixXd::Zero(12, 4), Eigen::MatrixXd::Zero(12, 4), true);
    CHECK_THROWS_AS(train(tiny_model(8, 1, 45), data, LossConfig::supervised(), TrainOptions{}), DimensionError);
    CHECK_THROWS_AS(data.append(Eigen::MatrixXd::Zero(13, 1), Eigen::MatrixXd::Zero(12, 1), true), DimensionError);
  }
}

TEST_SUITE("inference") {
  TEST_CASE("identity model reproduces covered voxels and zeroes frame 0") {
    const PatchDims dims{3, 3, 3, 3};
    const MlpModel m = relu_identity(dims);
    DisplacementField4D f = random_field(cube_grid(8), 3, 50);
    const DisplacementField4D out = regularize_field(m, f, {2, 2, 2});
    double worst = 0.0;
    for (int t = 1; t < 3; ++t)
      for (std::size_t v = 0; v < f.grid().voxel_count(); ++v)
        worst = std::max(worst, (out.vec(t, v) - f.vec(t, v)).norm() / std::max(1e-12, f.vec(t, v).norm()));
    CHECK(worst < 1e-3);
    const auto f0 = out.frame(0);
    CHECK(std::all_of(f0.begin(), f0.end(), [](double x) { return x == 0.0; }));
  }

  TEST_CASE("zero field in gives a finite field out") {
    MlpArchitecture a;
    a.patch_dims = PatchDims{3, 3, 3, 2};
    a.hidden_width = 32;
    const MlpModel m = make_mlp(a, 51);
    const DisplacementField4D out = regularize_field(m, DisplacementField4D(cube_grid(6), 2, FrameKind::Lagrangian), {1, 1, 1});
    CHECK(out.all_finite());
  }

  TEST_CASE("fusion concatenates A then B") {
    const PatchDims dims{3, 3, 3, 2};
    const DisplacementField4D a = random_field(cube_grid(7), 2, 52);
    const DisplacementField4D b = random_field(cube_grid(7), 2, 53);
    const DisplacementField4D pick_a = fuse_multiview(relu_identity(dims, 2, 0), a, b, {2, 2, 2});
    const DisplacementField4D pick_b = fuse_multiview(relu_identity(dims, 2, 1), a, b, {2, 2, 2});
    for (std::size_t v = 0; v < a.grid().voxel_count(); ++v) {
      REQUIRE((pick_a.vec(1, v) - a.vec(1, v)).norm() < 1e-12);
      REQUIRE((pick_b.vec(1, v) - b.vec(1, v)).norm() < 1e-12);
    }
  }

  TEST_CASE("fusion rejects mismatched fields and single-view models") {
    const PatchDims dims{3, 3, 3, 2};
    const DisplacementField4D a = random_field(cube_grid(7), 2, 54);
    const DisplacementField4D b = random_field(cube_grid(8), 2, 55);
    CHECK_THROWS_AS(fuse_multiview(relu_identity(dims, 2), a, b, {2, 2, 2}), DimensionError);
    CHECK_THROWS_AS(fuse_multiview(relu_identity(dims, 1), a, a, {2, 2, 2}), DimensionError);
    CHECK_THROWS_AS(regularize_field(relu_identity(dims, 2), a, {2, 2, 2}), DimensionError);
  }

  TEST_CASE("hidden activations: zero model, row counts, labels and reproducibility") {
    MlpModel m = tiny_model(10, 3, 56);
    const Eigen::MatrixXd xa = random_matrix_xd(24, 7, 57), xb = random_matrix_xd(24, 4, 58);
    const DomainActivations act = export_hidden_activations(m, {xa, xb}, {"synthetic", "invivo"}, 2);
    CHECK(act.activations.rows() == 11);
    CHECK(act.activations.cols() == 10);
    CHECK(act.domain.front() == "synthetic");
    CHECK(act.domain.back() == "invivo");
    CHECK(std::count(act.domain.begin(), act.domain.end(), "invivo") == 4);
    CHECK(export_hidden_activations(m, {xa, xb}, {"s", "v"}, 2).activations == act.activations);
    CHECK_THROWS_AS(export_hidden_activations(m, {xa}, {"s"}, 3), DimensionError);
    CHECK_THROWS_AS(export_hidden_activations(m, {xa}, {"s"}, -1), DimensionError);
    for (auto& W : m.weights) W.setZero();
    CHECK(export_hidden_activations(m, {xa}, {"s"}, 0).activations.isZero(0.0));
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip preserves architecture and every weight bit") {
    MlpArchitecture a;
    a.patch_dims = PatchDims{2, 3, 1, 2};
    a.spacing = Vec3(0.5, 1.0, 1.5);
    a.views = 2;
    a.hidden_width = 7;
    a.hidden_layers = 2;
    MlpModel m = make_mlp(a, 60);
    m.input_scale = 0.37;
    std::stringstream ss;
    write_checkpoint(ss, m);
    const MlpModel back = read_checkpoint(ss);
    CHECK(back.layer_sizes == m.layer_sizes);
    CHECK(back.views == 2);
    CHECK(back.patch_dims == m.patch_dims);
    CHECK(back.spacing == m.spacing);
    CHECK(back.dropout_p == m.dropout_p);
    CHECK(back.input_scale == m.input_scale);
    CHECK(flatten_parameters(back) == flatten_parameters(m));
  }

  TEST_CASE("bad magic and truncation are format errors") {
    std::stringstream bad("NOPE0000");
    CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
    std::stringstream ss;
    write_checkpoint(ss, tiny_model(4, 1, 61));
    std::string s = ss.str();
    s.resize(s.size() - 10);
    std::stringstream cut(s);
    CHECK_THROWS_AS(read_checkpoint(cut), FormatError);
  }
}
