// Acceptance checks. Usage: acceptance [criterion numbers...]; no arguments runs all ten.
// Prints one "C<n> PASS|FAIL" line per criterion and exits non-zero on any failure.

#include "cardiostrain/blockmatch.hpp"
#include "cardiostrain/crystals.hpp"
#include "cardiostrain/experiment.hpp"
#include "cardiostrain/loss.hpp"
#include "cardiostrain/parallel.hpp"
#include "cardiostrain/patches.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace cardiostrain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::mt19937_64& rng() {
  static std::mt19937_64 r(20240611);
  return r;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng());
  return m;
}

Mat3 random_rotation() {
  Eigen::Quaterniond q(Eigen::Vector4d(gaussian_matrix(4, 1)));
  return q.normalized().toRotationMatrix();
}

Mat3 random_affine() { return Mat3::Identity() + gaussian_matrix(3, 3, 0.15); }

Mat3 green_of(const Mat3& A) { return 0.5 * (A.transpose() * A - Mat3::Identity()); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// ---- C1 ----

Outcome c1_gradients() {
  MlpArchitecture arch;
  arch.patch_dims = PatchDims{2, 2, 1, 2};  // 24 inputs
  arch.spacing = Vec3(1.0, 1.0, 1.0);
  arch.hidden_width = 8;
  arch.hidden_layers = 2;
  arch.dropout_p = 0.0;
  MlpModel model = make_mlp(arch, 31);
  if (model.input_dim() != 24) return {false, "model input dimension is not 24"};

  TrainBatch batch;
  batch.inputs = gaussian_matrix(24, 6);
  batch.targets = gaussian_matrix(24, 6);
  batch.supervised = {1, 1, 0, 1, 0, 1};

  double worst = 0.0;
  std::size_t params = 0;
  for (LoopMode mode : {LoopMode::Literal, LoopMode::Closure})
    for (SupervisedLoss s : {SupervisedLoss::Squared, SupervisedLoss::LogCosh}) {
      const LossConfig cfg{1.0, 1.0, 0.5, 0.5, mode, s};
      const Eigen::VectorXd g = backward(model, batch, cfg).flatten();
      const Eigen::VectorXd theta = flatten_parameters(model);
      params = static_cast<std::size_t>(theta.size());
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd t = theta;
        t[i] = theta[i] + h;
        assign_parameters(model, t);
        const double fp = total_loss(model, batch, cfg).total;
        t[i] = theta[i] - h;
        assign_parameters(model, t);
        const double fm = total_loss(model, batch, cfg).total;
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-4}));
      }
      assign_parameters(model, theta);
    }
  return {worst < 1e-6, std::to_string(params) + " parameters x 4 objectives, worst relative error " + fmt(worst, 3)};
}

// ---- C2 ----

// Worst |div U| at the peak frame over points on the 2 mm lattice, so every spacing is
// compared on the same material points.
double phantom_divergence(double h) {
  const int n = static_cast<int>(std::lround(48.0 / h));
  PhantomConfig c;
  c.grid = Grid3{{n, n, static_cast<int>(std::lround(16.0 / h))}, {h, h, h}, {0, 0, 0}};
  c.frames = 3;
  c.sparse_count = 1;
  c.motion.torsion = 0.0;  // finite rotation is not divergence free
  c.motion.axis_center = Vec3(23.9, 24.1, 0.0);
  c.motion.z_base = 1.0;
  c.motion.z_apex = 15.0;
  const GeneratedCase gc = generate_case(c);
  double worst = 0.0;
  for (std::size_t v = 0; v < c.grid.voxel_count(); ++v) {
    const Index3 p = c.grid.unravel(v);
    const Vec3 x = c.grid.position(p);
    bool on_lattice = true;
    for (int a = 0; a < 3; ++a) on_lattice = on_lattice && std::abs(x[a] / 2.0 - std::round(x[a] / 2.0)) < 1e-9;
    const double R = gc.phantom.cylindrical(x).first;
    if (!on_lattice || R < 11.0 || R > 17.0 || x.z() < 4.0 || x.z() > 12.0) continue;
    worst = std::max(worst, std::abs(gradient_tensor(gc.ground_truth, 1, p).trace()));
  }
  return worst;
}

Outcome c2_penalties() {
  double worst = 0.0;
  for (const PatchDims dims : {PatchDims{5, 5, 5, 4}, PatchDims{3, 4, 2, 6}}) {
    const Vec3 spacing(1.0, 0.8, 1.25);
    const PatchPenaltyOperators ops(dims, spacing);
    const Eigen::MatrixXd P = gaussian_matrix(static_cast<Eigen::Index>(dims.length()), 8);
    const Eigen::VectorXd div = ops.divergence_penalty(P);
    for (LoopMode mode : {LoopMode::Literal, LoopMode::Closure}) {
      const Eigen::VectorXd loop = ops.loop_penalty(P, mode);
      for (Eigen::Index i = 0; i < P.cols(); ++i) {
        const DisplacementField4D f = patch_as_field(P.col(i), dims, spacing);
        worst = std::max(worst, rel_err(div[i], divergence_penalty(f)));
        worst = std::max(worst, rel_err(loop[i], loop_penalty(f, mode)));
      }
    }
    // The batch terms of the objective are means of the same per-sample penalties.
    const TrainBatch b{P, P, P, std::vector<std::uint8_t>(static_cast<std::size_t>(P.cols()), 0)};
    const LossTerms t = evaluate_loss(P, b, LossConfig{0.0, 0.0, 1.0, 1.0, LoopMode::Literal, SupervisedLoss::Squared}, ops);
    double mdiv = 0.0, mloop = 0.0;
    for (Eigen::Index i = 0; i < P.cols(); ++i) {
      const DisplacementField4D f = patch_as_field(P.col(i), dims, spacing);
      mdiv += divergence_penalty(f) / static_cast<double>(P.cols());
      mloop += loop_penalty(f, LoopMode::Literal) / static_cast<double>(P.cols());
    }
    worst = std::max({worst, rel_err(t.div, mdiv), rel_err(t.loop, mloop)});
  }
  const double e2 = phantom_divergence(2.0), e1 = phantom_divergence(1.0), e05 = phantom_divergence(0.5);
  const double o1 = std::log2(e2 / e1), o2 = std::log2(e1 / e05);
  const bool pass = worst < 1e-12 && o1 > 1.8 && o2 > 1.8;
  return {pass, "penalty mismatch " + fmt(worst, 3) + "; max |div U| at h=2,1,0.5 mm: " + fmt(e2, 3) + ", " +
                    fmt(e1, 3) + ", " + fmt(e05, 3) + " (orders " + fmt(o1, 3) + ", " + fmt(o2, 3) + ")"};
}

// ---- C3 ----

Outcome c3_strain() {
  const Grid3 g{{9, 9, 9}, {1.0, 0.9, 1.1}, {-4.0, -3.5, -4.5}};
  double field = 0.0, tetra = 0.0, cube = 0.0, rigid_pt = 0.0, rigid_field = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 A = random_affine();
    const Vec3 c = gaussian_matrix(3, 1);
    const Mat3 E = green_of(A);

    DisplacementField4D f(g, 2, FrameKind::Lagrangian);
    for (std::size_t v = 0; v < g.voxel_count(); ++v) {
      const Vec3 X = g.position(g.unravel(v));
      f.vec(1, v) = (A - Mat3::Identity()) * X + c;
    }
    for (std::size_t v = 0; v < g.voxel_count(); ++v) {
      const Index3 p = g.unravel(v);
      if (p[0] < 1 || p[1] < 1 || p[2] < 1 || p[0] > 7 || p[1] > 7 || p[2] > 7) continue;
      field = std::max(field, (green_lagrange(f, 1, p) - E).cwiseAbs().maxCoeff());
    }

    std::array<Vec3, 4> ref, def;
    do {
      for (auto& x : ref) x = gaussian_matrix(3, 1, 5.0);
    } while (!tetra_nondegenerate(ref));
    for (std::size_t i = 0; i < 4; ++i) def[i] = A * ref[i] + c;
    tetra = std::max(tetra, (tetra_strain(ref, def) - E).cwiseAbs().maxCoeff());

    CrystalCube cb;
    std::array<Vec3, 8> r8, d8;
    const Mat3 orient = random_rotation();
    for (int i = 0; i < 8; ++i) {
      r8[static_cast<std::size_t>(i)] = orient * Vec3((i & 1) ? 4 : -4, (i & 2) ? 4 : -4, (i & 4) ? 4 : -4) +
                                        gaussian_matrix(3, 1, 0.3);
      d8[static_cast<std::size_t>(i)] = A * r8[static_cast<std::size_t>(i)] + c;
    }
    cb.frames = {r8, d8};
    cube = std::max(cube, (cube_strain(cb, 1) - E).cwiseAbs().maxCoeff());

    const Mat3 R = random_rotation();
    for (std::size_t i = 0; i < 4; ++i) def[i] = R * ref[i] + c;
    rigid_pt = std::max(rigid_pt, tetra_strain(ref, def).norm());
    for (int i = 0; i < 8; ++i) d8[static_cast<std::size_t>(i)] = R * r8[static_cast<std::size_t>(i)] + c;
    cb.frames = {r8, d8};
    rigid_pt = std::max(rigid_pt, cube_strain(cb, 1).norm());
    for (std::size_t v = 0; v < g.voxel_count(); ++v) f.vec(1, v) = (R - Mat3::Identity()) * g.position(g.unravel(v)) + c;
    rigid_field = std::max(rigid_field, green_lagrange(f, 1, {4, 4, 4}).norm());
  }
  const bool pass = field < 1e-10 && tetra < 1e-8 && cube < 1e-8 && rigid_pt < 1e-10 && rigid_field < 1e-10;
  return {pass, "100 affine maps: field " + fmt(field, 2) + ", tetra " + fmt(tetra, 2) + ", cube " + fmt(cube, 2) +
                    "; rigid: points " + fmt(rigid_pt, 2) + ", field " + fmt(rigid_field, 2)};
}

// ---- C4 ----

ScalarVolume texture(const Grid3& g, std::uint64_t seed) {
  std::mt19937_64 r(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ScalarVolume v(g);
  for (auto& x : v.data) x = n(r);
  return gaussian_smooth(v, 1.5);
}

Outcome c4_blockmatch() {
  const Grid3 g{{48, 48, 48}, {1, 1, 1}, {0, 0, 0}};
  const ScalarVolume a = texture(g, 41);
  BlockMatchConfig cfg;  // 9^3 blocks, +/-4 search
  const int margin = cfg.block[0] / 2 + cfg.search[0] + 2;
  const auto interior = [&](std::size_t v) {
    const Index3 p = g.unravel(v);
    for (int ax = 0; ax < 3; ++ax)
      if (p[ax] < margin || p[ax] >= g.dims[ax] - margin) return false;
    return true;
  };

  const Index3 s{3, -2, 1};
  ScalarVolume b(g);
  for (int k = 0; k < 48; ++k)
    for (int j = 0; j < 48; ++j)
      for (int i = 0; i < 48; ++i)
        b.at(i, j, k) = a.at(((i - s[0]) % 48 + 48) % 48, ((j - s[1]) % 48 + 48) % 48, ((k - s[2]) % 48 + 48) % 48);
  const auto t0 = std::chrono::steady_clock::now();
  const FrameTrack ft = track_frame(a, b, nullptr, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t exact = 0, n = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!interior(v)) continue;
    ++n;
    if ((ft.displacement.vec(0, v) - Vec3(s[0], s[1], s[2])).norm() < 1e-9) ++exact;
  }

  ScalarVolume c(g);
  for (int k = 0; k < 48; ++k)
    for (int j = 0; j < 48; ++j)
      for (int i = 0; i < 48; ++i) c.at(i, j, k) = sample_trilinear(a, Vec3(i - 0.4, j, k));
  const FrameTrack fs = track_frame(a, c, nullptr, cfg);
  std::size_t good = 0, m = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!interior(v)) continue;
    ++m;
    if (std::abs(fs.displacement.vec(0, v).x() - 0.4) <= 0.1) ++good;
  }
  const double frac = static_cast<double>(good) / static_cast<double>(m);
  const bool pass = exact == n && frac >= 0.95 && secs < 120.0;
  return {pass, "integer shift exact at " + std::to_string(exact) + "/" + std::to_string(n) +
                    " interior voxels; 0.4-voxel shift within 0.1 at " + fmt(100.0 * frac, 4) + "%; 48^3 pair tracked in " +
                    fmt(secs, 3) + " s"};
}

// ---- C5-C7 ----

ExperimentSpec desk_spec() {
  ExperimentSpec s;  // 32x32x24 grid, 16 frames, h=256, L=3, 5x5x5x16 patches
  s.correlation_study = false;
  s.train = TrainOptions{8, 64, 1e-3};
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome c5_supervised() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec s = desk_spec();
  s.regularizer = RegularizerKind::Supervised;
  s.loss = LossConfig::supervised();
  const MetricsReport r = run_experiment(s);
  const double secs = seconds_since(t0);
  const double ratio = r.output_error.summary / r.input_error.summary;
  const double rin = r.input_strain_error.median[0], rout = r.output_strain_error.median[0];
  const bool pass = ratio <= 0.70 && rout < rin && secs < 1800.0;
  return {pass, "held-out " + r.test_case + ": tracking error " + fmt(r.input_error.summary) + " -> " +
                    fmt(r.output_error.summary) + " mm (ratio " + fmt(ratio, 3) + "); radial strain error " + fmt(rin) +
                    " -> " + fmt(rout) + " %; " + fmt(secs, 3) + " s"};
}

Outcome c6_multiview() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec s = desk_spec();
  s.regularizer = RegularizerKind::Supervised;
  s.loss = LossConfig::supervised();
  s.view = 1;
  const double a = run_experiment(s).output_error.summary;
  s.view = 2;
  const double b = run_experiment(s).output_error.summary;
  s.view = 0;
  s.regularizer = RegularizerKind::MultiView;
  const double fused = run_experiment(s).output_error.summary;
  const double secs = seconds_since(t0);
  const bool pass = fused < std::min(a, b) && secs < 2700.0;
  return {pass, "regularized boundary-heavy view " + fmt(a) + " mm, interior-heavy view " + fmt(b) + " mm, fused " +
                    fmt(fused) + " mm; " + fmt(secs, 3) + " s"};
}

Outcome c7_mixing() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec s = desk_spec();
  s.regularizer = RegularizerKind::SemiSupervised;
  s.train.epochs = 4;
  NoiseSpec target = s.noise;
  target.drift_per_frame = 0.1;
  target.drift_direction = Vec3(1.0, 1.0, 0.0);
  s.target_noise = target;
  double sum0 = 0.0, sum1 = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    s.seed = seed;
    s.loss = LossConfig::semi_supervised(1.0, 0.0, 0.0);
    s.loss.loop_mode = LoopMode::Closure;
    const double m0 = *run_experiment(s).mixing_score;
    s.loss = LossConfig::semi_supervised(1.0, 1.0, 1.0);
    s.loss.loop_mode = LoopMode::Closure;
    const double m1 = *run_experiment(s).mixing_score;
    sum0 += m0;
    sum1 += m1;
    per_seed += " " + fmt(m0, 3) + "/" + fmt(m1, 3);
  }
  const double secs = seconds_since(t0);
  const double d = (sum0 - sum1) / 3.0;
  const bool pass = d >= 0.05 && secs < 1800.0;
  return {pass, "mean separation lambda=0 " + fmt(sum0 / 3.0, 3) + " vs lambda=1 " + fmt(sum1 / 3.0, 3) + " (diff " +
                    fmt(d, 3) + "; per seed" + per_seed + "); " + fmt(secs, 3) + " s"};
}

// ---- C8 ----

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      sxy += (x[i] - x[j]) * (y[i] - y[j]);
      sxx += (x[i] - x[j]) * (x[i] - x[j]);
      syy += (y[i] - y[j]) * (y[i] - y[j]);
    }
  return sxy / std::sqrt(sxx * syy);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

Outcome c8_pearson(const fs::path& work) {
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(36), y(36);
    for (std::size_t i = 0; i < 36; ++i) {
      x[i] = n(rng());
      y[i] = 0.3 * x[i] + n(rng());
    }
    worst = std::max(worst, std::abs(pearson(x, y) - brute_pearson(x, y)));
  }
  std::vector<double> x(36), up(36), down(36);
  for (std::size_t i = 0; i < 36; ++i) {
    x[i] = n(rng());
    up[i] = 2.5 * x[i] + 1.0;
    down[i] = -2.0 * x[i] + 3.0;
  }
  const double rp = pearson(x, up), rm = pearson(x, down);

  ExperimentSpec s = desk_spec();
  s.regularizer = RegularizerKind::None;
  s.correlation_study = true;
  s.output_dir = work / "c8";
  const MetricsReport r = run_experiment(s);
  const CorrelationStudy& st = *r.correlation_input;
  bool bounded = true;
  for (int a = 0; a < 3; ++a) bounded = bounded && std::abs(st.r[a]) <= 1.0;
  bounded = bounded && std::abs(st.r_principal) <= 1.0;

  // Crystal-vs-image agreement on the exact field checks the harness geometry itself.
  std::vector<CorrelationSample> exact;
  for (const char* name : {"lad-distal", "lad-proximal", "lcx", "rca"}) {
    PhantomConfig pc = named_case(name, s.grid, s.frames);
    pc.sparse_count = 16;
    const GeneratedCase gc = generate_case(pc);
    const auto z = compare_crystals(gc, gc.ground_truth, "rest", 5);
    exact.insert(exact.end(), z.begin(), z.end());
  }
  const double r_exact = summarize_correlation(exact).r_principal;

  const bool files = fs::exists(s.output_dir / "report.json") && fs::exists(s.output_dir / "peak_scatter.svg") &&
                     line_count(s.output_dir / "correlation.csv") == 1 + 2 * 36;
  const bool pass = worst < 1e-12 && std::abs(rp - 1.0) < 1e-12 && std::abs(rm + 1.0) < 1e-12 &&
                    st.samples.size() == 36 && bounded && files && r_exact > 0.9;
  return {pass, "oracle gap " + fmt(worst, 2) + "; affine r " + fmt(rp, 17) + " / " + fmt(rm, 17) + "; study N=" +
                    std::to_string(st.samples.size()) + ", noisy-input r (rad, circ, long, principal) = " + fmt(st.r[0], 3) +
                    ", " + fmt(st.r[1], 3) + ", " + fmt(st.r[2], 3) + ", " + fmt(st.r_principal, 3) +
                    "; exact-field principal r " + fmt(r_exact, 4) + (files ? "; artifacts written" : "; artifacts missing")};
}

// ---- C9 ----

Outcome c9_trilateration() {
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  double worst = 0.0;
  int right_side = 0, total = 0;
  while (total < 1000) {
    std::array<Vec3, 3> refs;
    for (auto& r : refs) r = Vec3(u(rng()), u(rng()), u(rng()));
    const Vec3 nrm = (refs[1] - refs[0]).cross(refs[2] - refs[0]);
    const double e01 = (refs[1] - refs[0]).norm(), e02 = (refs[2] - refs[0]).norm(), e12 = (refs[2] - refs[1]).norm();
    // Well conditioned: edges >= 5 mm and no sliver triangle.
    if (std::min({e01, e02, e12}) < 5.0 || nrm.norm() < 0.2 * std::max({e01, e02, e12}) * std::max({e01, e02, e12})) continue;
    const Vec3 n = nrm.normalized();
    const Vec3 centroid = (refs[0] + refs[1] + refs[2]) / 3.0;
    const double height = (rng()() % 2 ? 1.0 : -1.0) * (2.0 + std::abs(u(rng())));
    const Vec3 p = centroid + Vec3(u(rng()), u(rng()), u(rng())) * 0.3 + height * n;
    const double h_true = (p - refs[0]).dot(n);
    if (std::abs(h_true) < 1.0) continue;
    const Vec3 d((p - refs[0]).norm(), (p - refs[1]).norm(), (p - refs[2]).norm());
    const Vec3 got = trilaterate(refs, d, h_true * n);
    worst = std::max(worst, (got - p).norm());
    if ((got - refs[0]).dot(n) * h_true > 0.0) ++right_side;
    ++total;
  }
  return {worst < 1e-9 && right_side == 1000,
          "1000 configurations: worst position error " + fmt(worst, 3) + " mm; side correct in " +
              std::to_string(right_side) + "/1000"};
}

// ---- C10 ----

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  return fa.good() || fa.eof() ? (sa == sb && !sa.empty()) : false;
}

Outcome c10_determinism(const fs::path& work, const std::string& cli) {
  const fs::path root = work / "c10";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({"phantom": {"sparse_count": 120},
              "grid": {"dims": [20, 20, 16]}, "frames": 6, "patch": [3, 3, 3, 6],
              "regularizer": "supervised", "model": {"hidden_width": 32, "hidden_layers": 2},
              "train": {"epochs": 1}, "mixing_rows": 50})";
  }
  const int frames = 6;
  std::vector<std::string> failures;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = root / tag;
    const std::string base = cli + " --threads 1 --seed 11 --config " + (root / "config.json").string() + " --out ";
    const std::string out = d.string(), q = " ";
    std::string vols;
    for (int t = 0; t < frames; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "/frame_%02d.vol3", t);
      vols += q + out + name;
    }
    const std::vector<std::string> steps{
        base + out + " phantom --case lbbb --grid 20 20 16 --frames 6 --speckle",
        base + out + " corrupt " + out + "/gt.dsp4",
        base + out + " track" + vols + " --mask " + out + "/mask.msk3",
        base + out + " densify " + out + "/sparse.csv --like " + out + "/mask.msk3",
        base + out + "/report report",
        base + out + " regularize --model " + out + "/report/model.mlpc " + out + "/corrupted.dsp4 --mask " + out + "/mask.msk3",
        base + out + " strain " + out + "/regularized.dsp4 --mask " + out + "/mask.msk3",
        base + out + " eval " + out + "/regularized.dsp4 " + out + "/gt.dsp4 --mask " + out + "/mask.msk3"};
    for (const auto& step : steps)
      if (const int rc = run(step); rc != 0) return {false, "command failed (" + std::to_string(rc) + "): " + step};
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    const auto ext = entry.path().extension();
    if (ext != ".dsp4" && entry.path().filename() != "report.json" && entry.path().filename() != "eval.json") continue;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    ++compared;
    if (!same_bytes(entry.path(), other)) failures.push_back(fs::relative(entry.path(), root / "a").string());
  }
  std::string detail = std::to_string(compared) + " outputs compared across two single-thread runs";
  if (!failures.empty()) {
    detail += "; differing:";
    for (const auto& f : failures) detail += " " + f;
  }
  // phantom, corrupt, track (2), densify, regularize, strain (2) fields plus two JSON reports
  return {failures.empty() && compared >= 10, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = fs::temp_directory_path() / "cardiostrain_acceptance";
  fs::create_directories(work);
  const std::string cli = CARDIOSTRAIN_CLI_PATH;
  set_thread_count(1);

  const std::map<int, std::function<Outcome()>> criteria{
      {1, c1_gradients},
      {2, c2_penalties},
      {3, c3_strain},
      {4, c4_blockmatch},
      {5, c5_supervised},
      {6, c6_multiview},
      {7, c7_mixing},
      {8, [&] { return c8_pearson(work); }},
      {9, c9_trilateration},
      {10, [&] { return c10_determinism(work, cli); }},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, _] : criteria) selected.push_back(k);

  bool all = true;
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cout << "C" << k << " FAIL: no such criterion\n";
      all = false;
      continue;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "C" << k << (o.pass ? " PASS" : " FAIL") << ": " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
