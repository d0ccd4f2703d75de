#include "cardiostrain/rbf.hpp"

#include "cardiostrain/lagrangian.hpp"
#include "cardiostrain/parallel.hpp"

#include <cmath>
#include <limits>

namespace cardiostrain {

double RbfKernel::value(double r2) const {
  if (type == RbfKernelType::Gaussian) return std::exp(-0.5 * r2 / (scale * scale));
  const double q = std::sqrt(r2) / scale;
  if (q >= 1.0) return 0.0;
  const double a = 1.0 - q;
  return a * a * a * a * (4.0 * q + 1.0);
}

Vec3 RbfKernel::gradient(const Vec3& d) const {
  const double r2 = d.squaredNorm();
  if (type == RbfKernelType::Gaussian) return -d * (value(r2) / (scale * scale));
  const double q = std::sqrt(r2) / scale;
  if (q >= 1.0) return Vec3::Zero();
  const double a = 1.0 - q;
  return d * (-20.0 * a * a * a / (scale * scale));
}

void RbfKernel::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("kernel scale must be positive");
}

RbfKernel parse_rbf_kernel(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("kernel spec must look like gaussian:8.0");
  RbfKernel k;
  const std::string name = s.substr(0, colon);
  if (name == "gaussian") k.type = RbfKernelType::Gaussian;
  else if (name == "wendland") k.type = RbfKernelType::Wendland;
  else throw ConfigError("unknown kernel: " + name);
  try {
    k.scale = std::stod(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad kernel scale in " + s);
  }
  k.validate();
  return k;
}

void RbfProblem::validate() const {
  if (centers.empty()) throw ConfigError("RBF problem needs at least one sample");
  if (centers.size() != values.size()) throw DimensionError("one value per sample required");
  kernel.validate();
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("lambda1, lambda2 must be >= 0");
  if (div_stride < 1) throw ConfigError("divergence stride must be >= 1");
  if (max_iterations < 1) throw ConfigError("iteration cap must be >= 1");
  eval_grid.validate();
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (!centers[i].allFinite() || !values[i].allFinite()) throw NumericalError("non-finite RBF sample");
}

namespace {

Eigen::MatrixXd gram(const RbfProblem& p) {
  const auto n = static_cast<Eigen::Index>(p.centers.size());
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i)
      H(i, j) = H(j, i) = p.kernel.value((p.centers[static_cast<std::size_t>(i)] - p.centers[static_cast<std::size_t>(j)]).squaredNorm());
  return H;
}

std::vector<Vec3> divergence_points(const RbfProblem& p) {
  std::vector<Vec3> pts;
  const Grid3& g = p.eval_grid;
  for (int k = 0; k < g.dims[2]; k += p.div_stride)
    for (int j = 0; j < g.dims[1]; j += p.div_stride)
      for (int i = 0; i < g.dims[0]; i += p.div_stride) pts.push_back(g.position(i, j, k));
  return pts;
}

// D^T D for the stacked weight vector (component-major: index a * N + j), accumulated over
// chunks of divergence points so D is never held in full.
Eigen::MatrixXd divergence_normal(const RbfProblem& p) {
  const auto n = static_cast<Eigen::Index>(p.centers.size());
  const std::vector<Vec3> pts = divergence_points(p);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  constexpr std::size_t kChunk = 512;
  for (std::size_t b = 0; b < pts.size(); b += kChunk) {
    const std::size_t e = std::min(pts.size(), b + kChunk);
    Eigen::MatrixXd D(static_cast<Eigen::Index>(e - b), 3 * n);
    for (std::size_t q = b; q < e; ++q)
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vec3 g = p.kernel.gradient(pts[q] - p.centers[static_cast<std::size_t>(j)]);
        for (int a = 0; a < 3; ++a) D(static_cast<Eigen::Index>(q - b), a * n + j) = g[a];
      }
    M.selfadjointView<Eigen::Lower>().rankUpdate(D.transpose());
  }
  M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
  return M;
}

Eigen::VectorXd stack(const Eigen::MatrixXd& W) { return Eigen::Map<const Eigen::VectorXd>(W.data(), W.size()); }

Eigen::MatrixXd unstack(const Eigen::VectorXd& w, Eigen::Index n) {
  return Eigen::Map<const Eigen::MatrixXd>(w.data(), n, 3);
}

Eigen::MatrixXd values_matrix(const RbfProblem& p) {
  Eigen::MatrixXd U(static_cast<Eigen::Index>(p.values.size()), 3);
  for (std::size_t i = 0; i < p.values.size(); ++i) U.row(static_cast<Eigen::Index>(i)) = p.values[i].transpose();
  return U;
}

struct Objective {
  const Eigen::MatrixXd& H;
  const Eigen::MatrixXd& U;
  const Eigen::MatrixXd* DtD;
  double lambda1, lambda2;

  double smooth(const Eigen::MatrixXd& W) const {
    double f = (H * W - U).squaredNorm();
    if (DtD && lambda2 > 0.0) {
      const Eigen::VectorXd w = stack(W);
      f += lambda2 * w.dot(*DtD * w);
    }
    return f;
  }
  double operator()(const Eigen::MatrixXd& W) const { return smooth(W) + lambda1 * W.cwiseAbs().sum(); }
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& W) const {
    Eigen::MatrixXd g = 2.0 * H.transpose() * (H * W - U);
    if (DtD && lambda2 > 0.0) g += unstack(2.0 * lambda2 * (*DtD * stack(W)), W.rows());
    return g;
  }
};

// Largest eigenvalue of the smooth part's Hessian / 2, by power iteration.
double curvature_bound(const Eigen::MatrixXd& H, const Eigen::MatrixXd* DtD, double lambda2) {
  const Eigen::Index n = H.rows();
  Eigen::VectorXd v(3 * n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    const Eigen::MatrixXd V = unstack(v, n);
    Eigen::VectorXd w = stack(H.transpose() * (H * V));
    if (DtD && lambda2 > 0.0) w += lambda2 * (*DtD * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (it > 10 && std::abs(next - est) <= 1e-10 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

}  // namespace

double rbf_objective(const RbfProblem& problem, const Eigen::MatrixXd& weights) {
  problem.validate();
  const Eigen::MatrixXd H = gram(problem), U = values_matrix(problem);
  Eigen::MatrixXd DtD;
  if (problem.lambda2 > 0.0) DtD = divergence_normal(problem);
  return Objective{H, U, problem.lambda2 > 0.0 ? &DtD : nullptr, problem.lambda1, problem.lambda2}(weights);
}

Vec3 rbf_evaluate(const RbfProblem& problem, const Eigen::MatrixXd& weights, const Vec3& x) {
  Vec3 u = Vec3::Zero();
  for (std::size_t j = 0; j < problem.centers.size(); ++j)
    u += problem.kernel.value((x - problem.centers[j]).squaredNorm()) * weights.row(static_cast<Eigen::Index>(j)).transpose();
  return u;
}

RbfSolution solve(const RbfProblem& problem) {
  problem.validate();
  const auto n = static_cast<Eigen::Index>(problem.centers.size());
  const Eigen::MatrixXd H = gram(problem), U = values_matrix(problem);
  Eigen::MatrixXd DtD;
  const bool div = problem.lambda2 > 0.0;
  if (div) DtD = divergence_normal(problem);
  const Objective obj{H, U, div ? &DtD : nullptr, problem.lambda1, problem.lambda2};

  RbfSolution sol;
  if (problem.lambda1 == 0.0) {
    if (!div) {
      // Square symmetric system: interpolation with a tiny ridge.
      Eigen::MatrixXd A = H;
      A.diagonal().array() += problem.ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      sol.weights = ldlt.solve(U);
    } else {
      Eigen::MatrixXd A = problem.lambda2 * DtD;
      const Eigen::MatrixXd HtH = H.transpose() * H;
      for (int a = 0; a < 3; ++a) A.block(a * n, a * n, n, n) += HtH;
      A.diagonal().array() += problem.ridge;
      const Eigen::VectorXd rhs = stack(H.transpose() * U);
      sol.weights = unstack(Eigen::LDLT<Eigen::MatrixXd>(A).solve(rhs), n);
    }
    if (!sol.weights.allFinite()) throw NumericalError("RBF direct solve produced non-finite weights");
    sol.objective = obj(sol.weights);
    sol.objective_history.push_back(sol.objective);
  } else {
    const double L = 2.0 * 1.05 * curvature_bound(H, div ? &DtD : nullptr, problem.lambda2);
    const double step = L > 0.0 ? 1.0 / L : 1.0;
    const double thresh = step * problem.lambda1;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, 3);
    double f = obj(W);
    sol.objective_history.push_back(f);
    sol.converged = false;
    for (int it = 1; it <= problem.max_iterations; ++it) {
      Eigen::MatrixXd Z = W - step * obj.gradient(W);
      Z = Z.unaryExpr([thresh](double z) { return z > thresh ? z - thresh : (z < -thresh ? z + thresh : 0.0); });
      const double fz = obj(Z);
      if (!std::isfinite(fz)) throw NumericalError("RBF proximal iteration diverged");
      if (fz > f + 1e-10 * std::max(1.0, std::abs(f)))
        throw NumericalError("RBF objective increased at iteration " + std::to_string(it));
      sol.objective_history.push_back(fz);
      sol.iterations = it;
      const double rel = std::abs(f - fz) / std::max(std::abs(f), std::numeric_limits<double>::min());
      W = std::move(Z);
      f = fz;
      if (rel < problem.tolerance) {
        sol.converged = true;
        break;
      }
    }
    sol.weights = std::move(W);
    sol.objective = f;
  }

  const Grid3& g = problem.eval_grid;
  sol.field = DisplacementField4D(g, 1, FrameKind::Eulerian);
  parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) sol.field.vec(0, v) = rbf_evaluate(problem, sol.weights, g.position(g.unravel(v)));
  });
  return sol;
}

DensifyResult densify_ground_truth(const std::vector<SparseTrajectory>& sparse, const Grid3& grid,
                                   const DensifyOptions& options) {
  if (sparse.empty()) throw ConfigError("no sparse trajectories");
  const std::size_t T = sparse.front().position.size();
  if (T < 2) throw DimensionError("trajectories need at least two frames");
  for (const auto& s : sparse)
    if (s.position.size() != T) throw DimensionError("trajectories have different lengths");

  DensifyResult out;
  out.eulerian = DisplacementField4D(grid, static_cast<int>(T), FrameKind::Eulerian);
  for (std::size_t t = 1; t < T; ++t) {
    RbfProblem p;
    p.kernel = options.kernel;
    p.lambda1 = options.lambda1;
    p.lambda2 = options.lambda2;
    p.div_stride = options.div_stride;
    p.max_iterations = options.max_iterations;
    p.eval_grid = grid;
    for (const auto& s : sparse) {
      p.centers.push_back(s.position[t - 1]);
      p.values.push_back(s.position[t] - s.position[t - 1]);
    }
    RbfSolution sol = solve(p);
    out.converged = out.converged && sol.converged;
    std::copy(sol.field.frame(0).begin(), sol.field.frame(0).end(), out.eulerian.frame(static_cast<int>(t)).begin());
    sol.field = DisplacementField4D();
    out.frames.push_back(std::move(sol));
  }
  LagrangianResult lr = eulerian_to_lagrangian(out.eulerian);
  out.lagrangian = std::move(lr.field);
  out.flagged_fraction = lr.flagged_fraction;
  return out;
}

}  // namespace cardiostrain
