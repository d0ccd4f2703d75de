#pragma once

#include "cardiostrain/phantom.hpp"

namespace cardiostrain {

enum class RbfKernelType { Gaussian, Wendland };

/// Radial kernel: Gaussian exp(-r^2 / 2 s^2) or Wendland C2 (1 - r/s)_+^4 (4 r/s + 1).
struct RbfKernel {
  RbfKernelType type = RbfKernelType::Gaussian;
  double scale = 8.0;  // sigma or support radius, mm

  double value(double r2) const;
  /// Gradient with respect to x of phi(|x - c|), given d = x - c.
  Vec3 gradient(const Vec3& d) const;
  void validate() const;
};

/// Parses "gaussian:8.0" or "wendland:20".
RbfKernel parse_rbf_kernel(const std::string& s);

/// min_w |H w - U|^2 + lambda1 |w|_1 + lambda2 sum_grid (div U)^2, with one kernel centred at
/// each sample. The divergence is evaluated on every `div_stride`-th voxel of the eval grid.
struct RbfProblem {
  std::vector<Vec3> centers;  // sample positions, mm
  std::vector<Vec3> values;   // sample displacements, mm
  RbfKernel kernel;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Grid3 eval_grid;
  int div_stride = 2;
  int max_iterations = 10000;
  double tolerance = 1e-8;   // relative objective change
  double ridge = 1e-10;

  void validate() const;
};

struct RbfSolution {
  Eigen::MatrixXd weights;  // N x 3
  DisplacementField4D field;  // one Eulerian frame on the eval grid
  double objective = 0.0;
  int iterations = 0;          // proximal iterations (0 for the direct solve)
  bool converged = true;       // false: iteration cap hit, best iterate returned
  std::vector<double> objective_history;
};

/// Objective value of a weight matrix.
double rbf_objective(const RbfProblem& problem, const Eigen::MatrixXd& weights);

/// Displacement of the interpolant at a point.
Vec3 rbf_evaluate(const RbfProblem& problem, const Eigen::MatrixXd& weights, const Vec3& x);

/// lambda1 = 0: direct regularized least squares. Otherwise proximal gradient (soft
/// thresholding) with a fixed step 1 / L from a bound on the smooth part's Lipschitz constant.
/// Throws NumericalError if an iteration increases the objective.
RbfSolution solve(const RbfProblem& problem);

struct DensifyOptions {
  RbfKernel kernel;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int div_stride = 2;
  int max_iterations = 10000;
};

struct DensifyResult {
  DisplacementField4D lagrangian;
  DisplacementField4D eulerian;
  std::vector<RbfSolution> frames;  // per Eulerian frame t >= 1 (weights, diagnostics)
  double flagged_fraction = 0.0;
  bool converged = true;
};

/// Sparse trajectories -> per-frame Eulerian RBF fits (samples at the frame t-1 positions,
/// values x_t - x_{t-1}) -> Lagrangian accumulation.
DensifyResult densify_ground_truth(const std::vector<SparseTrajectory>& sparse, const Grid3& grid,
                                   const DensifyOptions& options);

}  // namespace cardiostrain
