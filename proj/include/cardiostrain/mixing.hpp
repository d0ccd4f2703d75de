#pragma once

#include "cardiostrain/common.hpp"

#include <vector>

namespace cardiostrain {

struct MixingResult {
  Eigen::MatrixXd embedding;  // pooled rows (A first, then B) x 2 principal components
  std::vector<int> domain;    // 0 for A rows, 1 for B rows
  double score = 0.5;         // balanced accuracy of a held-out nearest-centroid classifier
};

/// Projects pooled activations onto their first two principal components and measures how
/// separable the two domains are there: 1.0 fully separated, 0.5 fully mixed. Rows alternate
/// between the two folds of a 2-fold split. Throws DimensionError below 10 rows per domain
/// and NumericalError when the pooled activations have rank 0.
MixingResult mixing_diagnostic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace cardiostrain
