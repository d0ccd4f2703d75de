#include "cardiostrain/mixing.hpp"

#include <Eigen/Eigenvalues>

namespace cardiostrain {

namespace {

// First two principal directions of centred rows X (n x p), via the smaller Gram matrix.
Eigen::MatrixXd principal_axes(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd axes(p, 2);
  if (p <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    axes.setZero();
    for (int c = 0; c < 2 && c < p; ++c) axes.col(c) = es.eigenvectors().col(p - 1 - c);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd v = X.transpose() * es.eigenvectors().col(n - 1 - c);
      const double norm = v.norm();
      axes.col(c) = norm > 0.0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Zero(p);
    }
  }
  // Deterministic sign: largest loading positive.
  for (int c = 0; c < 2; ++c) {
    Eigen::Index i = 0;
    axes.col(c).cwiseAbs().maxCoeff(&i);
    if (axes(i, c) < 0.0) axes.col(c) *= -1.0;
  }
  return axes;
}

}  // namespace

MixingResult mixing_diagnostic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 10 || b.rows() < 10) throw DimensionError("mixing diagnostic needs >= 10 rows per domain");
  if (a.cols() != b.cols()) throw DimensionError("domains have different activation widths");
  if (a.cols() < 1) throw DimensionError("activations have no columns");

  Eigen::MatrixXd X(a.rows() + b.rows(), a.cols());
  X << a, b;
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  const double scale = X.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw NumericalError("activations have rank 0");

  MixingResult r;
  r.embedding = X * principal_axes(X);
  r.domain.assign(static_cast<std::size_t>(a.rows()), 0);
  r.domain.insert(r.domain.end(), static_cast<std::size_t>(b.rows()), 1);

  // 2-fold: rows with even within-domain index train the other fold's classifier.
  const auto fold_of = [&](Eigen::Index row) {
    return static_cast<int>((row < a.rows() ? row : row - a.rows()) % 2);
  };
  double correct[2] = {0.0, 0.0}, total[2] = {0.0, 0.0};
  for (int fold = 0; fold < 2; ++fold) {
    Eigen::Vector2d c[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    double n[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < r.embedding.rows(); ++i) {
      if (fold_of(i) == fold) continue;
      const int d = r.domain[static_cast<std::size_t>(i)];
      c[d] += r.embedding.row(i).transpose();
      n[d] += 1.0;
    }
    c[0] /= n[0];
    c[1] /= n[1];
    for (Eigen::Index i = 0; i < r.embedding.rows(); ++i) {
      if (fold_of(i) != fold) continue;
      const int d = r.domain[static_cast<std::size_t>(i)];
      const Eigen::Vector2d e = r.embedding.row(i).transpose();
      const int pred = (e - c[1]).squaredNorm() < (e - c[0]).squaredNorm() ? 1 : 0;
      correct[d] += pred == d ? 1.0 : 0.0;
      total[d] += 1.0;
    }
  }
  r.score = 0.5 * (correct[0] / total[0] + correct[1] / total[1]);
  return r;
}

}  // namespace cardiostrain
