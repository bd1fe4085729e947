#pragma once

// Closed-form solvers for the output weights of a single-hidden-layer network.
//
// Given the hidden-layer output H (N x L) and targets T (N x m), the output
// weights beta (L x m) come from one of:
//
//   least squares   beta = pinv(H) T
//   ridge, primal   beta = (I/lambda + H^T H)^-1 H^T T      (L x L system)
//   ridge, dual     beta = H^T (I/lambda + H H^T)^-1 T      (N x N system)
//
// The penalty is 1/lambda, so a *smaller* lambda regularizes more strongly.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "celm/error.hpp"

namespace celm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws DataError naming `what` if any entry is NaN or infinite.
inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite entries");
}

/// Ridge regularization factor; the penalty term is (1/lambda) ||beta||^2.
class RidgeConfig {
 public:
  explicit RidgeConfig(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw ConfigError("ridge lambda must be a positive finite number, got " + std::to_string(lambda));
  }
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

enum class RidgeForm { primal, dual };

/// Solve the smaller Gram system; N == L goes to primal.
constexpr RidgeForm choose_ridge_form(Index rows, Index nodes) noexcept {
  return rows < nodes ? RidgeForm::dual : RidgeForm::primal;
}

namespace detail {

inline void check_system(const Matrix& h, const Matrix& t) {
  if (h.rows() != t.rows())
    throw UsageError("H has " + std::to_string(h.rows()) + " rows but T has " +
                     std::to_string(t.rows()));
  if (h.rows() < 1 || h.cols() < 1 || t.cols() < 1)
    throw UsageError("least-squares system must be non-empty");
  require_finite(h, "H");
  require_finite(t, "T");
}

/// pinv(A) * B through a thin SVD, truncating singular values below
/// 1e-12 * max(rows, cols) * sigma_max.
inline Matrix svd_solve(const Matrix& a, const Matrix& b) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double rtol = 1e-12 * static_cast<double>(std::max(a.rows(), a.cols()));
  const double cutoff = sigma.size() > 0 ? rtol * sigma(0) : 0.0;
  Vector inv = Vector::Zero(sigma.size());
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * b));
}

/// Solve (I/lambda + G) X = B for symmetric positive definite G + I/lambda.
/// Cholesky first; SVD pseudoinverse when the factorization breaks down.
inline Matrix spd_solve(Matrix gram, double lambda, const Matrix& rhs) {
  gram.diagonal().array() += 1.0 / lambda;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) {
    Matrix x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  return svd_solve(gram, rhs);
}

inline Matrix gram_of_columns(const Matrix& h) {  // H^T H
  Matrix g = Matrix::Zero(h.cols(), h.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(h.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

inline Matrix gram_of_rows(const Matrix& h) {  // H H^T
  Matrix g = Matrix::Zero(h.rows(), h.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(h);
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace detail

/// Minimum-norm least-squares solution beta = pinv(H) T.
inline Matrix solve_least_squares(const Matrix& h, const Matrix& t) {
  detail::check_system(h, t);
  return detail::svd_solve(h, t);
}

/// beta = (I/lambda + H^T H)^-1 H^T T.
inline Matrix solve_ridge_primal(const Matrix& h, const Matrix& t, const RidgeConfig& cfg) {
  detail::check_system(h, t);
  return detail::spd_solve(detail::gram_of_columns(h), cfg.lambda(), h.transpose() * t);
}

/// beta = H^T (I/lambda + H H^T)^-1 T.
inline Matrix solve_ridge_dual(const Matrix& h, const Matrix& t, const RidgeConfig& cfg) {
  detail::check_system(h, t);
  return h.transpose() * detail::spd_solve(detail::gram_of_rows(h), cfg.lambda(), t);
}

/// Ridge solution through whichever form has the smaller Gram matrix.
inline Matrix solve_ridge(const Matrix& h, const Matrix& t, const RidgeConfig& cfg) {
  return choose_ridge_form(h.rows(), h.cols()) == RidgeForm::dual ? solve_ridge_dual(h, t, cfg)
                                                                  : solve_ridge_primal(h, t, cfg);
}

}  // namespace celm
