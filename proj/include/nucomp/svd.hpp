#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "nucomp/error.hpp"
#include "nucomp/matrix.hpp"

namespace nucomp {

// Cutoff below which singular values count as numerically zero.
inline double default_rank_tol(Index rows, Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max * 1e-12;
}

// Thin SVD A = U diag(sigma) V^T with min(m1,m2) singular values in
// nonincreasing order. The support of A is (range(U_r), range(V_r)) for
// r = numerical_rank().
struct SvdFactors {
  Matrix u;        // m1 x k
  Vector sigma;    // k, nonincreasing, nonnegative
  Matrix v;        // m2 x k
  double rank_tol = 0.0;

  Index numerical_rank() const {
    Index r = 0;
    while (r < sigma.size() && sigma(r) > rank_tol) ++r;
    return r;
  }

  Matrix reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

// rank_tol < 0 selects the default max(m1,m2)*sigma_1*1e-12.
inline SvdFactors svd(const Matrix& a, double rank_tol = -1.0) {
  require_finite(a, "svd input");
  Eigen::JacobiSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  SvdFactors f;
  f.u = dec.matrixU();
  f.sigma = dec.singularValues();
  f.v = dec.matrixV();
  if (!f.sigma.allFinite()) throw NumericalError("SVD produced non-finite singular values");
  const double s1 = f.sigma.size() ? f.sigma(0) : 0.0;
  f.rank_tol = rank_tol >= 0.0 ? rank_tol : default_rank_tol(a.rows(), a.cols(), s1);
  return f;
}

// Schatten-p (quasi-)norm: (sum_j sigma_j^p)^(1/p), p = inf gives sigma_1.
inline double schatten_norm(const Matrix& a, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("schatten_norm: p must be positive");
  if (p == 2.0) return a.norm();
  const Vector s = svd(a).sigma;
  if (std::isinf(p)) return s.size() ? s(0) : 0.0;
  if (p == 1.0) return s.sum();
  double acc = 0.0;
  for (Index j = 0; j < s.size(); ++j) acc += std::pow(s(j), p);
  return std::pow(acc, 1.0 / p);
}

inline double nuclear_norm(const Matrix& a) { return schatten_norm(a, 1.0); }
inline double operator_norm(const Matrix& a) {
  return schatten_norm(a, std::numeric_limits<double>::infinity());
}

// Singular value soft thresholding: sum_j (sigma_j - threshold)_+ u_j v_j^T.
// Values exactly at the threshold map to zero.
inline Matrix soft_threshold_svd(const Matrix& a, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("soft_threshold_svd: negative threshold");
  const SvdFactors f = svd(a);
  Vector s = f.sigma;
  for (Index j = 0; j < s.size(); ++j) s(j) = std::max(s(j) - threshold, 0.0);
  return f.u * s.asDiagonal() * f.v.transpose();
}

}  // namespace nucomp
