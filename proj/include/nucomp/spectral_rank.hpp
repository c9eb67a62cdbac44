#pragma once

#include <cmath>
#include <utility>

#include "nucomp/estimators.hpp"

namespace nucomp {

// Rank recovery runs the completion estimator at the inflated level
// lambda' = base_lambda / (1 - delta) and reads the rank off the number of
// surviving singular values.
struct RankRecoveryConfig {
  double delta = 0.5;
  double base_lambda = 0.0;

  RankRecoveryConfig(double delta_, double base_lambda_)
      : delta(delta_), base_lambda(base_lambda_) {
    if (!(delta > 0.0) || !(delta < 1.0))
      throw std::invalid_argument("rank recovery: delta must lie in (0,1)");
    if (!(base_lambda > 0.0))
      throw std::invalid_argument("rank recovery: base lambda must be positive");
  }

  double lambda_prime() const { return base_lambda / (1.0 - delta); }
};

struct RankRecoveryResult {
  Matrix estimate;
  Index r_hat = 0;
};

inline RankRecoveryResult recover_rank(const ObservationSet& obs, const RankRecoveryConfig& cfg) {
  if (obs.design.kind != DesignKind::UsrCompletion)
    throw std::invalid_argument("recover_rank: requires a usr completion design");
  const double lp = cfg.lambda_prime();
  const double threshold = lp * static_cast<double>(obs.design.m1) *
                           static_cast<double>(obs.design.m2) / 2.0;
  const Matrix x = build_X_matrix(obs);
  const SvdFactors f = svd(x);
  RankRecoveryResult res;
  // The soft-threshold count is exact; values at the threshold map to zero.
  res.r_hat = 0;
  Vector s = f.sigma;
  for (Index j = 0; j < s.size(); ++j) {
    s(j) = std::max(s(j) - threshold, 0.0);
    if (s(j) > 0.0) ++res.r_hat;
  }
  res.estimate = f.u * s.asDiagonal() * f.v.transpose();
  return res;
}

// Per-trial verdict on the rank recovery guarantees. Violations are
// reported, not thrown: with the hypothesis lambda >= 2||M|| the upper rank
// bound must hold, and with the signal condition also the lower bound and
// the Frobenius lower bound.
struct RankTheoremVerdict {
  bool hypothesis_held = false;
  bool upper_ok = false;
  bool signal_condition_met = false;
  bool lower_rank_ok = false;
  bool frob_lower_ok = false;
  Index r_hat = 0;
  Index rank_true = 0;
  double m_norm = 0.0;
  double frob_err_sq = 0.0;
  double frob_lower_bound = 0.0;
};

inline RankTheoremVerdict check_rank_theorem(const Matrix& a0, const ObservationSet& obs,
                                             const RankRecoveryConfig& cfg) {
  const double m1m2 = static_cast<double>(obs.design.m1) * static_cast<double>(obs.design.m2);
  const double lp = cfg.lambda_prime();

  RankTheoremVerdict v;
  v.m_norm = operator_norm(compute_M(obs, a0));
  v.hypothesis_held = cfg.base_lambda >= 2.0 * v.m_norm;
  const SvdFactors fa = svd(a0);
  v.rank_true = fa.numerical_rank();

  const RankRecoveryResult rec = recover_rank(obs, cfg);
  v.r_hat = rec.r_hat;
  v.upper_ok = v.r_hat <= v.rank_true;

  double sigma_min = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < v.rank_true; ++j) sigma_min = std::min(sigma_min, fa.sigma(j));
  v.signal_condition_met = v.rank_true > 0 && sigma_min >= lp * m1m2;
  v.lower_rank_ok = v.r_hat >= v.rank_true;

  v.frob_err_sq = (rec.estimate - a0).squaredNorm();
  const double dd = cfg.delta * cfg.delta / (4.0 * (1.0 - cfg.delta) * (1.0 - cfg.delta));
  v.frob_lower_bound =
      dd * static_cast<double>(v.rank_true) * (cfg.base_lambda * m1m2) * (cfg.base_lambda * m1m2);
  v.frob_lower_ok = v.frob_err_sq >= v.frob_lower_bound;
  return v;
}

// lambda' and the singular value threshold of the closed-form rank recovery
// corollary: lambda' = C_* c_* / (1-delta) sqrt(log(m)/((m1^m2) n)) and
// signal threshold C_* c_* / (1-delta) sqrt(m1 m2) sqrt(log(m)(m1 v m2)/n).
inline std::pair<double, double> corollary3_lambda_prime(double c_star, double big_c, double delta,
                                                         Index m1, Index m2, Index n) {
  if (!(c_star > 0.0) || !(big_c > 0.0) || m1 < 1 || m2 < 1 || n < 1)
    throw std::invalid_argument("corollary3_lambda_prime: bad parameters");
  if (!(delta > 0.0) || !(delta < 1.0))
    throw std::invalid_argument("corollary3_lambda_prime: delta must lie in (0,1)");
  const double logm = std::log(static_cast<double>(m1 + m2));
  const double dn = static_cast<double>(n);
  const double front = big_c * c_star / (1.0 - delta);
  const double lambda_prime = front * std::sqrt(logm / (static_cast<double>(std::min(m1, m2)) * dn));
  const double signal_threshold =
      front * std::sqrt(static_cast<double>(m1) * static_cast<double>(m2)) *
      std::sqrt(logm * static_cast<double>(std::max(m1, m2)) / dn);
  return {lambda_prime, signal_threshold};
}

}  // namespace nucomp
