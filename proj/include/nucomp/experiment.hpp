#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nucomp/estimators.hpp"
#include "nucomp/spectral_rank.hpp"
#include "nucomp/stochastic.hpp"

namespace nucomp {

// One Monte-Carlo trial of completion estimation, flattened for CSV output.
struct ExperimentRecord {
  long trial = 0;
  Index m1 = 0;
  Index m2 = 0;
  Index n = 0;
  Index rank_true = 0;
  double lambda = 0.0;
  std::string lambda_rule;
  double frob_err_sq_norm = 0.0;  // (1/(m1 m2)) ||A_hat - A0||_2^2
  Index rank_hat = 0;
  double oracle_rhs_fast = 0.0;
  double oracle_rhs_slow = 0.0;
  double m_norm = 0.0;   // ||M||_inf
  double bound_m = 0.0;  // theoretical bound on ||M||_inf
  std::uint64_t seed = 0;
};

inline const char* experiment_csv_header() {
  return "trial,m1,m2,n,rank_true,lambda,lambda_rule,frob_err_sq_norm,rank_hat,"
         "oracle_rhs_fast,oracle_rhs_slow,m_norm,bound_m,seed";
}

inline std::string experiment_csv_row(const ExperimentRecord& r) {
  std::string row;
  row += std::to_string(r.trial);
  row += ',' + std::to_string(r.m1);
  row += ',' + std::to_string(r.m2);
  row += ',' + std::to_string(r.n);
  row += ',' + std::to_string(r.rank_true);
  row += ',' + format_double(r.lambda);
  row += ',' + r.lambda_rule;
  row += ',' + format_double(r.frob_err_sq_norm);
  row += ',' + std::to_string(r.rank_hat);
  row += ',' + format_double(r.oracle_rhs_fast);
  row += ',' + format_double(r.oracle_rhs_slow);
  row += ',' + format_double(r.m_norm);
  row += ',' + format_double(r.bound_m);
  row += ',' + std::to_string(r.seed);
  return row;
}

struct TrialParams {
  Index m1 = 30;
  Index m2 = 30;
  Index r = 1;
  double a = 1.0;
  Index n = 1000;
  NoiseModel noise = NoiseModel::gaussian(1.0);
  LambdaRule rule = LambdaRule::oracle();
  double bound_t = 2.0;     // confidence parameter of the recorded ||M|| bound
  double lemma2_c = 4.0;    // noise-term constant of the sub-exponential bound
};

// Theoretical ||M|| bound matching the trial's noise model. Noiseless trials
// have |Y| <= a almost surely, so the bounded-response bound applies with
// eta = a.
inline double m_bound_for(const TrialParams& p) {
  switch (p.noise.kind) {
    case NoiseKind::Gaussian:
      return completion_m_bound_gaussian_subexp(p.noise.sigma, p.a, 2.0, p.m1, p.m2, p.n,
                                                p.bound_t, p.lemma2_c);
    case NoiseKind::Subexp:
      return completion_m_bound_gaussian_subexp(p.noise.sigma, p.a, p.noise.alpha, p.m1, p.m2,
                                                p.n, p.bound_t, p.lemma2_c);
    case NoiseKind::BoundedSign:
      return completion_m_bound_learning(p.noise.eta, p.m1, p.m2, p.n, p.bound_t);
    case NoiseKind::None:
      return completion_m_bound_learning(p.a, p.m1, p.m2, p.n, p.bound_t);
  }
  throw std::logic_error("unreachable");
}

// Runs one seeded trial: ground truth, sample, lambda, closed-form estimate,
// error and bound bookkeeping. The trial stream is derived from
// (master_seed, trial_index).
inline ExperimentRecord run_completion_trial(const TrialParams& p, std::uint64_t master_seed,
                                             long trial_index) {
  const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(trial_index));
  const Matrix a0 = generate_ground_truth(p.m1, p.m2, p.r, p.a, derive_seed(seed, 0));
  const Design design = Design::usr(p.m1, p.m2);
  const ObservationSet obs = sample_observations(a0, design, p.noise, p.n, derive_seed(seed, 1));

  ExperimentRecord rec;
  rec.trial = trial_index;
  rec.m1 = p.m1;
  rec.m2 = p.m2;
  rec.n = p.n;
  rec.rank_true = p.r;
  rec.seed = seed;
  rec.lambda_rule = p.rule.name();
  rec.lambda = select_lambda(p.rule, obs, a0);

  const double m1m2 = static_cast<double>(p.m1) * static_cast<double>(p.m2);
  const double threshold = rec.lambda * m1m2 / 2.0;
  const SvdFactors f = svd(build_X_matrix(obs));
  Vector s = f.sigma;
  rec.rank_hat = 0;
  for (Index j = 0; j < s.size(); ++j) {
    s(j) = std::max(s(j) - threshold, 0.0);
    if (s(j) > 0.0) ++rec.rank_hat;
  }
  const Matrix a_hat = f.u * s.asDiagonal() * f.v.transpose();

  rec.frob_err_sq_norm = (a_hat - a0).squaredNorm() / m1m2;
  rec.m_norm = operator_norm(compute_M(obs, a0));
  rec.bound_m = m_bound_for(p);
  const double mu = std::sqrt(m1m2);
  rec.oracle_rhs_fast = oracle_rhs(a0, rec.lambda, mu, OracleVariant::fast());
  rec.oracle_rhs_slow = oracle_rhs(a0, rec.lambda, mu, OracleVariant::slow());
  return rec;
}

// Whether the record obeys the fast-rate bound whenever its lambda rule
// makes the oracle hypothesis hold by construction.
inline bool record_consistent(const ExperimentRecord& rec) {
  if (rec.lambda < 2.0 * rec.m_norm) return true;  // hypothesis did not hold
  return rec.frob_err_sq_norm <= rec.oracle_rhs_fast * (1.0 + 1e-12) + 1e-15;
}

// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p must be in [0,1]");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= xs.size()) return xs.back();
  const double w = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - w) + xs[lo + 1] * w;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of log(median error) on log(n).
inline RateFit fit_loglog(const std::vector<double>& ns, const std::vector<double>& medians) {
  if (ns.size() != medians.size() || ns.size() < 3)
    throw std::invalid_argument("fit_loglog: need at least 3 points");
  const std::size_t k = ns.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ns[i] > 0.0) || !(medians[i] > 0.0))
      throw std::invalid_argument("fit_loglog: points must be positive");
    const double x = std::log(ns[i]);
    const double y = std::log(medians[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double dk = static_cast<double>(k);
  const double vxx = sxx - sx * sx / dk;
  const double vxy = sxy - sx * sy / dk;
  const double vyy = syy - sy * sy / dk;
  if (vxx <= 0.0) throw std::invalid_argument("fit_loglog: need at least 3 distinct n values");
  RateFit fit;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / dk;
  fit.r_squared = vyy > 0.0 ? vxy * vxy / (vxx * vyy) : 1.0;
  return fit;
}

inline RateFit fit_rate(const std::vector<ExperimentRecord>& records) {
  std::map<Index, std::vector<double>> by_n;
  for (const auto& r : records) by_n[r.n].push_back(r.frob_err_sq_norm);
  if (by_n.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 distinct n values");
  std::vector<double> ns, medians;
  for (auto& [n, errs] : by_n) {
    ns.push_back(static_cast<double>(n));
    medians.push_back(quantile(errs, 0.5));
  }
  return fit_loglog(ns, medians);
}

}  // namespace nucomp
