#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nucomp/designs.hpp"
#include "nucomp/matrix.hpp"
#include "nucomp/stochastic.hpp"
#include "nucomp/svd.hpp"

namespace nucomp {

// (1+sqrt(2))/2, the constant of the fast-rate oracle bound.
inline constexpr double kFastRateConstant = 1.2071067811865476;

// How the regularization parameter is chosen. Oracle computes 2||M||_inf
// exactly from a known A0; the theory rules evaluate the closed-form
// completion formulas at confidence parameter t >= 0 (t = 0 recovers the
// simplified sqrt(log(m)/((m1^m2)n)) form whenever the sqrt branch wins).
enum class LambdaRuleKind { Oracle, TheoryGaussian, TheoryBounded, Fixed };

struct LambdaRule {
  LambdaRuleKind kind = LambdaRuleKind::Fixed;
  double t = 0.0;
  double c_star = 1.0;       // sigma v a (gaussian rule) or eta (bounded rule)
  double big_c = 4.0;        // C_* multiplier of the gaussian rule
  double alpha = 2.0;        // tail exponent in the gaussian rule's log^(1/alpha)
  double fixed_value = 0.0;

  static LambdaRule oracle() {
    LambdaRule r;
    r.kind = LambdaRuleKind::Oracle;
    return r;
  }
  static LambdaRule theory_gaussian(double c_star, double t = 0.0, double big_c = 4.0,
                                    double alpha = 2.0) {
    if (!(c_star > 0.0) || !(big_c > 0.0) || !(alpha >= 1.0) || t < 0.0)
      throw std::invalid_argument("theory_gaussian rule: bad parameters");
    LambdaRule r;
    r.kind = LambdaRuleKind::TheoryGaussian;
    r.c_star = c_star;
    r.t = t;
    r.big_c = big_c;
    r.alpha = alpha;
    return r;
  }
  static LambdaRule theory_bounded(double eta, double t = 0.0) {
    if (!(eta > 0.0) || t < 0.0) throw std::invalid_argument("theory_bounded rule: bad parameters");
    LambdaRule r;
    r.kind = LambdaRuleKind::TheoryBounded;
    r.c_star = eta;
    r.t = t;
    return r;
  }
  static LambdaRule fixed(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("fixed rule: lambda must be positive");
    LambdaRule r;
    r.kind = LambdaRuleKind::Fixed;
    r.fixed_value = lambda;
    return r;
  }

  std::string name() const {
    switch (kind) {
      case LambdaRuleKind::Oracle: return "oracle";
      case LambdaRuleKind::TheoryGaussian: return "theory-gaussian";
      case LambdaRuleKind::TheoryBounded: return "theory-bounded";
      case LambdaRuleKind::Fixed: return "fixed";
    }
    return "?";
  }
};

struct SolverConfig {
  long max_iters = 5000;
  double rel_tol = 1e-10;
  double step_size = 0.0;  // <= 0 selects the automatic 1/L step
};

// Accumulated completion data matrix X = (m1 m2 / n) sum Y_i X_i.
inline Matrix build_X_matrix(const ObservationSet& obs) {
  if (obs.design.kind != DesignKind::UsrCompletion)
    throw std::invalid_argument("build_X_matrix: requires a usr completion design");
  const double scale =
      static_cast<double>(obs.design.m1) * static_cast<double>(obs.design.m2);
  return scale * response_weighted_sum(obs);
}

// Closed-form completion estimator: soft thresholding of the singular values
// of X at lambda m1 m2 / 2. Unique minimizer of the penalized objective.
inline Matrix estimate_completion(const ObservationSet& obs, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("estimate_completion: lambda must be positive");
  const Matrix x = build_X_matrix(obs);
  const double threshold = lambda * static_cast<double>(obs.design.m1) *
                           static_cast<double>(obs.design.m2) / 2.0;
  return soft_threshold_svd(x, threshold);
}

// Penalized objective L_n(A) = ||A||^2_{L2(Pi)} - <(2/n) sum Y_i X_i, A>
// + lambda ||A||_1 on designs with exactly known L2(Pi) norm.
inline double penalized_objective(const ObservationSet& obs, const Matrix& a, double lambda) {
  const Matrix g = 2.0 * response_weighted_sum(obs);
  return l2_pi_norm_sq(a, obs.design) - trace_inner(g, a) + lambda * nuclear_norm(a);
}

struct SolveResult {
  Matrix estimate;
  long iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

namespace detail {

// Curvature constant L of the smooth quadratic part (gradient is L-Lipschitz).
inline double smooth_curvature(const Design& d) {
  switch (d.kind) {
    case DesignKind::UsrCompletion:
      return 2.0 / (static_cast<double>(d.m1) * static_cast<double>(d.m2));
    case DesignKind::ColumnMask:
      return 2.0 / static_cast<double>(d.m2);
    case DesignKind::GaussianFull:
    case DesignKind::RademacherFull:
      return 2.0;
    case DesignKind::Fixed: {
      // 2/n times the top eigenvalue of the Gram matrix of vec(X_i).
      const Index n = static_cast<Index>(d.fixed_xs.size());
      Matrix rows(n, d.m1 * d.m2);
      for (Index i = 0; i < n; ++i)
        rows.row(i) = Eigen::Map<const Vector>(d.fixed_xs[static_cast<std::size_t>(i)].data(),
                                               d.m1 * d.m2);
      const double top = svd(rows).sigma(0);
      return 2.0 * top * top / static_cast<double>(n);
    }
  }
  throw std::logic_error("unreachable");
}

inline Matrix smooth_gradient(const ObservationSet& obs, const Matrix& a, const Matrix& g) {
  const auto& d = obs.design;
  switch (d.kind) {
    case DesignKind::UsrCompletion:
      return 2.0 * a / (static_cast<double>(d.m1) * static_cast<double>(d.m2)) - g;
    case DesignKind::ColumnMask:
      return 2.0 * a / static_cast<double>(d.m2) - g;
    case DesignKind::GaussianFull:
    case DesignKind::RademacherFull:
      return 2.0 * a - g;
    case DesignKind::Fixed: {
      Matrix acc = Matrix::Zero(d.m1, d.m2);
      for (const auto& x : d.fixed_xs) acc += trace_inner(x, a) * x;
      return 2.0 * acc / static_cast<double>(d.fixed_xs.size()) - g;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

// Proximal gradient on L_n: gradient step on the quadratic part, then
// singular value soft thresholding at step * lambda. With the automatic
// 1/L step the objective is nonincreasing; on usr designs the first step
// already lands on the closed form.
inline SolveResult solve_penalized(const ObservationSet& obs, double lambda,
                                   const SolverConfig& cfg = {}) {
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_penalized: lambda must be positive");
  if (!(cfg.rel_tol > 0.0) || cfg.max_iters < 1)
    throw std::invalid_argument("solve_penalized: bad solver configuration");
  const auto& d = obs.design;
  const Matrix g = 2.0 * response_weighted_sum(obs);
  const double step = cfg.step_size > 0.0 ? cfg.step_size : 1.0 / detail::smooth_curvature(d);

  SolveResult res;
  res.estimate = Matrix::Zero(d.m1, d.m2);
  double obj = penalized_objective(obs, res.estimate, lambda);
  res.objective_trace.push_back(obj);
  for (long it = 0; it < cfg.max_iters; ++it) {
    const Matrix grad = detail::smooth_gradient(obs, res.estimate, g);
    res.estimate = soft_threshold_svd(res.estimate - step * grad, step * lambda);
    const double next = penalized_objective(obs, res.estimate, lambda);
    if (!std::isfinite(next))
      throw NumericalError("solve_penalized: objective diverged (step too large)");
    res.objective_trace.push_back(next);
    ++res.iterations;
    const bool converged = std::abs(obj - next) <= cfg.rel_tol * std::max(1.0, std::abs(obj));
    obj = next;
    if (converged) break;
  }
  res.objective = obj;
  return res;
}

// Evaluates the chosen lambda rule; oracle mode needs the true A0.
inline double select_lambda(const LambdaRule& rule, const ObservationSet& obs,
                            const std::optional<Matrix>& a0 = std::nullopt) {
  const auto& d = obs.design;
  const double dn = static_cast<double>(obs.n());
  const double tl = rule.t + std::log(static_cast<double>(d.m1 + d.m2));
  const double mmin = static_cast<double>(std::min(d.m1, d.m2));
  switch (rule.kind) {
    case LambdaRuleKind::Fixed:
      if (!(rule.fixed_value > 0.0))
        throw std::invalid_argument("select_lambda: fixed lambda must be positive");
      return rule.fixed_value;
    case LambdaRuleKind::TheoryGaussian:
      return rule.big_c * rule.c_star *
             std::max(std::sqrt(tl / (mmin * dn)),
                      tl * std::pow(std::log(mmin), 1.0 / rule.alpha) / dn);
    case LambdaRuleKind::TheoryBounded:
      return 4.0 * rule.c_star * std::max(std::sqrt(tl / (mmin * dn)), 2.0 * tl / dn);
    case LambdaRuleKind::Oracle:
      if (!a0) throw std::invalid_argument("select_lambda: oracle rule requires A0");
      return 2.0 * operator_norm(compute_M(obs, *a0));
  }
  throw std::logic_error("unreachable");
}

// Right-hand sides of the oracle inequalities, evaluated at A = A0. The
// schatten variant returns sum_j min{tau^2, sigma_j^2(A0)/mu^2} with
// tau^2 = ((1+sqrt2)/2)^2 mu^2 lambda^2, the exact infimum of the fast
// bound over rank truncations.
struct OracleVariant {
  enum class Kind { Slow, Fast, Schatten } kind = Kind::Fast;
  double q = 2.0;

  static OracleVariant slow() { return {Kind::Slow, 2.0}; }
  static OracleVariant fast() { return {Kind::Fast, 2.0}; }
  static OracleVariant schatten(double q) { return {Kind::Schatten, q}; }
};

inline double oracle_rhs(const Matrix& a0, double lambda, double mu, OracleVariant variant) {
  if (!(lambda > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("oracle_rhs: lambda and mu must be positive");
  switch (variant.kind) {
    case OracleVariant::Kind::Slow:
      return 2.0 * lambda * nuclear_norm(a0);
    case OracleVariant::Kind::Fast: {
      const double k2 = kFastRateConstant * kFastRateConstant;
      return k2 * mu * mu * lambda * lambda * static_cast<double>(svd(a0).numerical_rank());
    }
    case OracleVariant::Kind::Schatten: {
      if (!(variant.q > 0.0) || variant.q > 2.0)
        throw std::invalid_argument("oracle_rhs: schatten q must lie in (0,2]");
      const double k2 = kFastRateConstant * kFastRateConstant;
      const double tau_sq = k2 * mu * mu * lambda * lambda;
      const Vector s = svd(a0).sigma;
      double acc = 0.0;
      for (Index j = 0; j < s.size(); ++j)
        acc += std::min(tau_sq, s(j) * s(j) / (mu * mu));
      return acc;
    }
  }
  throw std::logic_error("unreachable");
}

// min over rank truncations A_k of A0 (k = 0..rank) of
// ||A_k - A0||^2_{L2(Pi)} + 2 lambda ||A_k||_1, a computable upper bound for
// the slow-rate infimum.
inline double slow_rate_bound_over_truncations(const Matrix& a0, double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("slow_rate_bound_over_truncations: bad parameters");
  const Vector s = svd(a0).sigma;
  double tail_sq = s.squaredNorm();  // ||A_0 - A0||_2^2 at k = 0
  double head_nuc = 0.0;
  double best = tail_sq / (mu * mu);  // k = 0 candidate
  for (Index k = 0; k < s.size(); ++k) {
    tail_sq -= s(k) * s(k);
    head_nuc += s(k);
    best = std::min(best, tail_sq / (mu * mu) + 2.0 * lambda * head_nuc);
  }
  return best;
}

struct OptimalityReport {
  bool passed = false;
  bool subgradient_ok = false;
  bool perturbation_ok = false;
  double subgrad_max_abs = 0.0;
  double subgrad_fro = 0.0;
  double min_perturbation_gap = 0.0;  // min over probes of L_n(A+D) - L_n(A)
};

// First-order optimality of a candidate completion estimate: builds the
// subgradient element of ||A - X||_2^2 + lambda m1 m2 ||A||_1 from the SVD
// of X (active pairs contribute u v^T, inactive ones (2 sigma/(lambda m1 m2))
// u v^T) and checks that it annihilates the gradient; then probes random
// small perturbations of the penalized objective.
inline OptimalityReport check_optimality(const Matrix& a_hat, const ObservationSet& obs,
                                         double lambda, double tol,
                                         std::uint64_t probe_seed = 0x5eedULL) {
  if (!(lambda > 0.0) || !(tol > 0.0))
    throw std::invalid_argument("check_optimality: lambda and tol must be positive");
  require_finite(a_hat, "check_optimality estimate");
  const auto& d = obs.design;
  if (d.kind != DesignKind::UsrCompletion)
    throw std::invalid_argument("check_optimality: requires a usr completion design");
  const double m1m2 = static_cast<double>(d.m1) * static_cast<double>(d.m2);
  const double threshold = lambda * m1m2 / 2.0;
  const Matrix x = build_X_matrix(obs);
  const SvdFactors f = svd(x);

  Matrix subgrad = Matrix::Zero(d.m1, d.m2);
  for (Index j = 0; j < f.sigma.size(); ++j) {
    const double coeff = f.sigma(j) > threshold ? 1.0 : f.sigma(j) / threshold;
    subgrad += coeff * f.u.col(j) * f.v.col(j).transpose();
  }
  const Matrix residual = 2.0 * (a_hat - x) + lambda * m1m2 * subgrad;

  OptimalityReport rep;
  rep.subgrad_max_abs = residual.cwiseAbs().maxCoeff();
  rep.subgrad_fro = residual.norm();
  rep.subgradient_ok = rep.subgrad_max_abs <= tol;

  const double base = penalized_objective(obs, a_hat, lambda);
  Rng rng(probe_seed);
  double min_gap = std::numeric_limits<double>::infinity();
  const double scale = 1e-4 * (1.0 + a_hat.norm());
  for (int probe = 0; probe < 16; ++probe) {
    Matrix delta(d.m1, d.m2);
    for (Index i = 0; i < d.m1; ++i)
      for (Index j = 0; j < d.m2; ++j) delta(i, j) = rng.normal();
    delta *= scale / delta.norm();
    min_gap = std::min(min_gap, penalized_objective(obs, a_hat + delta, lambda) - base);
  }
  rep.min_perturbation_gap = min_gap;
  rep.perturbation_ok = min_gap >= -tol;
  rep.passed = rep.subgradient_ok && rep.perturbation_ok;
  return rep;
}

}  // namespace nucomp
