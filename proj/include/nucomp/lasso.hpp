#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nucomp/error.hpp"
#include "nucomp/matrix.hpp"
#include "nucomp/rng.hpp"

namespace nucomp {

// Fixed design matrix with rows x_i^T. `normalized` asserts that the
// diagonal of the Gram matrix (1/n) X^T X does not exceed 1.
struct LinearDesign {
  Matrix x;  // n x p
  bool normalized = false;

  static LinearDesign make(Matrix x, bool normalized = true) {
    if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("linear design: empty matrix");
    require_finite(x, "linear design");
    if (normalized) {
      const double n = static_cast<double>(x.rows());
      for (Index j = 0; j < x.cols(); ++j)
        if (x.col(j).squaredNorm() / n > 1.0 + 1e-12)
          throw std::invalid_argument("linear design: Gram diagonal exceeds 1");
    }
    return {std::move(x), normalized};
  }

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// max_j KKT violation of (1/n)|y - X b|^2 + lambda |b|_1: active coordinates
// must satisfy g_j + lambda sign(b_j) = 0, inactive ones |g_j| <= lambda,
// where g = (2/n) X^T (X b - y).
inline double lasso_kkt_residual(const LinearDesign& design, const Vector& y, const Vector& beta,
                                 double lambda) {
  const double n = static_cast<double>(design.n());
  const Vector g = 2.0 / n * design.x.transpose() * (design.x * beta - y);
  double worst = 0.0;
  for (Index j = 0; j < design.p(); ++j) {
    const double v = beta(j) != 0.0 ? std::abs(g(j) + lambda * (beta(j) > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(g(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

struct LassoConfig {
  long max_sweeps = 100000;
  double kkt_tol = 1e-9;
};

// Cyclic coordinate descent for the Lasso; iterates until the KKT residual
// drops below kkt_tol.
inline Vector lasso_solve(const LinearDesign& design, const Vector& y, double lambda,
                          const LassoConfig& cfg = {}) {
  if (y.size() != design.n()) throw std::invalid_argument("lasso_solve: response length mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("lasso_solve: lambda must be positive");
  const Index p = design.p();
  const double n = static_cast<double>(design.n());

  Vector col_sq(p);
  for (Index j = 0; j < p; ++j) col_sq(j) = design.x.col(j).squaredNorm() / n;

  Vector beta = Vector::Zero(p);
  Vector resid = y;
  for (long sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double old = beta(j);
      const double rho = design.x.col(j).dot(resid) / n + col_sq(j) * old;
      const double next = soft_threshold(rho, lambda / 2.0) / col_sq(j);
      if (next != old) {
        resid += design.x.col(j) * (old - next);
        beta(j) = next;
      }
    }
    if (!beta.allFinite()) throw NumericalError("lasso_solve: iterates diverged");
    if (lasso_kkt_residual(design, y, beta, lambda) <= cfg.kkt_tol) return beta;
  }
  throw NumericalError("lasso_solve: coordinate descent did not reach KKT tolerance");
}

// lambda = C sigma sqrt(log(p)/n) with C = 3 a sqrt(2), a >= 1.
inline double theorem10_lambda(double sigma, Index p, Index n, double a) {
  if (p < 2 || n < 1) throw std::invalid_argument("theorem10_lambda: need p >= 2, n >= 1");
  if (!(a >= 1.0)) throw std::invalid_argument("theorem10_lambda: a must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("theorem10_lambda: sigma must be nonnegative");
  return 3.0 * a * std::sqrt(2.0) * sigma *
         std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

namespace detail {

inline void subsets_up_to(Index p, Index s, std::vector<std::vector<Index>>& out) {
  std::vector<Index> cur;
  const auto rec = [&](auto&& self, Index start) -> void {
    if (!cur.empty()) out.push_back(cur);
    if (static_cast<Index>(cur.size()) == s) return;
    for (Index j = start; j < p; ++j) {
      cur.push_back(j);
      self(self, j + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
}

}  // namespace detail

// Brute-force restricted eigenvalue estimate
//   kappa(s,c0) = min_{|J|<=s} min_{|u_{J^c}|_1 <= c0 |u_J|_1} |Xu|_2/(sqrt(n)|u_J|_2),
// by per-subset sampling plus local perturbation descent. The cone
// minimization is nonconvex, so the returned value is an upper estimate of
// the true kappa. Refuses anything beyond desk scale (p <= 16, s <= 3).
inline double kappa_re(const LinearDesign& design, Index s, double c0, long budget,
                       std::uint64_t seed) {
  const Index p = design.p();
  if (p > 16 || s > 3) throw std::invalid_argument("kappa_re: limited to p <= 16, s <= 3");
  if (s < 1 || s > p) throw std::invalid_argument("kappa_re: s must lie in [1, p]");
  if (!(c0 >= 0.0)) throw std::invalid_argument("kappa_re: c0 must be nonnegative");
  if (budget < 1000) throw std::invalid_argument("kappa_re: budget must be >= 1000 per subset");

  const double sqrt_n = std::sqrt(static_cast<double>(design.n()));
  std::vector<std::vector<Index>> subsets;
  detail::subsets_up_to(p, s, subsets);
  Rng rng(seed);

  const auto ratio = [&](const Vector& u, const std::vector<Index>& j_set) {
    double uj_sq = 0.0;
    for (Index j : j_set) uj_sq += u(j) * u(j);
    if (uj_sq <= 0.0) return std::numeric_limits<double>::infinity();
    return (design.x * u).norm() / (sqrt_n * std::sqrt(uj_sq));
  };

  double best = std::numeric_limits<double>::infinity();
  for (const auto& j_set : subsets) {
    std::vector<bool> in_j(p, false);
    for (Index j : j_set) in_j[static_cast<std::size_t>(j)] = true;

    const auto project_cone = [&](Vector& u) {
      double lj = 0.0, ljc = 0.0;
      for (Index k = 0; k < p; ++k) (in_j[static_cast<std::size_t>(k)] ? lj : ljc) += std::abs(u(k));
      if (ljc > c0 * lj && ljc > 0.0) {
        const double shrink = c0 * lj / ljc;
        for (Index k = 0; k < p; ++k)
          if (!in_j[static_cast<std::size_t>(k)]) u(k) *= shrink;
      }
    };

    Vector subset_best_u;
    double subset_best = std::numeric_limits<double>::infinity();
    const auto consider = [&](const Vector& u) {
      const double r = ratio(u, j_set);
      if (r < subset_best) {
        subset_best = r;
        subset_best_u = u;
      }
    };

    // Deterministic candidates: lone support coordinates and signed
    // one-coordinate tails at the cone boundary (catches duplicated columns).
    for (Index j : j_set) {
      Vector u = Vector::Zero(p);
      u(j) = 1.0;
      consider(u);
      for (Index k = 0; k < p; ++k) {
        if (in_j[static_cast<std::size_t>(k)]) continue;
        for (double tail : {1.0, c0}) {
          if (tail <= 0.0 || tail > c0) continue;
          for (double sg : {1.0, -1.0}) {
            Vector w = u;
            w(k) = sg * tail;
            consider(w);
          }
        }
      }
    }
    // Random cone samples.
    for (long it = 0; it < budget; ++it) {
      Vector u(p);
      for (Index k = 0; k < p; ++k) u(k) = rng.normal();
      double lj = 0.0;
      for (Index j : j_set) lj += std::abs(u(j));
      if (lj <= 0.0) continue;
      const double t = rng.uniform();
      double ljc = 0.0;
      for (Index k = 0; k < p; ++k)
        if (!in_j[static_cast<std::size_t>(k)]) ljc += std::abs(u(k));
      if (ljc > 0.0) {
        const double target = t * c0 * lj;
        for (Index k = 0; k < p; ++k)
          if (!in_j[static_cast<std::size_t>(k)]) u(k) *= target / ljc;
      }
      consider(u);
    }
    // Local perturbation descent from the subset incumbent.
    double step = 0.25;
    for (long it = 0; it < budget / 2 && subset_best_u.size(); ++it) {
      Vector u = subset_best_u;
      for (Index k = 0; k < p; ++k) u(k) += step * rng.normal();
      project_cone(u);
      const double before = subset_best;
      consider(u);
      if (subset_best >= before) step *= 0.995;
    }
    best = std::min(best, subset_best);
  }
  return best;
}

// Monte-Carlo check of the sharp Lasso oracle inequality under Gaussian
// noise, with the right-hand side evaluated at beta = beta_star through the
// kappa form of the corollary.
struct SharpOracleVerdict {
  Index p = 0;
  Index n = 0;
  double a = 1.0;
  double sigma = 0.0;
  double lambda = 0.0;
  double kappa_estimate = 0.0;
  double rhs = 0.0;
  long trials = 0;
  long violations = 0;
  double violation_frac = 0.0;
  double failure_prob_bound = 0.0;
};

inline SharpOracleVerdict check_sharp_oracle(const LinearDesign& design, const Vector& beta_star,
                                             double sigma, long trials, std::uint64_t seed,
                                             double a = 1.0, long kappa_budget = 4000) {
  if (beta_star.size() != design.p())
    throw std::invalid_argument("check_sharp_oracle: beta length mismatch");
  if (!(sigma > 0.0)) throw std::invalid_argument("check_sharp_oracle: sigma must be positive");
  if (trials < 1) throw std::invalid_argument("check_sharp_oracle: trials must be >= 1");

  SharpOracleVerdict v;
  v.p = design.p();
  v.n = design.n();
  v.a = a;
  v.sigma = sigma;
  v.trials = trials;
  v.lambda = theorem10_lambda(sigma, v.p, v.n, a);

  Index sparsity = 0;
  for (Index j = 0; j < beta_star.size(); ++j)
    if (beta_star(j) != 0.0) ++sparsity;

  const double logp = std::log(static_cast<double>(v.p));
  const double big_c = 3.0 * a * std::sqrt(2.0);
  if (sparsity > 0) {
    v.kappa_estimate = kappa_re(design, sparsity, 5.0, kappa_budget, derive_seed(seed, 0xCAFE));
    v.rhs = big_c * big_c * sigma * sigma * static_cast<double>(sparsity) * logp /
            (v.kappa_estimate * v.kappa_estimate * static_cast<double>(v.n));
  } else {
    v.rhs = 0.0;  // exact model with beta_star = 0
  }
  v.failure_prob_bound =
      1.0 / (std::pow(static_cast<double>(v.p), a * a - 1.0) * std::sqrt(std::numbers::pi * logp));

  const Vector mean = design.x * beta_star;
  for (long k = 0; k < trials; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    Vector y(v.n);
    for (Index i = 0; i < v.n; ++i) y(i) = mean(i) + sigma * rng.normal();
    const Vector beta_hat = lasso_solve(design, y, v.lambda);
    const double lhs = (design.x * (beta_hat - beta_star)).squaredNorm() / static_cast<double>(v.n);
    if (lhs > v.rhs + 1e-12) ++v.violations;
  }
  v.violation_frac = static_cast<double>(v.violations) / static_cast<double>(trials);
  return v;
}

}  // namespace nucomp
