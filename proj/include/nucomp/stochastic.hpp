#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nucomp/designs.hpp"
#include "nucomp/matrix.hpp"
#include "nucomp/svd.hpp"

namespace nucomp {

// (1/n) sum Y_i X_i, the response-weighted design average.
inline Matrix response_weighted_sum(const ObservationSet& obs) {
  const auto& d = obs.design;
  Matrix acc = Matrix::Zero(d.m1, d.m2);
  if (d.kind == DesignKind::UsrCompletion) {
    for (const auto& rec : obs.usr_records) acc(rec.row, rec.col) += rec.y;
  } else {
    for (const auto& rec : obs.full_records) acc += rec.y * rec.x;
  }
  return acc / static_cast<double>(obs.n());
}

// Stochastic error M = (1/n) sum (Y_i X_i - E(Y_i X_i)), with the expectation
// taken in closed form: A0/(m1 m2) under uniform completion sampling,
// A0/m2 under column masks, A0 for the full subgaussian designs, and
// <A0,X_i> X_i termwise for fixed designs.
inline Matrix compute_M(const ObservationSet& obs, const Matrix& a0) {
  const auto& d = obs.design;
  if (a0.rows() != d.m1 || a0.cols() != d.m2)
    throw std::invalid_argument("compute_M: A0 shape does not match design");
  switch (d.kind) {
    case DesignKind::UsrCompletion:
      return response_weighted_sum(obs) -
             a0 / (static_cast<double>(d.m1) * static_cast<double>(d.m2));
    case DesignKind::ColumnMask:
      return response_weighted_sum(obs) - a0 / static_cast<double>(d.m2);
    case DesignKind::GaussianFull:
    case DesignKind::RademacherFull:
      return response_weighted_sum(obs) - a0;
    case DesignKind::Fixed: {
      Matrix acc = Matrix::Zero(d.m1, d.m2);
      for (const auto& rec : obs.full_records) acc += (rec.y - trace_inner(a0, rec.x)) * rec.x;
      return acc / static_cast<double>(obs.n());
    }
  }
  throw std::logic_error("unreachable");
}

// Inputs of the noncommutative Bernstein bounds: sigma_z is the variance
// proxy max{||1/n sum E(Z Z^T)||, ||1/n sum E(Z^T Z)||}^(1/2); u is the a.s.
// bound (alpha = inf) or the psi_alpha norm of ||Z||.
struct BernsteinInputs {
  double sigma_z = 0.0;
  double u = 0.0;
  double alpha = std::numeric_limits<double>::infinity();
  double t = 0.0;
  Index m1 = 0;
  Index m2 = 0;
  Index n = 0;
};

namespace detail {
inline void check_bernstein_common(const BernsteinInputs& inp) {
  if (inp.sigma_z < 0.0 || inp.u < 0.0)
    throw std::invalid_argument("bernstein bound: negative variance proxy or bound");
  if (!(inp.t > 0.0)) throw std::invalid_argument("bernstein bound: t must be positive");
  if (inp.m1 < 1 || inp.m2 < 1 || inp.n < 1)
    throw std::invalid_argument("bernstein bound: dimensions must be positive");
}
}  // namespace detail

// Bounded case: 2 max{ sigma_z sqrt((t+log m)/n), u (t+log m)/n }, m = m1+m2.
inline double bernstein_bound_bounded(const BernsteinInputs& inp) {
  detail::check_bernstein_common(inp);
  const double tl = (inp.t + std::log(static_cast<double>(inp.m1 + inp.m2))) /
                    static_cast<double>(inp.n);
  return 2.0 * std::max(inp.sigma_z * std::sqrt(tl), inp.u * tl);
}

// psi_alpha case with unspecified absolute constant C. The log factor is
// clamped below at 1 so the bound stays monotone when u < e * sigma_z.
inline double bernstein_bound_psi_alpha(const BernsteinInputs& inp, double big_c) {
  detail::check_bernstein_common(inp);
  if (!(inp.sigma_z > 0.0))
    throw std::invalid_argument("bernstein_bound_psi_alpha: sigma_z must be positive");
  if (!(inp.alpha >= 1.0))
    throw std::invalid_argument("bernstein_bound_psi_alpha: alpha must be >= 1");
  if (!(big_c > 0.0)) throw std::invalid_argument("bernstein_bound_psi_alpha: C must be positive");
  const double tl = (inp.t + std::log(static_cast<double>(inp.m1 + inp.m2))) /
                    static_cast<double>(inp.n);
  const double log_term = std::max(std::log(inp.u / inp.sigma_z), 1.0);
  return big_c * std::max(inp.sigma_z * std::sqrt(tl),
                          inp.u * std::pow(log_term, 1.0 / inp.alpha) * tl);
}

// ||M|| bound for bounded responses |Y| <= eta under uniform completion
// sampling: 2 eta max{ sqrt((t+log m)/((m1^m2) n)), 2(t+log m)/n }.
inline double completion_m_bound_learning(double eta, Index m1, Index m2, Index n, double t) {
  if (!(eta > 0.0)) throw std::invalid_argument("completion_m_bound_learning: eta > 0 required");
  if (m1 < 1 || m2 < 1 || n < 1 || !(t > 0.0))
    throw std::invalid_argument("completion_m_bound_learning: bad parameters");
  const double tl = t + std::log(static_cast<double>(m1 + m2));
  const double dn = static_cast<double>(n);
  return 2.0 * eta *
         std::max(std::sqrt(tl / (static_cast<double>(std::min(m1, m2)) * dn)), 2.0 * tl / dn);
}

// ||M|| bound for sub-exponential noise and max|a0| <= a: the noise term
// (constant big_c, unspecified in closed form) plus the bounded signal term.
inline double completion_m_bound_gaussian_subexp(double sigma, double a, double alpha, Index m1,
                                                 Index m2, Index n, double t,
                                                 double big_c = 4.0) {
  if (!(sigma > 0.0) || !(a > 0.0) || !(alpha >= 1.0) || !(big_c > 0.0))
    throw std::invalid_argument("completion_m_bound_gaussian_subexp: bad parameters");
  if (m1 < 1 || m2 < 1 || n < 1 || !(t > 0.0))
    throw std::invalid_argument("completion_m_bound_gaussian_subexp: bad parameters");
  const double tl = t + std::log(static_cast<double>(m1 + m2));
  const double dn = static_cast<double>(n);
  const double mmin = static_cast<double>(std::min(m1, m2));
  const double delta1 =
      big_c * sigma *
      std::max(std::sqrt(tl / (mmin * dn)), tl * std::pow(std::log(mmin), 1.0 / alpha) / dn);
  const double delta2 = 2.0 * a * std::max(std::sqrt(tl / (mmin * dn)), 2.0 * tl / dn);
  return delta1 + delta2;
}

// |A0|_* = max of the largest row and column Euclidean norms.
inline double a0_star_norm(const Matrix& a0) {
  double row_max = 0.0, col_max = 0.0;
  for (Index i = 0; i < a0.rows(); ++i) row_max = std::max(row_max, a0.row(i).squaredNorm());
  for (Index j = 0; j < a0.cols(); ++j) col_max = std::max(col_max, a0.col(j).squaredNorm());
  return std::sqrt(std::max(row_max, col_max));
}

// psi_alpha norm inf{u : E exp(||Z||^alpha/u^alpha) <= 2} estimated from
// Monte-Carlo samples of ||Z|| by bisection. The expectation is monotone
// decreasing in u, so the bracket [0, max/log(2)^(1/alpha)] always works.
inline double psi_alpha_norm_mc(const std::vector<double>& z_norms, double alpha) {
  if (z_norms.empty()) throw std::invalid_argument("psi_alpha_norm_mc: no samples");
  if (!(alpha >= 1.0)) throw std::invalid_argument("psi_alpha_norm_mc: alpha must be >= 1");
  double zmax = 0.0;
  for (double z : z_norms) {
    if (!(z >= 0.0)) throw std::invalid_argument("psi_alpha_norm_mc: negative norm sample");
    zmax = std::max(zmax, z);
  }
  if (zmax == 0.0) return 0.0;
  const auto mean_exp = [&](double u) {
    double acc = 0.0;
    for (double z : z_norms) acc += std::exp(std::min(std::pow(z / u, alpha), 700.0));
    return acc / static_cast<double>(z_norms.size());
  };
  double lo = zmax * 1e-6;
  double hi = zmax / std::pow(std::log(2.0), 1.0 / alpha);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_exp(mid) > 2.0 ? lo : hi) = mid;
  }
  return hi;
}

enum class TailScenarioKind { Learning, GaussianSubexp };

// One Monte-Carlo tail experiment: ground truths from the (r, a) class,
// completion sampling, and the matching closed-form ||M|| bound.
struct TailScenario {
  TailScenarioKind kind = TailScenarioKind::Learning;
  Index m1 = 10;
  Index m2 = 10;
  Index r = 1;
  double a = 1.0;
  Index n = 1000;
  double eta = 1.0;      // Learning
  double sigma = 1.0;    // GaussianSubexp
  double alpha = 2.0;    // GaussianSubexp; 2 draws Gaussian noise
  double lemma2_c = 4.0; // GaussianSubexp noise-term constant
};

struct TailReport {
  std::string scenario;
  long trials = 0;
  double t = 0.0;
  std::string bound_kind;
  long exceed_count = 0;
  double exceed_frac = 0.0;
  double target = 0.0;  // theoretical exceedance probability
};

inline TailReport tail_verify(const TailScenario& sc, long trials, double t, std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("tail_verify: need at least 100 trials");
  if (!(t > 0.0)) throw std::invalid_argument("tail_verify: t must be positive");
  const bool learning = sc.kind == TailScenarioKind::Learning;
  if (learning && sc.a > sc.eta)
    throw std::invalid_argument("tail_verify: learning scenario needs a <= eta");

  double bound;
  NoiseModel noise = NoiseModel::none();
  TailReport rep;
  if (learning) {
    bound = completion_m_bound_learning(sc.eta, sc.m1, sc.m2, sc.n, t);
    noise = NoiseModel::bounded_sign(sc.eta);
    rep.scenario = "learning";
    rep.bound_kind = "lemma1_bounded_response";
    rep.target = std::exp(-t);
  } else {
    bound = completion_m_bound_gaussian_subexp(sc.sigma, sc.a, sc.alpha, sc.m1, sc.m2, sc.n, t,
                                               sc.lemma2_c);
    noise = sc.alpha == 2.0 ? NoiseModel::gaussian(sc.sigma) : NoiseModel::subexp(sc.sigma, sc.alpha);
    rep.scenario = "gaussian_subexp";
    rep.bound_kind = "lemma2_plus_lemma3";
    rep.target = 3.0 * std::exp(-t);
  }
  rep.trials = trials;
  rep.t = t;

  const Design design = Design::usr(sc.m1, sc.m2);
  for (long k = 0; k < trials; ++k) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k));
    const Matrix a0 = generate_ground_truth(sc.m1, sc.m2, sc.r, sc.a, s);
    const ObservationSet obs = sample_observations(a0, design, noise, sc.n, derive_seed(s, 1));
    if (operator_norm(compute_M(obs, a0)) > bound) ++rep.exceed_count;
  }
  rep.exceed_frac = static_cast<double>(rep.exceed_count) / static_cast<double>(trials);
  return rep;
}

}  // namespace nucomp
