#pragma once

// Test-only helpers: deterministic well-conditioned ground truths, the
// signal-scaling construction used by the rank recovery checks, and
// orthonormal fixed designs for the Lasso checks.

#include <Eigen/QR>
#include <cstdint>
#include <vector>

#include "nucomp/designs.hpp"
#include "nucomp/lasso.hpp"
#include "nucomp/spectral_rank.hpp"
#include "nucomp/stochastic.hpp"

namespace nucomp_test {

using namespace nucomp;

// n x p design with (1/n) X^T X = I, from the QR of a Gaussian matrix.
inline LinearDesign orthonormal_design(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) g(i, j) = rng.normal();
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = Matrix(qr.householderQ()).leftCols(p);
  return LinearDesign::make(std::sqrt(static_cast<double>(n)) * q);
}

// Sylvester-Hadamard matrix of order m (power of two), entries +-1.
inline Matrix hadamard(Index m) {
  Matrix h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < m) {
    const Index k = h.rows();
    Matrix next(2 * k, 2 * k);
    next.topLeftCorner(k, k) = h;
    next.topRightCorner(k, k) = h;
    next.bottomLeftCorner(k, k) = h;
    next.bottomRightCorner(k, k) = -h;
    h = next;
  }
  if (h.rows() != m) throw std::invalid_argument("hadamard: m must be a power of two");
  return h;
}

// Rank-r ground truth with all nonzero singular values equal to m/r and
// max |entry| = 1: (1/r) sum of outer products of Hadamard columns.
inline Matrix equal_spectrum_truth(Index m, Index r) {
  const Matrix h = hadamard(m);
  Matrix a0 = Matrix::Zero(m, m);
  for (Index j = 0; j < r; ++j) a0 += h.col(j) * h.col(j).transpose();
  return a0 / static_cast<double>(r);
}

struct ScaledRankTrial {
  Matrix a0;            // scaled ground truth
  ObservationSet obs;   // y = <A0,X> + noise with the scaled A0
  double base_lambda;   // oracle 2||M||
  bool condition_met;   // sigma_min(A0) >= lambda' m1 m2
};

// Draws cells and noise once, then scales the equal-spectrum truth by the
// smallest power of two making the rank recovery signal condition
// sigma_min(A0) >= lambda' m1 m2 hold under the oracle base lambda.
inline ScaledRankTrial scaled_rank_trial(Index m, Index r, double sigma_noise, Index n,
                                         double delta, std::uint64_t seed) {
  const Matrix unit = equal_spectrum_truth(m, r);
  const Design design = Design::usr(m, m);
  const double m1m2 = static_cast<double>(m) * static_cast<double>(m);

  Rng rng(seed);
  std::vector<Index> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(n));
  std::vector<double> noise(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const auto cell = rng.uniform_index(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m));
    rows[i] = static_cast<Index>(cell / static_cast<std::uint64_t>(m));
    cols[i] = static_cast<Index>(cell % static_cast<std::uint64_t>(m));
    noise[i] = sigma_noise * rng.normal();
  }

  const auto build = [&](double c) {
    ObservationSet obs;
    obs.design = design;
    obs.usr_records.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
      obs.usr_records.push_back({rows[i], cols[i], c * unit(rows[i], cols[i]) + noise[i]});
    return obs;
  };

  const double sigma_min_unit = static_cast<double>(m) / static_cast<double>(r);
  ScaledRankTrial out;
  double c = 1.0;
  for (int step = 0; step < 60; ++step, c *= 2.0) {
    out.obs = build(c);
    out.a0 = c * unit;
    out.base_lambda = 2.0 * operator_norm(compute_M(out.obs, out.a0));
    const double lambda_prime = out.base_lambda / (1.0 - delta);
    out.condition_met = c * sigma_min_unit >= lambda_prime * m1m2;
    if (out.condition_met) break;
  }
  return out;
}

}  // namespace nucomp_test
