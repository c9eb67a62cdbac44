#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "nucomp/designs.hpp"
#include "nucomp/matrix.hpp"
#include "nucomp/rng.hpp"

namespace nucomp {

// Packing family for the minimax lower-bound constructions: binary m1 x r
// tiles with pairwise Hamming separation m1 r / 8, replicated into
// [A|A|...|A|O] block matrices with entries in {0, amplitude}.
enum class PackingCase { Gaussian, Bounded };

struct PackingConfig {
  Index m1 = 0;
  Index m2 = 0;
  Index r = 1;
  double gamma = 0.25;
  Index n = 0;
  PackingCase kind = PackingCase::Gaussian;
  double sigma = 1.0;  // Gaussian case
  double a = 1.0;      // entry bound of the class A(r,a)
  double eta = 1.0;    // Bounded case

  double mu() const { return std::sqrt(static_cast<double>(m1) * static_cast<double>(m2)); }

  // gamma (sigma^a) sqrt(mu^2 r/(m2 n)) resp. gamma eta sqrt(mu^2 r/(m2 n)).
  double amplitude() const { return amplitude_at(gamma); }
  double amplitude_at(double g) const {
    const double scale = kind == PackingCase::Gaussian ? std::min(sigma, a) : eta;
    return g * scale *
           std::sqrt(mu() * mu() * static_cast<double>(r) /
                     (static_cast<double>(m2) * static_cast<double>(n)));
  }

  double target_log2_card() const {
    return static_cast<double>(r) * static_cast<double>(m1) / 8.0;
  }

  // Pairwise separation guaranteed by the construction (squared Frobenius).
  double separation_lower_bound() const {
    const double scale = kind == PackingCase::Gaussian ? std::min(sigma, a) : eta;
    return gamma * gamma / 16.0 * scale * scale * mu() * mu() * static_cast<double>(m1) *
           static_cast<double>(r) / static_cast<double>(n);
  }

  void validate() const {
    if (m1 < 1 || m2 < 1 || n < 1) throw std::invalid_argument("packing: bad dimensions");
    if (r < 1 || r > std::min(m1, m2)) throw std::invalid_argument("packing: bad rank");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("packing: gamma must be in (0,1]");
    if (m1 * r > 64) throw std::invalid_argument("packing: m1*r > 64 exceeds desk scale");
    if (kind == PackingCase::Gaussian) {
      if (!(sigma > 0.0) || !(a > 0.0)) throw std::invalid_argument("packing: bad sigma or a");
      if (amplitude() > a) throw std::invalid_argument("packing: amplitude exceeds entry bound a");
    } else {
      if (!(eta > 0.0)) throw std::invalid_argument("packing: bad eta");
      if (gamma > 0.5) throw std::invalid_argument("packing: bounded case needs gamma <= 1/2");
      if (amplitude() > eta / 2.0)
        throw std::invalid_argument("packing: bounded case needs amplitude <= eta/2");
    }
  }
};

struct PackingShortfall : std::runtime_error {
  PackingShortfall(std::size_t achieved_, std::size_t target_)
      : std::runtime_error("packing shortfall: reached " + std::to_string(achieved_) + " of " +
                           std::to_string(target_) + " matrices"),
        achieved(achieved_),
        target(target_) {}
  std::size_t achieved;
  std::size_t target;
};

struct PackingSet {
  PackingConfig config;
  std::vector<std::vector<std::uint8_t>> tiles;  // m1*r bits each, lexicographic order
  std::vector<Matrix> patterns;                  // 0/1 block expansions of the tiles
  double min_pairwise_frob_sq = 0.0;             // at config.amplitude()

  std::size_t cardinality() const { return patterns.size(); }

  std::vector<Matrix> matrices() const { return matrices_at(config.gamma); }
  std::vector<Matrix> matrices_at(double gamma) const {
    const double amp = config.amplitude_at(gamma);
    std::vector<Matrix> out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) out.push_back(amp * p);
    return out;
  }
};

namespace detail {

inline long hamming(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  long d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

inline Matrix expand_tile(const std::vector<std::uint8_t>& tile, Index m1, Index m2, Index r) {
  Matrix out = Matrix::Zero(m1, m2);
  const Index copies = m2 / r;
  for (Index c = 0; c < copies; ++c)
    for (Index i = 0; i < m1; ++i)
      for (Index j = 0; j < r; ++j)
        out(i, c * r + j) = tile[static_cast<std::size_t>(i * r + j)];
  return out;
}

}  // namespace detail

// Randomized greedy Varshamov-Gilbert selection: keeps binary tiles whose
// pairwise Hamming distance is at least m1 r / 8, always including the zero
// tile, until the cardinality target ceil(2^(r m1/8)) + 1 is met. Throws
// PackingShortfall when max_attempts draws are not enough.
inline PackingSet build_packing(const PackingConfig& cfg, std::uint64_t seed,
                                long max_attempts = 100000) {
  cfg.validate();
  const std::size_t bits = static_cast<std::size_t>(cfg.m1 * cfg.r);
  const long min_dist_num = cfg.m1 * cfg.r;  // distance threshold is m1 r / 8
  const std::size_t target =
      static_cast<std::size_t>(std::ceil(std::exp2(cfg.target_log2_card()))) + 1;

  std::vector<std::vector<std::uint8_t>> tiles;
  tiles.emplace_back(bits, std::uint8_t{0});
  Rng rng(seed);
  for (long attempt = 0; attempt < max_attempts && tiles.size() < target; ++attempt) {
    std::vector<std::uint8_t> cand(bits);
    for (auto& b : cand) b = rng.bernoulli(0.5) ? 1 : 0;
    bool ok = true;
    for (const auto& t : tiles) {
      if (8 * detail::hamming(cand, t) < min_dist_num) {
        ok = false;
        break;
      }
    }
    if (ok) tiles.push_back(std::move(cand));
  }
  if (tiles.size() < target) throw PackingShortfall(tiles.size(), target);
  std::sort(tiles.begin(), tiles.end());

  PackingSet set;
  set.config = cfg;
  set.tiles = std::move(tiles);
  set.patterns.reserve(set.tiles.size());
  for (const auto& t : set.tiles)
    set.patterns.push_back(detail::expand_tile(t, cfg.m1, cfg.m2, cfg.r));

  const double amp = cfg.amplitude();
  double min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.patterns.size(); ++i)
    for (std::size_t j = i + 1; j < set.patterns.size(); ++j)
      min_sq = std::min(min_sq, amp * amp * (set.patterns[i] - set.patterns[j]).squaredNorm());
  set.min_pairwise_frob_sq = min_sq;
  if (min_sq < cfg.separation_lower_bound())
    throw NumericalError("packing separation fell below the guaranteed bound");
  return set;
}

// K(P_0, P_A) = n/(2 sigma^2) ||A||^2_{L2(Pi)} for Gaussian noise.
inline double kl_gaussian(const Matrix& a, const Design& design, double sigma, Index n) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kl_gaussian: sigma must be positive");
  if (n < 1) throw std::invalid_argument("kl_gaussian: n must be >= 1");
  return static_cast<double>(n) / (2.0 * sigma * sigma) * l2_pi_norm_sq(a, design);
}

// Exact KL between the +-eta sign laws at A0 = 0 and A0 = A under uniform
// completion sampling, summed over all basis outcomes, together with the
// quadratic reference value n/(2 eta^2) ||A||^2_{L2(Pi_0)}. The exact KL is
// -(1/2) log(1 - 4 d^2) per cell with d = a(i,j)/(2 eta), which exceeds the
// quadratic value 2 d^2 by O(d^4) whenever A != 0; on the admissible range
// d <= 1/4 it stays within a factor 4/3 of it.
struct SignKl {
  double kl = 0.0;
  double quadratic_bound = 0.0;
  bool bound_holds = false;
};

inline SignKl kl_sign(const Matrix& a, double eta, Index n) {
  if (!(eta > 0.0)) throw std::invalid_argument("kl_sign: eta must be positive");
  if (n < 1) throw std::invalid_argument("kl_sign: n must be >= 1");
  if (a.cwiseAbs().maxCoeff() > eta / 2.0 + 1e-15)
    throw std::invalid_argument("kl_sign: needs max|a(i,j)| <= eta/2 so p stays in [1/4,3/4]");
  const double cells = static_cast<double>(a.rows()) * static_cast<double>(a.cols());
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      const double p = 0.5 + a(i, j) / (2.0 * eta);
      acc += 0.5 * std::log(0.5 / p) + 0.5 * std::log(0.5 / (1.0 - p));
    }
  }
  SignKl out;
  out.kl = static_cast<double>(n) * acc / cells;
  out.quadratic_bound =
      static_cast<double>(n) / (2.0 * eta * eta) * (a.squaredNorm() / cells);
  out.bound_holds = out.kl <= out.quadratic_bound + 1e-12;
  return out;
}

// Average KL condition (1/(Card-1)) sum_A K(P_0,P_A) <= alpha log(Card-1).
struct KlConditionReport {
  double gamma = 0.0;
  double avg_kl = 0.0;
  double threshold = 0.0;
  bool satisfied = false;
};

inline KlConditionReport kl_condition_at(const PackingSet& set, double gamma, double alpha) {
  const auto& cfg = set.config;
  KlConditionReport rep;
  rep.gamma = gamma;
  const double denom = static_cast<double>(set.cardinality()) - 1.0;
  rep.threshold = alpha * std::log(denom);
  double acc = 0.0;
  const Design usr = Design::usr(cfg.m1, cfg.m2);
  for (const Matrix& a : set.matrices_at(gamma)) {
    acc += cfg.kind == PackingCase::Gaussian ? kl_gaussian(a, usr, cfg.sigma, cfg.n)
                                             : kl_sign(a, cfg.eta, cfg.n).kl;
  }
  rep.avg_kl = acc / denom;
  rep.satisfied = rep.avg_kl <= rep.threshold;
  return rep;
}

// Largest gamma in (0, cap] whose average KL meets the alpha condition; the
// tiles stay fixed, only the amplitude rescales. KL grows monotonically with
// gamma, so bisection applies.
inline KlConditionReport max_gamma_for_kl(const PackingSet& set, double alpha) {
  const double cap = set.config.kind == PackingCase::Bounded ? 0.5 : 1.0;
  if (kl_condition_at(set, cap, alpha).satisfied) return kl_condition_at(set, cap, alpha);
  double lo = 0.0, hi = cap;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kl_condition_at(set, mid, alpha).satisfied ? lo : hi) = mid;
  }
  return kl_condition_at(set, lo, alpha);
}

// Dump: one matrix text file per element plus an index JSON (written by the
// CLI layer; see cli_app.hpp).
inline std::vector<std::string> write_packing_matrices(const std::filesystem::path& dir,
                                                       const PackingSet& set) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  const auto mats = set.matrices();
  for (std::size_t i = 0; i < mats.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "element_%03zu.txt", i);
    write_matrix_file((dir / name).string(), mats[i]);
    names.emplace_back(name);
  }
  return names;
}

}  // namespace nucomp
