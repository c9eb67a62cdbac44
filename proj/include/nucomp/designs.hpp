#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nucomp/matrix.hpp"
#include "nucomp/rng.hpp"
#include "nucomp/svd.hpp"

namespace nucomp {

// The four sampling designs. UsrCompletion draws i.i.d. uniform basis
// matrices e_i e_j^T with replacement; ColumnMask draws a uniformly chosen
// column filled with standard normals (so E(xx^T) = I); the full designs
// fill every entry i.i.d.; Fixed carries an explicit list X_1..X_n.
enum class DesignKind { UsrCompletion, ColumnMask, GaussianFull, RademacherFull, Fixed };

struct Design {
  DesignKind kind = DesignKind::UsrCompletion;
  Index m1 = 0;
  Index m2 = 0;
  std::vector<Matrix> fixed_xs;        // Fixed only
  std::optional<double> fixed_mu;      // Fixed only, user-supplied if known

  static Design usr(Index m1, Index m2) { return make(DesignKind::UsrCompletion, m1, m2); }
  static Design column_mask(Index m1, Index m2) { return make(DesignKind::ColumnMask, m1, m2); }
  static Design gaussian_full(Index m1, Index m2) { return make(DesignKind::GaussianFull, m1, m2); }
  static Design rademacher_full(Index m1, Index m2) { return make(DesignKind::RademacherFull, m1, m2); }

  static Design fixed(std::vector<Matrix> xs, std::optional<double> mu = std::nullopt) {
    if (xs.empty()) throw std::invalid_argument("fixed design needs at least one matrix");
    Design d;
    d.kind = DesignKind::Fixed;
    d.m1 = xs.front().rows();
    d.m2 = xs.front().cols();
    for (const auto& x : xs) {
      if (x.rows() != d.m1 || x.cols() != d.m2)
        throw std::invalid_argument("fixed design matrices must share one shape");
      require_finite(x, "fixed design matrix");
    }
    d.fixed_xs = std::move(xs);
    d.fixed_mu = mu;
    return d;
  }

  // Isometry factor mu with ||A||^2_{L2(Pi)} = ||A||_2^2 / mu^2.
  double mu() const {
    switch (kind) {
      case DesignKind::UsrCompletion:
        return std::sqrt(static_cast<double>(m1) * static_cast<double>(m2));
      case DesignKind::ColumnMask:
        return std::sqrt(static_cast<double>(m2));
      case DesignKind::GaussianFull:
      case DesignKind::RademacherFull:
        return 1.0;
      case DesignKind::Fixed:
        if (fixed_mu) return *fixed_mu;
        throw std::invalid_argument("fixed design carries no isometry factor");
    }
    throw std::logic_error("unreachable");
  }

 private:
  static Design make(DesignKind k, Index m1, Index m2) {
    if (m1 < 1 || m2 < 1) throw std::invalid_argument("design dimensions must be positive");
    Design d;
    d.kind = k;
    d.m1 = m1;
    d.m2 = m2;
    return d;
  }
};

// Noise laws for Y = <A0,X> + xi. Subexp draws sigma*sign(g)*|g|^(2/alpha)
// for standard normal g, so |xi|^alpha / sigma^alpha = g^2 has finite
// exponential moments E exp(c g^2) for c < 1/2. BoundedSign replaces the
// additive model: Y = +-eta with P(Y=eta|X) = 1/2 + <A0,X>/(2 eta).
enum class NoiseKind { Gaussian, Subexp, BoundedSign, None };

struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;
  double alpha = 2.0;
  double eta = 0.0;

  static NoiseModel gaussian(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian noise: sigma must be positive");
    NoiseModel n;
    n.kind = NoiseKind::Gaussian;
    n.sigma = sigma;
    return n;
  }
  static NoiseModel subexp(double sigma, double alpha) {
    if (!(sigma > 0.0)) throw std::invalid_argument("subexp noise: sigma must be positive");
    if (!(alpha >= 1.0)) throw std::invalid_argument("subexp noise: alpha must be >= 1");
    NoiseModel n;
    n.kind = NoiseKind::Subexp;
    n.sigma = sigma;
    n.alpha = alpha;
    return n;
  }
  static NoiseModel bounded_sign(double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("bounded_sign noise: eta must be positive");
    NoiseModel n;
    n.kind = NoiseKind::BoundedSign;
    n.eta = eta;
    return n;
  }
  static NoiseModel none() { return NoiseModel{}; }
};

struct UsrRecord {
  Index row = 0;
  Index col = 0;
  double y = 0.0;
  bool operator==(const UsrRecord&) const = default;
};

struct FullRecord {
  Matrix x;
  double y = 0.0;
};

// A design-tagged sample {(X_i, Y_i)}. Completion draws are stored as index
// pairs; every other design stores the realized X_i densely.
struct ObservationSet {
  Design design;
  std::vector<UsrRecord> usr_records;
  std::vector<FullRecord> full_records;

  Index n() const {
    return static_cast<Index>(design.kind == DesignKind::UsrCompletion ? usr_records.size()
                                                                       : full_records.size());
  }
};

// Rank-r ground truth with max |entry| = a exactly: A0 = U V^T from uniform
// [-1,1] factors, then rescaled. Regenerates on the measure-zero event that
// the numerical rank drops.
inline Matrix generate_ground_truth(Index m1, Index m2, Index r, double a, std::uint64_t seed) {
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("generate_ground_truth: bad dimensions");
  if (r < 1 || r > std::min(m1, m2))
    throw std::invalid_argument("generate_ground_truth: rank must be in [1, min(m1,m2)]");
  if (!(a > 0.0)) throw std::invalid_argument("generate_ground_truth: a must be positive");
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix u(m1, r), v(m2, r);
    for (Index i = 0; i < m1; ++i)
      for (Index j = 0; j < r; ++j) u(i, j) = rng.uniform(-1.0, 1.0);
    for (Index i = 0; i < m2; ++i)
      for (Index j = 0; j < r; ++j) v(i, j) = rng.uniform(-1.0, 1.0);
    Matrix a0 = u * v.transpose();
    const double peak = a0.cwiseAbs().maxCoeff();
    if (peak <= 0.0) continue;
    a0 *= a / peak;
    if (svd(a0).numerical_rank() == r) return a0;
  }
  throw NumericalError("generate_ground_truth: could not reach requested rank");
}

namespace detail {

inline double draw_noise(const NoiseModel& noise, Rng& rng) {
  switch (noise.kind) {
    case NoiseKind::Gaussian:
      return noise.sigma * rng.normal();
    case NoiseKind::Subexp: {
      const double g = rng.normal();
      return noise.sigma * (g < 0 ? -1.0 : 1.0) * std::pow(std::abs(g), 2.0 / noise.alpha);
    }
    case NoiseKind::None:
      return 0.0;
    case NoiseKind::BoundedSign:
      throw std::logic_error("bounded_sign is not additive noise");
  }
  throw std::logic_error("unreachable");
}

// Y | X for the statistical-learning law; requires |signal| <= eta so the
// success probability stays in [0,1].
inline double draw_sign_response(double signal, double eta, Rng& rng) {
  const double p = 0.5 + signal / (2.0 * eta);
  return rng.bernoulli(p) ? eta : -eta;
}

inline Matrix draw_design_matrix(const Design& d, Index i, Rng& rng) {
  switch (d.kind) {
    case DesignKind::ColumnMask: {
      Matrix x = Matrix::Zero(d.m1, d.m2);
      const Index j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(d.m2)));
      for (Index k = 0; k < d.m1; ++k) x(k, j) = rng.normal();
      return x;
    }
    case DesignKind::GaussianFull: {
      Matrix x(d.m1, d.m2);
      for (Index a = 0; a < d.m1; ++a)
        for (Index b = 0; b < d.m2; ++b) x(a, b) = rng.normal();
      return x;
    }
    case DesignKind::RademacherFull: {
      Matrix x(d.m1, d.m2);
      for (Index a = 0; a < d.m1; ++a)
        for (Index b = 0; b < d.m2; ++b) x(a, b) = rng.bernoulli(0.5) ? 1.0 : -1.0;
      return x;
    }
    case DesignKind::Fixed:
      return d.fixed_xs[static_cast<std::size_t>(i)];
    case DesignKind::UsrCompletion:
      throw std::logic_error("usr draws are index pairs");
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

// n i.i.d. draws of (X_i, Y_i); deterministic given seed.
inline ObservationSet sample_observations(const Matrix& a0, const Design& design,
                                          const NoiseModel& noise, Index n, std::uint64_t seed) {
  if (a0.rows() != design.m1 || a0.cols() != design.m2)
    throw std::invalid_argument("sample_observations: A0 shape does not match design");
  require_finite(a0, "sample_observations A0");
  if (n < 1) throw std::invalid_argument("sample_observations: n must be >= 1");
  if (design.kind == DesignKind::Fixed && n != static_cast<Index>(design.fixed_xs.size()))
    throw std::invalid_argument("sample_observations: fixed design carries exactly n matrices");
  if (noise.kind == NoiseKind::BoundedSign && a0.cwiseAbs().maxCoeff() > noise.eta)
    throw std::invalid_argument("sample_observations: bounded_sign requires max|a0| <= eta");

  ObservationSet obs;
  obs.design = design;
  Rng rng(seed);
  if (design.kind == DesignKind::UsrCompletion) {
    obs.usr_records.reserve(static_cast<std::size_t>(n));
    const auto cells = static_cast<std::uint64_t>(design.m1) * static_cast<std::uint64_t>(design.m2);
    for (Index i = 0; i < n; ++i) {
      const std::uint64_t cell = rng.uniform_index(cells);
      const Index row = static_cast<Index>(cell / static_cast<std::uint64_t>(design.m2));
      const Index col = static_cast<Index>(cell % static_cast<std::uint64_t>(design.m2));
      const double signal = a0(row, col);
      const double y = noise.kind == NoiseKind::BoundedSign
                           ? detail::draw_sign_response(signal, noise.eta, rng)
                           : signal + detail::draw_noise(noise, rng);
      obs.usr_records.push_back({row, col, y});
    }
  } else {
    obs.full_records.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      Matrix x = detail::draw_design_matrix(design, i, rng);
      const double signal = trace_inner(a0, x);
      double y;
      if (noise.kind == NoiseKind::BoundedSign) {
        if (std::abs(signal) > noise.eta)
          throw std::invalid_argument("sample_observations: |<A0,X>| > eta under bounded_sign");
        y = detail::draw_sign_response(signal, noise.eta, rng);
      } else {
        y = signal + detail::draw_noise(noise, rng);
      }
      obs.full_records.push_back({std::move(x), y});
    }
  }
  return obs;
}

// Exact population value of ||A||^2_{L2(Pi)} per design (closed form, not a
// Monte-Carlo estimate). Fixed designs use the empirical (1/n) sum.
inline double l2_pi_norm_sq(const Matrix& a, const Design& design) {
  if (a.rows() != design.m1 || a.cols() != design.m2)
    throw std::invalid_argument("l2_pi_norm_sq: shape mismatch");
  switch (design.kind) {
    case DesignKind::UsrCompletion:
      return a.squaredNorm() / (static_cast<double>(design.m1) * static_cast<double>(design.m2));
    case DesignKind::ColumnMask:
      return a.squaredNorm() / static_cast<double>(design.m2);
    case DesignKind::GaussianFull:
    case DesignKind::RademacherFull:
      return a.squaredNorm();
    case DesignKind::Fixed: {
      double acc = 0.0;
      for (const auto& x : design.fixed_xs) {
        const double ip = trace_inner(a, x);
        acc += ip * ip;
      }
      return acc / static_cast<double>(design.fixed_xs.size());
    }
  }
  throw std::logic_error("unreachable");
}

// Population prediction risk R(A) = ||A - A0||^2_{L2(Pi)} + noise_var.
inline double prediction_risk(const Matrix& a, const Matrix& a0, const Design& design,
                              double noise_var) {
  require_same_shape(a, a0);
  if (noise_var < 0.0) throw std::invalid_argument("prediction_risk: negative noise variance");
  return l2_pi_norm_sq(a - a0, design) + noise_var;
}

// Observation file format. Completion: "USR m1 m2 n" then n lines "i j y"
// (0-based indices). Other designs: "FULL m1 m2 n" then, per record, one
// matrix text block followed by a line holding y; reading a FULL file yields
// a fixed design carrying the realized matrices.
inline void write_observations(std::ostream& os, const ObservationSet& obs) {
  const auto& d = obs.design;
  if (d.kind == DesignKind::UsrCompletion) {
    os << "USR " << d.m1 << ' ' << d.m2 << ' ' << obs.n() << '\n';
    for (const auto& rec : obs.usr_records)
      os << rec.row << ' ' << rec.col << ' ' << format_double(rec.y) << '\n';
  } else {
    os << "FULL " << d.m1 << ' ' << d.m2 << ' ' << obs.n() << '\n';
    for (const auto& rec : obs.full_records) {
      write_matrix(os, rec.x);
      os << format_double(rec.y) << '\n';
    }
  }
}

inline void write_observations_file(const std::string& path, const ObservationSet& obs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_observations(os, obs);
}

inline ObservationSet read_observations(std::istream& is) {
  long line_no = 0;
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty observation file", 1);
  ++line_no;
  std::istringstream hdr(line);
  std::string tag;
  long m1 = 0, m2 = 0, n = 0;
  if (!(hdr >> tag >> m1 >> m2 >> n)) throw ParseError("bad observation header", line_no);
  std::string trailing;
  if (hdr >> trailing) throw ParseError("trailing tokens in observation header", line_no);
  if (m1 < 1 || m2 < 1) throw ParseError("bad dimensions in header", line_no);
  if (n < 1) throw ParseError("observation count must be >= 1", line_no);

  ObservationSet obs;
  if (tag == "USR") {
    obs.design = Design::usr(m1, m2);
    obs.usr_records.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
      if (!std::getline(is, line)) throw ParseError("unexpected end of records", line_no + 1);
      ++line_no;
      std::istringstream rec(line);
      long i = 0, j = 0;
      double y = 0.0;
      if (!(rec >> i >> j >> y)) throw ParseError("expected \"i j y\"", line_no);
      if (rec >> trailing) throw ParseError("trailing tokens in record", line_no);
      if (i < 0 || i >= m1 || j < 0 || j >= m2) throw ParseError("index out of range", line_no);
      if (!std::isfinite(y)) throw ParseError("non-finite response", line_no);
      obs.usr_records.push_back({i, j, y});
    }
  } else if (tag == "FULL") {
    std::vector<Matrix> xs;
    xs.reserve(static_cast<std::size_t>(n));
    obs.full_records.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
      Matrix x = read_matrix(is, line_no);
      if (x.rows() != m1 || x.cols() != m2)
        throw ParseError("record matrix shape disagrees with header", line_no);
      if (!std::getline(is, line)) throw ParseError("expected response line", line_no + 1);
      ++line_no;
      std::istringstream rec(line);
      double y = 0.0;
      if (!(rec >> y)) throw ParseError("expected response value", line_no);
      if (rec >> trailing) throw ParseError("trailing tokens after response", line_no);
      if (!std::isfinite(y)) throw ParseError("non-finite response", line_no);
      xs.push_back(x);
      obs.full_records.push_back({std::move(x), y});
    }
    obs.design = Design::fixed(std::move(xs));
  } else {
    throw ParseError("unknown observation tag \"" + tag + "\"", line_no);
  }
  return obs;
}

inline ObservationSet read_observations_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return read_observations(is);
}

}  // namespace nucomp
