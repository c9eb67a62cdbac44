#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nucomp/estimators.hpp"
#include "nucomp/experiment.hpp"
#include "nucomp/stochastic.hpp"

using namespace nucomp;

TEST_CASE("M vanishes on a noiseless uniform pass") {
  const Matrix a0 = generate_ground_truth(4, 5, 2, 1.0, 51);
  ObservationSet obs;
  obs.design = Design::usr(4, 5);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 5; ++j) obs.usr_records.push_back({i, j, a0(i, j)});
  CHECK(compute_M(obs, a0).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("M reduces to the noise average when A0 = 0") {
  const Matrix a0 = Matrix::Zero(3, 3);
  const auto obs = sample_observations(a0, Design::usr(3, 3), NoiseModel::gaussian(1.0), 50, 52);
  Matrix manual = Matrix::Zero(3, 3);
  for (const auto& rec : obs.usr_records) manual(rec.row, rec.col) += rec.y / 50.0;
  CHECK((compute_M(obs, a0) - manual).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("median ||M|| shrinks like 1/sqrt(n)") {
  const Index m = 8;
  std::vector<double> at_n, at_4n;
  for (long trial = 0; trial < 50; ++trial) {
    const std::uint64_t s = derive_seed(53, static_cast<std::uint64_t>(trial));
    const Matrix a0 = generate_ground_truth(m, m, 2, 1.0, s);
    const auto obs1 = sample_observations(a0, Design::usr(m, m), NoiseModel::gaussian(0.5), 400,
                                          derive_seed(s, 1));
    const auto obs2 = sample_observations(a0, Design::usr(m, m), NoiseModel::gaussian(0.5), 1600,
                                          derive_seed(s, 2));
    at_n.push_back(operator_norm(compute_M(obs1, a0)));
    at_4n.push_back(operator_norm(compute_M(obs2, a0)));
  }
  const double ratio = quantile(at_n, 0.5) / quantile(at_4n, 0.5);
  CHECK(ratio >= 1.6);
  CHECK(ratio <= 2.6);
}

TEST_CASE("bounded Bernstein bound evaluates its formula") {
  BernsteinInputs inp;
  inp.m1 = 50;
  inp.m2 = 50;
  inp.n = 10000;
  inp.t = 2.0;
  inp.sigma_z = 0.0;
  inp.u = 0.0;
  CHECK(bernstein_bound_bounded(inp) == 0.0);

  inp.sigma_z = 0.1;
  inp.u = 1.0;
  const double tl = (2.0 + std::log(100.0)) / 10000.0;
  CHECK(bernstein_bound_bounded(inp) ==
        Catch::Approx(2.0 * std::max(0.1 * std::sqrt(tl), 1.0 * tl)));
  // n huge: the sqrt branch dominates
  CHECK(bernstein_bound_bounded(inp) == Catch::Approx(2.0 * 0.1 * std::sqrt(tl)));

  inp.sigma_z = -1.0;
  CHECK_THROWS_AS(bernstein_bound_bounded(inp), std::invalid_argument);
}

TEST_CASE("psi-alpha Bernstein bound behaves as specified") {
  BernsteinInputs inp;
  inp.m1 = 50;
  inp.m2 = 50;
  inp.n = 1000;
  inp.t = 1.0;
  inp.sigma_z = 0.2;
  inp.u = 1.0;
  inp.alpha = 1.0;

  const double tl = (1.0 + std::log(100.0)) / 1000.0;
  const double expect =
      4.0 * std::max(0.2 * std::sqrt(tl), 1.0 * std::pow(std::log(1.0 / 0.2), 1.0) * tl);
  CHECK(bernstein_bound_psi_alpha(inp, 4.0) == Catch::Approx(expect));

  // larger t gives a strictly larger bound
  BernsteinInputs more = inp;
  more.t = 2.0;
  CHECK(bernstein_bound_psi_alpha(more, 4.0) > bernstein_bound_psi_alpha(inp, 4.0));

  // at u/sigma = e the log factor is exactly 1 for every alpha
  BernsteinInputs edge = inp;
  edge.sigma_z = 1.0;
  edge.u = std::exp(1.0);
  BernsteinInputs edge2 = edge;
  edge2.alpha = 2.0;
  const double second1 = edge.u * (edge.t + std::log(100.0)) / 1000.0;
  CHECK(bernstein_bound_psi_alpha(edge, 1.0) == Catch::Approx(std::max(
            edge.sigma_z * std::sqrt((edge.t + std::log(100.0)) / 1000.0), second1)));
  CHECK(bernstein_bound_psi_alpha(edge, 1.0) == bernstein_bound_psi_alpha(edge2, 1.0));

  edge.sigma_z = 0.0;
  CHECK_THROWS_AS(bernstein_bound_psi_alpha(edge, 4.0), std::invalid_argument);
}

TEST_CASE("bound formulas are monotone in t, u and sigma_z") {
  Rng rng(54);
  for (int rep = 0; rep < 100; ++rep) {
    BernsteinInputs inp;
    inp.m1 = 10 + static_cast<Index>(rng.uniform_index(50));
    inp.m2 = 10 + static_cast<Index>(rng.uniform_index(50));
    inp.n = 100 + static_cast<Index>(rng.uniform_index(10000));
    inp.t = rng.uniform(0.1, 5.0);
    inp.sigma_z = rng.uniform(0.01, 2.0);
    inp.u = inp.sigma_z * rng.uniform(1.0, 20.0);
    inp.alpha = rng.uniform(1.0, 3.0);

    BernsteinInputs bigger = inp;
    bigger.t = inp.t * 1.5;
    CHECK(bernstein_bound_bounded(bigger) >= bernstein_bound_bounded(inp));
    CHECK(bernstein_bound_psi_alpha(bigger, 4.0) >= bernstein_bound_psi_alpha(inp, 4.0));

    bigger = inp;
    bigger.u *= 1.5;
    CHECK(bernstein_bound_bounded(bigger) >= bernstein_bound_bounded(inp));
    CHECK(bernstein_bound_psi_alpha(bigger, 4.0) >= bernstein_bound_psi_alpha(inp, 4.0));

    bigger = inp;
    bigger.sigma_z *= 1.5;
    bigger.u = std::max(bigger.u, bigger.sigma_z);
    CHECK(bernstein_bound_bounded(bigger) >= bernstein_bound_bounded(inp));
  }
}

TEST_CASE("completion bounds: formulas, linearity in eta, Eq. (6.1) identities") {
  const double tl = 2.0 + std::log(20.0);
  const double expect =
      2.0 * std::max(std::sqrt(tl / (10.0 * 1000.0)), 2.0 * tl / 1000.0);
  CHECK(completion_m_bound_learning(1.0, 10, 10, 1000, 2.0) == Catch::Approx(expect));
  CHECK(completion_m_bound_learning(2.0, 10, 10, 1000, 2.0) == Catch::Approx(2.0 * expect));

  // E(X X^T) = I/m1 and E(X^T X) = I/m2 for the uniform completion basis,
  // so sigma_X^2 = 1/(m1^m2) and ||E X|| = 1/sqrt(m1 m2).
  const Index m1 = 4, m2 = 6;
  Matrix exxt = Matrix::Zero(m1, m1), extx = Matrix::Zero(m2, m2), ex = Matrix::Zero(m1, m2);
  for (Index i = 0; i < m1; ++i) {
    for (Index j = 0; j < m2; ++j) {
      Matrix x = Matrix::Zero(m1, m2);
      x(i, j) = 1.0;
      exxt += x * x.transpose() / (m1 * m2);
      extx += x.transpose() * x / (m1 * m2);
      ex += x / (m1 * m2);
    }
  }
  CHECK((exxt - Matrix::Identity(m1, m1) / m1).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((extx - Matrix::Identity(m2, m2) / m2).cwiseAbs().maxCoeff() <= 1e-15);
  const double sigma_x_sq = std::max(operator_norm(exxt), operator_norm(extx));
  CHECK(sigma_x_sq == Catch::Approx(1.0 / 4.0));
  CHECK(operator_norm(ex) == Catch::Approx(std::sqrt(1.0 / 24.0)));
}

TEST_CASE("|A0|_* norm and its entry bound") {
  Matrix ones = Matrix::Ones(2, 3);
  CHECK(a0_star_norm(ones) == Catch::Approx(std::sqrt(3.0)));
  Matrix e00 = Matrix::Zero(3, 3);
  e00(0, 0) = 1.0;
  CHECK(a0_star_norm(e00) == 1.0);

  Rng rng(55);
  for (int rep = 0; rep < 100; ++rep) {
    Matrix a(4, 7);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 7; ++j) a(i, j) = rng.uniform(-2.0, 2.0);
    CHECK(a0_star_norm(a) <= a.cwiseAbs().maxCoeff() * std::sqrt(7.0) + 1e-12);
  }
}

TEST_CASE("psi-alpha norm estimate matches the Gaussian closed form") {
  // For |Z| = sigma|g|, E exp(Z^2/u^2) = (1-2 sigma^2/u^2)^(-1/2) = 2 at
  // u = sigma sqrt(8/3).
  Rng rng(56);
  std::vector<double> samples(100000);
  const double sigma = 0.7;
  for (auto& z : samples) z = sigma * std::abs(rng.normal());
  const double est = psi_alpha_norm_mc(samples, 2.0);
  CHECK(est == Catch::Approx(sigma * std::sqrt(8.0 / 3.0)).epsilon(0.05));
}

TEST_CASE("degenerate noiseless zero truth has zero stochastic error") {
  const Matrix a0 = Matrix::Zero(5, 5);
  const auto obs = sample_observations(a0, Design::usr(5, 5), NoiseModel::none(), 200, 57);
  CHECK(operator_norm(compute_M(obs, a0)) == 0.0);
  CHECK(completion_m_bound_learning(1.0, 5, 5, 200, 2.0) > 0.0);
}

TEST_CASE("tail exceedance stays under the learning target and decreases in t") {
  TailScenario sc;
  sc.kind = TailScenarioKind::Learning;
  sc.m1 = 10;
  sc.m2 = 10;
  sc.r = 1;
  sc.a = 1.0;
  sc.eta = 1.0;
  sc.n = 500;

  const TailReport rep = tail_verify(sc, 200, 2.0, 58);
  CHECK(rep.trials == 200);
  CHECK(rep.target == Catch::Approx(std::exp(-2.0)));
  CHECK(rep.exceed_frac <= rep.target);

  const TailReport lo = tail_verify(sc, 150, 0.1, 59);
  const TailReport hi = tail_verify(sc, 150, 5.0, 59);
  CHECK(hi.exceed_count <= lo.exceed_count);

  CHECK_THROWS_AS(tail_verify(sc, 50, 2.0, 60), std::invalid_argument);
}

TEST_CASE("subexponential scenario stays under its 3e^-t target") {
  TailScenario sc;
  sc.kind = TailScenarioKind::GaussianSubexp;
  sc.m1 = 8;
  sc.m2 = 8;
  sc.r = 1;
  sc.a = 1.0;
  sc.sigma = 0.5;
  sc.alpha = 2.0;
  sc.n = 400;
  const TailReport rep = tail_verify(sc, 150, 2.0, 61);
  CHECK(rep.target == Catch::Approx(3.0 * std::exp(-2.0)));
  CHECK(rep.exceed_frac <= rep.target);
}

TEST_CASE("Lemma 1 bound dominates the oracle lambda on bounded runs") {
  // 2||M|| <= theory-bounded lambda in at least a 1-e^-t fraction of trials;
  // the two events coincide since lambda(t) doubles the Lemma 1 bound.
  const double t = 2.0;
  long ok = 0;
  const long trials = 200;
  for (long trial = 0; trial < trials; ++trial) {
    const std::uint64_t s = derive_seed(62, static_cast<std::uint64_t>(trial));
    const Matrix a0 = generate_ground_truth(8, 8, 2, 1.0, s);
    const auto obs = sample_observations(a0, Design::usr(8, 8), NoiseModel::bounded_sign(1.0),
                                         600, derive_seed(s, 1));
    const double lam = select_lambda(LambdaRule::theory_bounded(1.0, t), obs);
    if (2.0 * operator_norm(compute_M(obs, a0)) <= lam) ++ok;
  }
  const double frac = static_cast<double>(ok) / static_cast<double>(trials);
  CHECK(frac >= 1.0 - std::exp(-t));
}
