#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nucomp/estimators.hpp"
#include "nucomp/experiment.hpp"

using namespace nucomp;

namespace {

// One observation per cell with the exact entry value.
ObservationSet full_noiseless_pass(const Matrix& a0) {
  ObservationSet obs;
  obs.design = Design::usr(a0.rows(), a0.cols());
  for (Index i = 0; i < a0.rows(); ++i)
    for (Index j = 0; j < a0.cols(); ++j) obs.usr_records.push_back({i, j, a0(i, j)});
  return obs;
}

}  // namespace

TEST_CASE("X matrix accumulates and scales single records") {
  ObservationSet obs;
  obs.design = Design::usr(2, 2);
  obs.usr_records.push_back({0, 0, 1.5});
  Matrix x = build_X_matrix(obs);
  CHECK(x(0, 0) == Catch::Approx(4.0 * 1.5));
  CHECK(x(0, 1) == 0.0);
  CHECK(x(1, 1) == 0.0);

  obs.usr_records.push_back({0, 0, 2.5});
  x = build_X_matrix(obs);
  CHECK(x(0, 0) == Catch::Approx(4.0 / 2.0 * (1.5 + 2.5)));
}

TEST_CASE("X matrix of one noiseless full pass is A0") {
  const Matrix a0 = generate_ground_truth(4, 5, 2, 1.0, 31);
  const Matrix x = build_X_matrix(full_noiseless_pass(a0));
  CHECK((x - a0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("build_X_matrix rejects non-completion designs") {
  ObservationSet obs;
  obs.design = Design::gaussian_full(2, 2);
  obs.full_records.push_back({Matrix::Identity(2, 2), 1.0});
  CHECK_THROWS_AS(build_X_matrix(obs), std::invalid_argument);
}

TEST_CASE("estimator limits in lambda") {
  const Matrix a0 = generate_ground_truth(5, 5, 2, 1.0, 32);
  const auto obs = sample_observations(a0, Design::usr(5, 5), NoiseModel::gaussian(0.3), 80, 33);
  const Matrix x = build_X_matrix(obs);
  const double m1m2 = 25.0;

  const double lam_kill = 2.0 * operator_norm(x) / m1m2;
  CHECK(estimate_completion(obs, lam_kill).norm() == 0.0);
  CHECK(estimate_completion(obs, lam_kill * 1.01).norm() == 0.0);

  const Matrix near_x = estimate_completion(obs, 1e-12);
  CHECK((near_x - x).norm() <= 1e-10 * (1.0 + x.norm()));
}

TEST_CASE("closed form equals the proximal solver across three decades of lambda") {
  Rng seeds(34);
  for (int rep = 0; rep < 12; ++rep) {
    const Index m1 = 5 + static_cast<Index>(seeds.uniform_index(12));
    const Index m2 = 5 + static_cast<Index>(seeds.uniform_index(12));
    const Index r = 1 + static_cast<Index>(seeds.uniform_index(2));
    const Matrix a0 = generate_ground_truth(m1, m2, r, 1.0, seeds.next_u64());
    const Index n = 20 + static_cast<Index>(seeds.uniform_index(180));
    const auto obs =
        sample_observations(a0, Design::usr(m1, m2), NoiseModel::gaussian(0.5), n, seeds.next_u64());
    const double lam_scale = 2.0 * operator_norm(compute_M(obs, a0));
    const double lam = lam_scale * std::pow(10.0, seeds.uniform(-2.0, 1.0));

    const Matrix closed = estimate_completion(obs, lam);
    const SolveResult iter = solve_penalized(obs, lam);
    CHECK((closed - iter.estimate).norm() <= 1e-6 * (1.0 + closed.norm()));
  }
}

TEST_CASE("solver objective is monotone and huge lambda yields zero") {
  const Matrix a0 = generate_ground_truth(6, 6, 2, 1.0, 35);
  const auto obs = sample_observations(a0, Design::usr(6, 6), NoiseModel::gaussian(0.4), 100, 36);
  const SolveResult res = solve_penalized(obs, 0.01);
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] <=
          res.objective_trace[i - 1] + 1e-12 * (1.0 + std::abs(res.objective_trace[i - 1])));

  const double lam_huge = 10.0 * operator_norm(build_X_matrix(obs)) / 36.0;
  CHECK(solve_penalized(obs, lam_huge).estimate.norm() == 0.0);
}

TEST_CASE("solver handles full and column-mask designs") {
  const Matrix a0 = generate_ground_truth(4, 4, 1, 1.0, 37);
  for (const Design& d : {Design::gaussian_full(4, 4), Design::column_mask(4, 4)}) {
    const auto obs = sample_observations(a0, d, NoiseModel::gaussian(0.2), 60, 38);
    const SolveResult res = solve_penalized(obs, 0.05);
    CHECK(res.estimate.allFinite());
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
      CHECK(res.objective_trace[i] <=
            res.objective_trace[i - 1] + 1e-10 * (1.0 + std::abs(res.objective_trace[i - 1])));
  }
}

TEST_CASE("lambda rules evaluate their closed forms") {
  const Matrix a0 = generate_ground_truth(100, 100, 1, 1.0, 39);
  const auto obs =
      sample_observations(a0, Design::usr(100, 100), NoiseModel::bounded_sign(1.0), 10000, 40);

  // bounded rule at t = 0 with eta = 1: 4 max{sqrt(log(200)/(100*1e4)), 2 log(200)/1e4}
  const double tl = std::log(200.0);
  const double expect =
      4.0 * std::max(std::sqrt(tl / (100.0 * 10000.0)), 2.0 * tl / 10000.0);
  CHECK(select_lambda(LambdaRule::theory_bounded(1.0, 0.0), obs) == Catch::Approx(expect));
  CHECK(expect == Catch::Approx(4.0 * std::sqrt(std::log(200.0) / (100.0 * 10000.0))));

  const double tg = select_lambda(LambdaRule::theory_gaussian(2.0, 1.0, 4.0, 2.0), obs);
  const double tl1 = 1.0 + std::log(200.0);
  CHECK(tg == Catch::Approx(4.0 * 2.0 *
                            std::max(std::sqrt(tl1 / (100.0 * 10000.0)),
                                     tl1 * std::sqrt(std::log(100.0)) / 10000.0)));

  CHECK(select_lambda(LambdaRule::fixed(0.125), obs) == 0.125);
  CHECK_THROWS_AS(select_lambda(LambdaRule::oracle(), obs), std::invalid_argument);
}

TEST_CASE("oracle lambda is twice the exact stochastic error norm") {
  const Matrix a0 = generate_ground_truth(6, 6, 2, 1.0, 41);
  const auto obs = sample_observations(a0, Design::usr(6, 6), NoiseModel::none(), 120, 42);
  const Matrix m = response_weighted_sum(obs) - a0 / 36.0;
  CHECK(select_lambda(LambdaRule::oracle(), obs, a0) ==
        Catch::Approx(2.0 * operator_norm(m)).epsilon(1e-12));
}

TEST_CASE("oracle inequality right-hand sides") {
  const Matrix zero = Matrix::Zero(4, 4);
  CHECK(oracle_rhs(zero, 0.1, 4.0, OracleVariant::slow()) == 0.0);
  CHECK(oracle_rhs(zero, 0.1, 4.0, OracleVariant::fast()) == 0.0);
  CHECK(oracle_rhs(zero, 0.1, 4.0, OracleVariant::schatten(2.0)) == 0.0);

  const double k2 = std::pow((1.0 + std::sqrt(2.0)) / 2.0, 2);
  CHECK(kFastRateConstant * kFastRateConstant == Catch::Approx(k2).epsilon(1e-15));
  CHECK(k2 == Catch::Approx(1.4571067811865475));

  const Matrix a0 = generate_ground_truth(5, 5, 2, 1.0, 43);
  const double lam = 0.02, mu = 5.0;
  CHECK(oracle_rhs(a0, lam, mu, OracleVariant::fast()) ==
        Catch::Approx(k2 * mu * mu * lam * lam * 2.0));
  CHECK(oracle_rhs(a0, lam, mu, OracleVariant::slow()) ==
        Catch::Approx(2.0 * lam * nuclear_norm(a0)));

  // schatten variant: min{tau^2, sigma_j^2/mu^2} summed; equals the fast
  // bound when every sigma_j^2/mu^2 is above tau^2.
  const Matrix big = 1e6 * a0;
  CHECK(oracle_rhs(big, lam, mu, OracleVariant::schatten(1.0)) ==
        Catch::Approx(oracle_rhs(big, lam, mu, OracleVariant::fast())));
  CHECK(oracle_rhs(a0, lam, mu, OracleVariant::schatten(2.0)) <=
        oracle_rhs(a0, lam, mu, OracleVariant::fast()) + 1e-15);
  CHECK_THROWS_AS(oracle_rhs(a0, lam, mu, OracleVariant::schatten(2.5)), std::invalid_argument);
}

TEST_CASE("slow-rate bound over truncations never exceeds the A0 candidate") {
  const Matrix a0 = generate_ground_truth(6, 4, 3, 1.0, 44);
  const double lam = 0.05, mu = std::sqrt(24.0);
  const double at_a0 = oracle_rhs(a0, lam, mu, OracleVariant::slow());
  CHECK(slow_rate_bound_over_truncations(a0, lam, mu) <= at_a0 + 1e-12);
  // zero candidate: ||A0||_2^2/mu^2
  CHECK(slow_rate_bound_over_truncations(a0, lam, mu) <=
        a0.squaredNorm() / (mu * mu) + 1e-12);
}

TEST_CASE("first-order optimality accepts the closed form and rejects perturbations") {
  const Matrix a0 = generate_ground_truth(6, 6, 2, 1.0, 45);
  const auto obs = sample_observations(a0, Design::usr(6, 6), NoiseModel::gaussian(0.3), 90, 46);
  const double lam = select_lambda(LambdaRule::oracle(), obs, a0);
  const Matrix a_hat = estimate_completion(obs, lam);

  const auto ok = check_optimality(a_hat, obs, lam, 1e-8);
  CHECK(ok.passed);
  CHECK(ok.subgrad_max_abs <= 1e-8);

  Rng rng(47);
  Matrix delta(6, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) delta(i, j) = 1e-2 * rng.normal();
  const auto bad = check_optimality(a_hat + delta, obs, lam, 1e-8);
  CHECK_FALSE(bad.passed);
}

TEST_CASE("zero is optimal exactly when lambda clears the top singular value") {
  const Matrix a0 = generate_ground_truth(5, 5, 1, 1.0, 48);
  const auto obs = sample_observations(a0, Design::usr(5, 5), NoiseModel::gaussian(0.2), 60, 49);
  const Matrix x = build_X_matrix(obs);
  const double lam_edge = 2.0 * operator_norm(x) / 25.0;

  const Matrix zero = Matrix::Zero(5, 5);
  CHECK(check_optimality(zero, obs, lam_edge * 1.05, 1e-8).passed);
  CHECK_FALSE(check_optimality(zero, obs, lam_edge * 0.8, 1e-8).passed);
}

TEST_CASE("deterministic oracle inequality on seeded trials") {
  // Small-scale version of the acceptance criterion: with lambda = 2||M||
  // both oracle bounds hold on every trial.
  for (long trial = 0; trial < 30; ++trial) {
    TrialParams p;
    p.m1 = 10;
    p.m2 = 10;
    p.r = 1 + trial % 3;
    p.n = 400;
    p.noise = NoiseModel::gaussian(0.5);
    p.rule = LambdaRule::oracle();
    const ExperimentRecord rec = run_completion_trial(p, 1000, trial);
    REQUIRE(rec.lambda >= 2.0 * rec.m_norm - 1e-15);
    CHECK(rec.frob_err_sq_norm <= rec.oracle_rhs_fast * (1.0 + 1e-12));

    const double slow_grid =
        slow_rate_bound_over_truncations(generate_ground_truth(p.m1, p.m2, p.r, p.a,
                                                               derive_seed(rec.seed, 0)),
                                         rec.lambda, std::sqrt(100.0));
    CHECK(rec.frob_err_sq_norm <= slow_grid * (1.0 + 1e-12));
  }
}
