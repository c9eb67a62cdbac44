#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nucomp/nucomp.hpp"

namespace nucomp::cli {

// Exit code 3: a recorded inequality failed although its hypothesis held.
struct ViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Flags {
  Index m1 = 30, m2 = 30, rank = 1;
  double a = 1.0;
  Index n = 1000;
  std::string n_grid;
  double sigma = 0.5, alpha = 2.0, eta = 1.0;
  std::string noise = "gaussian";
  std::string lambda_rule = "oracle";
  double lambda = 0.0;
  double cstar = 4.0;
  double t = 0.0;
  double delta = 0.5;
  long trials = 20;
  std::uint64_t seed = 0;
  std::string out;
  std::string in;
  std::string a0_path;
  // lasso
  Index p = 16;
  std::string design_path, response_path, beta_star_path;
  // packing
  double gamma = 0.25;
  bool bounded = false;
  std::string scenario = "learning";
};

inline NoiseModel make_noise(const Flags& f) {
  if (f.noise == "gaussian") return NoiseModel::gaussian(f.sigma);
  if (f.noise == "subexp") return NoiseModel::subexp(f.sigma, f.alpha);
  if (f.noise == "bounded") return NoiseModel::bounded_sign(f.eta);
  if (f.noise == "none") return NoiseModel::none();
  throw std::invalid_argument("unknown --noise value: " + f.noise);
}

inline LambdaRule make_rule(const Flags& f) {
  if (f.lambda_rule == "oracle") return LambdaRule::oracle();
  if (f.lambda_rule == "theory-gaussian")
    return LambdaRule::theory_gaussian(std::max(f.sigma, f.a), f.t, f.cstar, f.alpha);
  if (f.lambda_rule == "theory-bounded") return LambdaRule::theory_bounded(f.eta, f.t);
  if (f.lambda_rule == "fixed") return LambdaRule::fixed(f.lambda);
  throw std::invalid_argument("unknown --lambda-rule value: " + f.lambda_rule);
}

inline TrialParams make_trial_params(const Flags& f) {
  TrialParams p;
  p.m1 = f.m1;
  p.m2 = f.m2;
  p.r = f.rank;
  p.a = f.a;
  p.n = f.n;
  p.noise = make_noise(f);
  p.rule = make_rule(f);
  p.bound_t = f.t > 0.0 ? f.t : 2.0;
  return p;
}

inline std::vector<Index> parse_n_grid(const std::string& grid) {
  std::vector<Index> ns;
  std::stringstream ss(grid);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const long v = std::stol(tok);
    if (v < 1) throw std::invalid_argument("--n-grid entries must be positive");
    ns.push_back(v);
  }
  if (ns.empty()) throw std::invalid_argument("--n-grid is empty");
  return ns;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open for writing: " + path);
  return os;
}

inline void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& recs) {
  auto os = open_out(path);
  os << experiment_csv_header() << '\n';
  for (const auto& r : recs) os << experiment_csv_row(r) << '\n';
}

inline void enforce_record_consistency(const std::vector<ExperimentRecord>& recs) {
  for (const auto& r : recs)
    if (!record_consistent(r))
      throw ViolationError("trial " + std::to_string(r.trial) +
                           ": fast-rate bound violated although lambda >= 2||M||");
}

// Design CSV: header "n p", then n rows of p comma- or space-separated values.
inline Matrix read_design_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty design file", 1);
  std::istringstream hdr(line);
  long n = 0, p = 0;
  if (!(hdr >> n >> p) || n < 1 || p < 1) throw ParseError("bad design header \"n p\"", 1);
  Matrix x(n, p);
  for (long i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw ParseError("unexpected end of design rows", i + 2);
    for (auto& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream row(line);
    for (long j = 0; j < p; ++j)
      if (!(row >> x(i, j))) throw ParseError("expected " + std::to_string(p) + " values", i + 2);
  }
  require_finite(x, "design CSV");
  return x;
}

inline Vector read_vector_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open for reading: " + path);
  std::vector<double> vals;
  double v;
  while (is >> v) vals.push_back(v);
  if (vals.empty()) throw std::invalid_argument("no values in " + path);
  Vector out(static_cast<Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out(static_cast<Index>(i)) = vals[i];
  return out;
}

inline int cmd_simulate(const Flags& f) {
  const TrialParams p = make_trial_params(f);
  std::vector<ExperimentRecord> recs;
  recs.reserve(static_cast<std::size_t>(f.trials));
  for (long trial = 0; trial < f.trials; ++trial)
    recs.push_back(run_completion_trial(p, f.seed, trial));
  write_records_csv(f.out, recs);
  std::cout << "wrote " << recs.size() << " rows to " << f.out << '\n';
  enforce_record_consistency(recs);
  return 0;
}

inline int cmd_rate_sweep(const Flags& f) {
  TrialParams p = make_trial_params(f);
  const auto ns = parse_n_grid(f.n_grid);
  std::vector<ExperimentRecord> recs;
  for (std::size_t gi = 0; gi < ns.size(); ++gi) {
    p.n = ns[gi];
    for (long trial = 0; trial < f.trials; ++trial) {
      // distinct trial indices per grid point keep the streams disjoint
      const long global = static_cast<long>(gi) * f.trials + trial;
      ExperimentRecord rec = run_completion_trial(p, f.seed, global);
      rec.trial = global;
      recs.push_back(std::move(rec));
    }
  }
  write_records_csv(f.out, recs);

  std::filesystem::path dat(f.out);
  dat.replace_extension(".dat");
  {
    auto os = open_out(dat.string());
    os << "# n median_error q25 q75 theory_bound\n";
    for (const Index n : ns) {
      std::vector<double> errs, bounds;
      for (const auto& r : recs)
        if (r.n == n) {
          errs.push_back(r.frob_err_sq_norm);
          bounds.push_back(r.oracle_rhs_fast);
        }
      os << n << ' ' << format_double(quantile(errs, 0.5)) << ' '
         << format_double(quantile(errs, 0.25)) << ' ' << format_double(quantile(errs, 0.75))
         << ' ' << format_double(quantile(bounds, 0.5)) << '\n';
    }
  }

  const RateFit fit = fit_rate(recs);
  std::cout << "slope " << format_double(fit.slope) << " intercept "
            << format_double(fit.intercept) << " r2 " << format_double(fit.r_squared) << '\n';
  enforce_record_consistency(recs);
  return 0;
}

inline int cmd_estimate(const Flags& f) {
  const ObservationSet obs = read_observations_file(f.in);
  std::optional<Matrix> a0;
  if (!f.a0_path.empty()) a0 = read_matrix_file(f.a0_path);
  const LambdaRule rule = make_rule(f);
  const double lambda = select_lambda(rule, obs, a0);
  const SolveResult res = solve_penalized(obs, lambda);
  write_matrix_file(f.out, res.estimate);

  nlohmann::json sidecar;
  sidecar["lambda"] = lambda;
  sidecar["rule"] = rule.name();
  sidecar["iterations"] = res.iterations;
  sidecar["objective"] = res.objective;
  sidecar["rank"] = svd(res.estimate).numerical_rank();
  auto os = open_out(f.out + ".json");
  os << sidecar.dump(2) << '\n';
  std::cout << "lambda " << format_double(lambda) << " rank " << sidecar["rank"] << '\n';
  return 0;
}

inline int cmd_rank_recovery(const Flags& f) {
  const TrialParams p = make_trial_params(f);
  const double m1m2 = static_cast<double>(f.m1) * static_cast<double>(f.m2);
  const double mu = std::sqrt(m1m2);

  std::vector<ExperimentRecord> recs;
  std::vector<nlohmann::json> verdicts;
  long recovered = 0, condition_met = 0;
  for (long trial = 0; trial < f.trials; ++trial) {
    const std::uint64_t seed = derive_seed(f.seed, static_cast<std::uint64_t>(trial));
    const Matrix a0 = generate_ground_truth(f.m1, f.m2, f.rank, f.a, derive_seed(seed, 0));
    const ObservationSet obs =
        sample_observations(a0, Design::usr(f.m1, f.m2), p.noise, f.n, derive_seed(seed, 1));
    const double base = select_lambda(p.rule, obs, a0);
    const RankRecoveryConfig cfg(f.delta, base);
    const RankTheoremVerdict v = check_rank_theorem(a0, obs, cfg);
    if (v.signal_condition_met) ++condition_met;
    if (v.r_hat == v.rank_true) ++recovered;

    ExperimentRecord rec;
    rec.trial = trial;
    rec.m1 = f.m1;
    rec.m2 = f.m2;
    rec.n = f.n;
    rec.rank_true = v.rank_true;
    rec.lambda = cfg.lambda_prime();
    rec.lambda_rule = p.rule.name();
    rec.frob_err_sq_norm = v.frob_err_sq / m1m2;
    rec.rank_hat = v.r_hat;
    rec.oracle_rhs_fast = oracle_rhs(a0, rec.lambda, mu, OracleVariant::fast());
    rec.oracle_rhs_slow = oracle_rhs(a0, rec.lambda, mu, OracleVariant::slow());
    rec.m_norm = v.m_norm;
    rec.bound_m = m_bound_for(p);
    rec.seed = seed;
    recs.push_back(std::move(rec));

    nlohmann::json j;
    j["trial"] = trial;
    j["seed"] = seed;
    j["hypothesis_held"] = v.hypothesis_held;
    j["upper_ok"] = v.upper_ok;
    j["signal_condition_met"] = v.signal_condition_met;
    j["lower_rank_ok"] = v.lower_rank_ok;
    j["frob_lower_ok"] = v.frob_lower_ok;
    j["r_hat"] = v.r_hat;
    j["rank_true"] = v.rank_true;
    verdicts.push_back(std::move(j));
  }
  write_records_csv(f.out, recs);
  {
    auto os = open_out(f.out + ".verdicts.jsonl");
    for (const auto& j : verdicts) os << j.dump() << '\n';
  }
  std::cout << "recovered " << recovered << "/" << f.trials << " signal_condition_met "
            << condition_met << "/" << f.trials << '\n';

  for (const auto& j : verdicts) {
    if (j["hypothesis_held"].get<bool>() && !j["upper_ok"].get<bool>())
      throw ViolationError("rank upper bound violated although lambda >= 2||M||");
    if (j["hypothesis_held"].get<bool>() && j["signal_condition_met"].get<bool>() &&
        (!j["lower_rank_ok"].get<bool>() || !j["frob_lower_ok"].get<bool>()))
      throw ViolationError("rank recovery guarantee violated although its hypotheses held");
  }
  return 0;
}

inline int cmd_bernstein(const Flags& f) {
  TailScenario sc;
  sc.m1 = f.m1;
  sc.m2 = f.m2;
  sc.r = f.rank;
  sc.a = f.a;
  sc.n = f.n;
  sc.eta = f.eta;
  sc.sigma = f.sigma;
  sc.alpha = f.alpha;
  if (f.scenario == "learning")
    sc.kind = TailScenarioKind::Learning;
  else if (f.scenario == "subexp")
    sc.kind = TailScenarioKind::GaussianSubexp;
  else
    throw std::invalid_argument("unknown --scenario value: " + f.scenario);

  const double t = f.t > 0.0 ? f.t : 2.0;
  const TailReport rep = tail_verify(sc, f.trials, t, f.seed);
  nlohmann::json j;
  j["scenario"] = rep.scenario;
  j["trials"] = rep.trials;
  j["t"] = rep.t;
  j["bound_kind"] = rep.bound_kind;
  j["exceed_count"] = rep.exceed_count;
  j["exceed_frac"] = rep.exceed_frac;
  j["target"] = rep.target;
  auto os = open_out(f.out);
  os << j.dump(2) << '\n';
  std::cout << "exceed " << rep.exceed_count << "/" << rep.trials << " target "
            << format_double(rep.target) << '\n';
  return 0;
}

inline int cmd_lasso(const Flags& f) {
  const Matrix x = read_design_csv(f.design_path);
  const auto design = LinearDesign::make(x, false);

  if (!f.response_path.empty()) {
    const Vector y = read_vector_file(f.response_path);
    if (!(f.lambda > 0.0)) throw std::invalid_argument("solve mode needs --lambda > 0");
    const Vector beta = lasso_solve(design, y, f.lambda);
    nlohmann::json j;
    j["lambda"] = f.lambda;
    j["kkt_residual"] = lasso_kkt_residual(design, y, beta, f.lambda);
    j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
    auto os = open_out(f.out);
    os << j.dump(2) << '\n';
    return 0;
  }

  if (f.beta_star_path.empty())
    throw std::invalid_argument("lasso needs --response (solve) or --beta-star (verify)");
  const Vector beta_star = read_vector_file(f.beta_star_path);
  const SharpOracleVerdict v = check_sharp_oracle(design, beta_star, f.sigma, f.trials, f.seed, f.a);
  nlohmann::json j;
  j["p"] = v.p;
  j["n"] = v.n;
  j["a"] = v.a;
  j["sigma"] = v.sigma;
  j["lambda"] = v.lambda;
  j["kappa_estimate"] = v.kappa_estimate;
  j["rhs"] = v.rhs;
  j["trials"] = v.trials;
  j["violations"] = v.violations;
  j["violation_frac"] = v.violation_frac;
  j["failure_prob_bound"] = v.failure_prob_bound;
  auto os = open_out(f.out);
  os << j.dump(2) << '\n';
  std::cout << "violations " << v.violations << "/" << v.trials << " bound "
            << format_double(v.failure_prob_bound) << '\n';
  return 0;
}

inline int cmd_packing(const Flags& f) {
  PackingConfig cfg;
  cfg.m1 = f.m1;
  cfg.m2 = f.m2;
  cfg.r = f.rank;
  cfg.gamma = f.gamma;
  cfg.n = f.n;
  cfg.kind = f.bounded ? PackingCase::Bounded : PackingCase::Gaussian;
  cfg.sigma = f.sigma;
  cfg.a = f.a;
  cfg.eta = f.eta;

  const PackingSet set = build_packing(cfg, f.seed);
  const std::filesystem::path dir(f.out);
  write_packing_matrices(dir, set);
  const KlConditionReport kl = max_gamma_for_kl(set, 1.0 / 16.0);

  nlohmann::json j;
  j["cardinality"] = set.cardinality();
  j["amplitude"] = cfg.amplitude();
  j["gamma"] = cfg.gamma;
  j["min_pairwise_frob_sq"] = set.min_pairwise_frob_sq;
  j["kl"] = {{"alpha", 1.0 / 16.0},
             {"gamma_max", kl.gamma},
             {"avg_kl", kl.avg_kl},
             {"threshold", kl.threshold},
             {"satisfied", kl.satisfied}};
  auto os = open_out((dir / "index.json").string());
  os << j.dump(2) << '\n';
  std::cout << "cardinality " << set.cardinality() << " kl_gamma_max " << format_double(kl.gamma)
            << '\n';
  return 0;
}

}  // namespace detail

// Entry point shared by the binary and the tests; args exclude argv[0].
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"nuclear-norm penalized trace regression experiments"};
  app.require_subcommand(1);

  detail::Flags f;
  const auto add_common = [&f](CLI::App* cmd) {
    cmd->add_option("--m1", f.m1, "rows of A0");
    cmd->add_option("--m2", f.m2, "columns of A0");
    cmd->add_option("--rank", f.rank, "rank of the generated ground truth");
    cmd->add_option("--a", f.a, "entry bound of the ground truth class");
    cmd->add_option("--n", f.n, "sample count");
    cmd->add_option("--sigma", f.sigma, "noise scale");
    cmd->add_option("--alpha", f.alpha, "sub-exponential tail exponent");
    cmd->add_option("--eta", f.eta, "response bound");
    cmd->add_option("--noise", f.noise, "gaussian|subexp|bounded|none");
    cmd->add_option("--lambda-rule", f.lambda_rule, "oracle|theory-gaussian|theory-bounded|fixed");
    cmd->add_option("--lambda", f.lambda, "fixed lambda value");
    cmd->add_option("--cstar", f.cstar, "C_* multiplier of the theory-gaussian rule");
    cmd->add_option("--t", f.t, "confidence parameter");
    cmd->add_option("--delta", f.delta, "rank recovery inflation, lambda' = lambda/(1-delta)");
    cmd->add_option("--trials", f.trials, "Monte-Carlo trials");
    cmd->add_option("--seed", f.seed, "master seed");
  };

  auto* sim = app.add_subcommand("simulate", "seeded Monte-Carlo completion trials");
  add_common(sim);
  sim->add_option("--out", f.out, "output CSV")->required();

  auto* sweep = app.add_subcommand("rate-sweep", "error-vs-n sweep with log-log rate fit");
  add_common(sweep);
  sweep->add_option("--n-grid", f.n_grid, "comma-separated sample counts")->required();
  sweep->add_option("--out", f.out, "output CSV (a .dat plot file is written alongside)")
      ->required();

  auto* est = app.add_subcommand("estimate", "estimate A0 from an observation file");
  add_common(est);
  est->add_option("--in", f.in, "observation file")->required();
  est->add_option("--a0", f.a0_path, "ground truth matrix (oracle rule only)");
  est->add_option("--out", f.out, "output matrix path (JSON sidecar at <out>.json)")->required();

  auto* rank = app.add_subcommand("rank-recovery", "rank recovery trials with verdicts");
  add_common(rank);
  rank->add_option("--out", f.out, "output CSV (verdicts at <out>.verdicts.jsonl)")->required();

  auto* bern = app.add_subcommand("bernstein", "Monte-Carlo tail coverage of the ||M|| bounds");
  add_common(bern);
  bern->add_option("--scenario", f.scenario, "learning|subexp");
  bern->add_option("--out", f.out, "coverage report JSON")->required();

  auto* lasso = app.add_subcommand("lasso", "lasso solve / sharp oracle verification");
  add_common(lasso);
  lasso->add_option("--design", f.design_path, "design CSV (header \"n p\")")->required();
  lasso->add_option("--response", f.response_path, "response vector file (solve mode)");
  lasso->add_option("--beta-star", f.beta_star_path, "true beta file (verify mode)");
  lasso->add_option("--out", f.out, "output JSON")->required();

  auto* pack = app.add_subcommand("packing", "Varshamov-Gilbert packing construction");
  add_common(pack);
  pack->add_option("--gamma", f.gamma, "amplitude factor in (0,1]");
  pack->add_flag("--bounded", f.bounded, "bounded (learning) case instead of Gaussian");
  pack->add_option("--out", f.out, "output directory")->required();

  std::vector<const char*> argv;
  argv.push_back("nucomp");
  for (const auto& s : args) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim->parsed()) return detail::cmd_simulate(f);
    if (sweep->parsed()) return detail::cmd_rate_sweep(f);
    if (est->parsed()) return detail::cmd_estimate(f);
    if (rank->parsed()) return detail::cmd_rank_recovery(f);
    if (bern->parsed()) return detail::cmd_bernstein(f);
    if (lasso->parsed()) return detail::cmd_lasso(f);
    if (pack->parsed()) return detail::cmd_packing(f);
  } catch (const ViolationError& e) {
    std::cerr << "violation: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace nucomp::cli
