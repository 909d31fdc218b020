#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "bcn/baselines.hpp"
#include "bcn/cubsolve.hpp"
#include "bcn/erm.hpp"
#include "bcn/harness.hpp"
#include "bcn/rbcn.hpp"

namespace {

using nlohmann::json;

bcn::Matrix matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return bcn::Matrix(0, 0);
  bcn::Matrix out(static_cast<int>(rows.size()),
                  static_cast<int>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw std::invalid_argument("matrix rows have unequal lengths");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
  }
  return out;
}

bcn::Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  bcn::Vector out(static_cast<int>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[static_cast<int>(i)] = values[i];
  }
  return out;
}

int cmd_solve_sub(const std::string& file) {
  std::ifstream in(file);
  if (!in) {
    std::cerr << "cannot open " << file << "\n";
    return 1;
  }
  json j;
  in >> j;
  bcn::CubicSubproblem sub;
  sub.Q = matrix_from_json(j.at("Q"));
  sub.b = vector_from_json(j.at("b"));
  sub.H = j.value("H", 0.0);
  if (j.contains("coupling")) {
    bcn::AffineCoupling coupling;
    coupling.B = matrix_from_json(j.at("coupling").at("B"));
    coupling.weights = vector_from_json(j.at("coupling").at("diag"));
    coupling.linear = vector_from_json(j.at("coupling").at("linear"));
    sub.coupling = std::move(coupling);
  }
  if (j.contains("bounds")) {
    sub.bounds = std::make_pair(vector_from_json(j.at("bounds").at("lower")),
                                vector_from_json(j.at("bounds").at("upper")));
  }
  const bcn::CubicSolution sol = bcn::solve(sub);
  std::cout.precision(17);
  std::cout << "y:";
  for (int i = 0; i < sol.y.size(); ++i) std::cout << ' ' << sol.y[i];
  std::cout << "\ntau: " << sol.tau << "\nmodel_value: " << sol.model_value
            << "\nkkt_residual: " << sol.kkt_residual
            << "\nroot_iterations: " << sol.root_iterations
            << "\ninner_iterations: " << sol.inner_iterations << "\n";
  return 0;
}

int cmd_gen(const std::string& kind, int n, int m, int d, std::uint64_t seed,
            const std::string& out_path) {
  if (kind == "poisson") {
    const bcn::Dataset ds = bcn::gen_synthetic_poisson(m, d, seed);
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot open " << out_path << "\n";
      return 1;
    }
    bcn::write_libsvm(ds, out);
    std::cout << "wrote " << ds.m() << "x" << ds.d() << " dataset to "
              << out_path << "\n";
    return 0;
  }
  if (kind == "cubic") {
    const bcn::CompositeProblem problem = bcn::gen_synthetic_cubic(n, seed);
    json j;
    j["n"] = n;
    j["seed"] = seed;
    std::vector<std::vector<double>> M(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      M[static_cast<std::size_t>(r)].assign(n, 0.0);
      for (int c = 0; c < n; ++c) {
        M[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
            problem.g.M(r, c);
      }
    }
    j["M"] = M;
    std::vector<double> q(static_cast<std::size_t>(n));
    std::vector<double> cubic(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      q[static_cast<std::size_t>(i)] = problem.g.q[i];
      cubic[static_cast<std::size_t>(i)] =
          *problem.phi[static_cast<std::size_t>(i)]->hess_lipschitz();
    }
    j["q"] = q;
    j["r"] = problem.g.r;
    j["cubic_constants"] = cubic;
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot open " << out_path << "\n";
      return 1;
    }
    out << j.dump(2) << "\n";
    std::cout << "wrote cubic instance (N=" << n << ") to " << out_path
              << "\n";
    return 0;
  }
  std::cerr << "unknown kind '" << kind << "' (poisson | cubic)\n";
  return 1;
}

int cmd_certify(int n, int tau, double eps, double rho, std::uint64_t seed,
                double ridge, long probe_iterations) {
  using namespace bcn;
  CompositeProblem problem = gen_synthetic_cubic(n, seed);
  if (ridge > 0.0) {
    Matrix M = problem.g.M;
    M.diagonal().array() += ridge;
    problem.g = SmoothTerm::quadratic(std::move(M), problem.g.q, problem.g.r);
  }

  // High-accuracy reference for F* and x*.
  RbcnConfig ref;
  ref.sampling = SamplingSpec::full(seed);
  ref.h_strategy = HStrategy::constant_blockwise();
  ref.max_iterations = 5000;
  ref.seed = seed;
  const RunTrace ref_trace = rbcn_run(problem, Vector::Zero(n), ref);

  // Probe run at the requested tau to measure the level-set radius.
  RbcnConfig probe;
  probe.sampling = SamplingSpec::tau_nice(tau, seed);
  probe.h_strategy = HStrategy::constant_blockwise();
  probe.max_iterations = probe_iterations;
  probe.seed = seed + 1;
  probe.record_every = 1;
  const RunTrace probe_trace = rbcn_run(problem, Vector::Zero(n), probe);

  Eigen::SelfAdjointEigenSolver<Matrix> esA(problem.g.A,
                                            Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> esG(problem.g.G,
                                            Eigen::EigenvaluesOnly);
  CertificateInputs inputs;
  inputs.L = esA.eigenvalues().maxCoeff();
  inputs.mu = std::max(esG.eigenvalues().minCoeff(), 0.0);
  inputs.h_max = problem.hess_lipschitz_max().value_or(0.0);
  inputs.beta = compute_beta(problem, probe.sampling);
  inputs.n = n;
  inputs.tau = tau;
  inputs.eps = eps;
  inputs.rho = rho;
  inputs.f0_minus_fstar =
      problem.objective(Vector::Zero(n)) - ref_trace.f_final;

  // D from the probe trace: largest distance of an iterate from x*.
  double D = 0.0;
  {
    Vector x = Vector::Zero(n);
    D = (x - ref_trace.x_final).norm();
    RbcnConfig replay = probe;  // rows hold objectives only; rerun to collect
    replay.record_every = 1;
    Rng rng = Rng(replay.sampling.seed).split(replay.seed);
    HState hstate{replay.h_strategy.h0, problem.hess_lipschitz_max()};
    for (long k = 0; k < std::min<long>(probe_trace.iterations, 2000); ++k) {
      const IndexSet S = draw(replay.sampling, problem.partition, rng);
      const StepResult step =
          rbcn_step(problem, x, S, replay.h_strategy, hstate);
      x = step.x_next;
      D = std::max(D, (x - ref_trace.x_final).norm());
    }
  }
  inputs.D = D;

  std::cout << "# instance: cubically regularized least squares, N=" << n
            << ", seed=" << seed << ", ridge=" << ridge << "\n"
            << "# reference F*: " << ref_trace.f_final << " ("
            << ref_trace.status << ")\n\n";
  for (int theorem : {1, 2, 3}) {
    std::cout << certificate_iterations(theorem, inputs).report() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block cubic Newton toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a config");
  std::string config_path;
  std::string output_dir;
  std::vector<int> taus;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  run->add_option("--config", config_path, "JSON experiment config")
      ->required();
  run->add_option("--output-dir", output_dir, "override output directory");
  run->add_option("--taus", taus, "override the tau list");
  run->add_option("--seed", seed_override, "override the run seed")
      ->each([&](const std::string&) { seed_set = true; });

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_kind = "poisson";
  int gen_n = 64, gen_m = 200, gen_d = 40;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "dataset.libsvm";
  gen->add_option("--kind", gen_kind, "poisson | cubic");
  gen->add_option("--n", gen_n, "cubic instance dimension");
  gen->add_option("--m", gen_m, "rows");
  gen->add_option("--d", gen_d, "columns");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output file")->required();

  // certify
  auto* certify =
      app.add_subcommand("certify", "print iteration-count certificates");
  int cert_n = 32, cert_tau = 4;
  double cert_eps = 1e-3, cert_rho = 0.1, cert_ridge = 0.0;
  std::uint64_t cert_seed = 1;
  long cert_probe = 2000;
  certify->add_option("--n", cert_n, "instance dimension");
  certify->add_option("--tau", cert_tau, "sampling size");
  certify->add_option("--eps", cert_eps, "target accuracy");
  certify->add_option("--rho", cert_rho, "confidence parameter");
  certify->add_option("--seed", cert_seed, "instance seed");
  certify->add_option("--ridge", cert_ridge,
                      "extra diagonal curvature (makes the instance strongly "
                      "convex)");
  certify->add_option("--probe-iterations", cert_probe,
                      "iterations of the radius-measuring probe run");

  // solve-sub
  auto* solve_sub =
      app.add_subcommand("solve-sub", "solve one cubic subproblem from JSON");
  std::string sub_file;
  solve_sub->add_option("--file", sub_file, "subproblem JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      bcn::ExperimentConfig cfg =
          bcn::ExperimentConfig::from_json_file(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (!taus.empty()) cfg.taus = taus;
      if (seed_set) cfg.seed = seed_override;
      std::vector<bcn::RunSummary> summaries;
      const int code = bcn::run_experiment(cfg, &summaries);
      for (const auto& s : summaries) {
        std::cout << s.method << " tau=" << s.tau << ": " << s.status
                  << " (metric " << s.final_metric << ")\n";
      }
      std::cout << "artifacts in " << cfg.output_dir << "\n";
      return code;
    }
    if (*gen) return cmd_gen(gen_kind, gen_n, gen_m, gen_d, gen_seed, gen_out);
    if (*certify) {
      return cmd_certify(cert_n, cert_tau, cert_eps, cert_rho, cert_seed,
                         cert_ridge, cert_probe);
    }
    if (*solve_sub) return cmd_solve_sub(sub_file);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
