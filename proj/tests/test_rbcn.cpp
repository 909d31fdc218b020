#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "bcn/harness.hpp"
#include "bcn/rbcn.hpp"
#include "bcn/rng.hpp"

using namespace bcn;

namespace {

Matrix random_psd(int d, Rng& rng, double eig_lo = 0.1, double eig_hi = 2.0) {
  Matrix basis(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) basis(i, j) = rng.normal();
  }
  const Matrix Q = Eigen::HouseholderQR<Matrix>(basis).householderQ();
  Vector eig(d);
  for (int i = 0; i < d; ++i) {
    eig[i] = eig_lo + (eig_hi - eig_lo) * rng.uniform01();
  }
  return Q * eig.asDiagonal() * Q.transpose();
}

CompositeProblem quadratic_problem(const Matrix& M, const Vector& q) {
  CompositeProblem problem;
  problem.partition = BlockPartition::uniform(static_cast<int>(q.size()));
  problem.g = SmoothTerm::quadratic(M, q);
  return problem;
}

// Small strongly convex instance with cubed-coordinate terms.
CompositeProblem small_cubic(int N, std::uint64_t seed, double ridge) {
  Rng rng(seed);
  Matrix M = random_psd(N, rng, 0.0, 1.0);
  M.diagonal().array() += ridge;
  Vector q(N);
  for (int i = 0; i < N; ++i) q[i] = 0.3 * rng.normal();
  CompositeProblem problem = quadratic_problem(M, q);
  problem.phi.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    problem.phi[static_cast<std::size_t>(i)] =
        BlockLoss::scalar(ScalarLoss::cubed_abs(0.5 * (1.0 + rng.uniform01())));
  }
  return problem;
}

}  // namespace

TEST_CASE("one full step with H = 0 solves a quadratic") {
  Rng rng(9);
  const int N = 6;
  const Matrix M = random_psd(N, rng, 0.3, 2.0);
  Vector q(N);
  for (int i = 0; i < N; ++i) q[i] = rng.normal();
  const CompositeProblem problem = quadratic_problem(M, q);

  HState state{1.0, problem.hess_lipschitz_max()};
  const StepResult step =
      rbcn_step(problem, Vector::Zero(N), IndexSet::all(N),
                HStrategy::constant_blockwise(), state);
  const Vector x_star = M.ldlt().solve(-q);
  CHECK((step.x_next - x_star).norm() <= 1e-8);
  CHECK(step.h_used == 0.0);
  CHECK(step.trials == 1);
}

TEST_CASE("empty sample is a no-op") {
  Rng rng(10);
  const CompositeProblem problem = small_cubic(4, 3, 0.2);
  HState state{1.0, problem.hess_lipschitz_max()};
  Vector x = Vector::Constant(4, 0.3);
  const StepResult step = rbcn_step(problem, x, IndexSet::empty(),
                                    HStrategy::constant_blockwise(), state);
  CHECK(step.no_op);
  CHECK((step.x_next - x).norm() == 0.0);
}

TEST_CASE("constant strategy accepts on the first trial") {
  Rng rng(11);
  const CompositeProblem problem = small_cubic(6, 5, 0.1);
  HState state{1.0, problem.hess_lipschitz_max()};
  Vector x = Vector::Constant(6, 0.5);
  Rng draw_rng(7);
  for (int k = 0; k < 20; ++k) {
    const IndexSet S =
        draw(SamplingSpec::tau_nice(2), problem.partition, draw_rng);
    const StepResult step =
        rbcn_step(problem, x, S, HStrategy::constant_blockwise(), state);
    CHECK(step.trials == 1);
    CHECK(step.f_next <= problem.objective(x) + 1e-12);
    x = step.x_next;
  }
}

TEST_CASE("adaptive search terminates within the doubling bound") {
  const CompositeProblem problem = small_cubic(6, 21, 0.1);
  const double h_max = problem.hess_lipschitz_max().value();
  HStrategy strategy = HStrategy::adaptive(1e-6);
  HState state{strategy.h0, problem.hess_lipschitz_max()};
  Vector x = Vector::Constant(6, 0.4);
  const StepResult step =
      rbcn_step(problem, x, IndexSet::all(6), strategy, state);
  const int bound =
      static_cast<int>(std::ceil(std::log2(2.0 * h_max / strategy.h0))) + 1;
  CHECK(step.trials <= bound);
  CHECK(step.h_used <= 2.0 * h_max + 1e-12);
  CHECK(step.f_next <= problem.objective(x));
}

TEST_CASE("runs are reproducible bit-for-bit from the seed") {
  const CompositeProblem problem = small_cubic(8, 33, 0.05);
  RbcnConfig config;
  config.sampling = SamplingSpec::tau_nice(3, 1234);
  config.h_strategy = HStrategy::constant_blockwise();
  config.max_iterations = 40;
  config.seed = 5;
  const RunTrace a = rbcn_run(problem, Vector::Zero(8), config);
  const RunTrace b = rbcn_run(problem, Vector::Zero(8), config);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].blocks == b.rows[i].blocks);
    CHECK(a.rows[i].objective == b.rows[i].objective);
    CHECK(a.rows[i].step_norm == b.rows[i].step_norm);
  }
  // different seed, different sampled sets somewhere
  RbcnConfig other = config;
  other.seed = 6;
  const RunTrace c = rbcn_run(problem, Vector::Zero(8), other);
  bool any_diff = false;
  for (std::size_t i = 1; i < std::min(a.rows.size(), c.rows.size()); ++i) {
    any_diff = any_diff || a.rows[i].blocks != c.rows[i].blocks;
  }
  CHECK(any_diff);
}

TEST_CASE("runs descend monotonically and stall detection fires") {
  const CompositeProblem problem = small_cubic(8, 77, 0.3);
  RbcnConfig config;
  config.sampling = SamplingSpec::tau_nice(2, 99);
  config.h_strategy = HStrategy::adaptive(1.0);
  config.max_iterations = 4000;
  config.seed = 3;
  const RunTrace trace = rbcn_run(problem, Vector::Zero(8), config);
  CHECK(trace.monotone);
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    CHECK(trace.rows[i].objective <=
          trace.rows[i - 1].objective + 1e-12);
  }
  CHECK(trace.status == "stalled");  // converged to the rounding floor
}

TEST_CASE("synthetic cubic run reaches a tight residual") {
  const CompositeProblem problem = gen_synthetic_cubic(16, 4);
  // full-sampling reference
  RbcnConfig ref;
  ref.sampling = SamplingSpec::full(1);
  ref.h_strategy = HStrategy::constant_blockwise();
  ref.max_iterations = 400;
  const double f_star = rbcn_run(problem, Vector::Zero(16), ref).f_final;

  RbcnConfig config;
  config.sampling = SamplingSpec::tau_nice(4, 11);
  config.h_strategy = HStrategy::constant_blockwise();
  config.max_iterations = 20000;
  config.target_accuracy = 1e-10;
  config.f_star_ref = f_star;
  const RunTrace trace = rbcn_run(problem, Vector::Zero(16), config);
  CHECK(trace.status == "target_reached");
  CHECK(trace.f_final - f_star <= 1e-10);
}

TEST_CASE("trace CSV format") {
  const CompositeProblem problem = small_cubic(4, 1, 0.2);
  RbcnConfig config;
  config.sampling = SamplingSpec::tau_nice(2, 5);
  config.h_strategy = HStrategy::constant_blockwise();
  config.max_iterations = 3;
  const RunTrace trace = rbcn_run(problem, Vector::Zero(4), config);
  std::ostringstream out;
  trace.write_csv(out);
  const std::string text = out.str();
  CHECK(text.rfind("k,objective,step_norm,H,sample_size,elapsed_ms\n", 0) ==
        0);
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        static_cast<long>(trace.rows.size()) + 1);
}

TEST_CASE("beta: closed-form cases") {
  {
    // full sampling with A = G != 0
    Rng rng(13);
    const Matrix M = random_psd(4, rng, 0.2, 1.5);
    const CompositeProblem problem = quadratic_problem(M, Vector::Zero(4));
    CHECK(compute_beta(problem, SamplingSpec::full()) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  {
    // G = 0 with A nonzero
    CompositeProblem problem;
    problem.partition = BlockPartition::uniform(3);
    problem.g = SmoothTerm::general(
        [](const Vector&) { return 0.0; },
        [](const Vector& x) { return Vector(Vector::Zero(x.size())); },
        Matrix::Zero(3, 3), Matrix::Identity(3, 3));
    CHECK(compute_beta(problem, SamplingSpec::tau_nice(1)) == 0.0);
  }
  {
    // identity curvature, singleton sampling over two blocks
    const CompositeProblem problem =
        quadratic_problem(Matrix::Identity(2, 2), Vector::Zero(2));
    CHECK(compute_beta(problem, SamplingSpec::tau_nice(1)) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  {
    // A = 0: every beta works
    const CompositeProblem problem =
        quadratic_problem(Matrix::Zero(3, 3), Vector::Zero(3));
    CHECK(std::isinf(compute_beta(problem, SamplingSpec::tau_nice(2))));
  }
}

TEST_CASE("beta dominates mu over L") {
  Rng rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + static_cast<int>(rng.below(4));
    const Matrix M = random_psd(n, rng, 0.05, 3.0);
    const CompositeProblem problem = quadratic_problem(M, Vector::Zero(n));
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    const double mu = es.eigenvalues().minCoeff();
    const double L = es.eigenvalues().maxCoeff();
    const int tau = 1 + static_cast<int>(rng.below(n));
    const double beta = compute_beta(problem, SamplingSpec::tau_nice(tau));
    CHECK(beta >= mu / L - 1e-10);
    // feasibility of the computed beta, up to a tiny slack
    const Matrix E = expected_submatrix(M, SamplingSpec::tau_nice(tau),
                                        problem.partition);
    const Matrix gap = (double(tau) / n) * M - beta * E;
    Eigen::SelfAdjointEigenSolver<Matrix> gap_es(gap, Eigen::EigenvaluesOnly);
    CHECK(gap_es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("certificates: plug-in values") {
  CertificateInputs inputs;
  inputs.L = 0.0;
  inputs.mu = 0.0;
  inputs.h_max = 0.0;
  inputs.D = 1.0;
  inputs.beta = 1.0;
  inputs.n = 4.0;
  inputs.tau = 4.0;
  inputs.eps = 0.5;
  inputs.rho = std::exp(-1.0);
  inputs.f0_minus_fstar = 0.5;
  const RateCertificate t1 = certificate_iterations(1, inputs);
  CHECK(t1.iterations == 4);

  // theorem 3 with zero cubic constant: the max term is one
  CertificateInputs sc = inputs;
  sc.mu = 0.5;
  sc.eps = 1e-3;
  sc.rho = 0.1;
  const RateCertificate t3 = certificate_iterations(3, sc);
  CHECK(t3.k_real ==
        doctest::Approx(1.5 * std::log(sc.f0_minus_fstar / (sc.eps * sc.rho)))
            .epsilon(1e-12));

  // doubling n / tau doubles every bound
  for (int theorem : {1, 2, 3}) {
    CertificateInputs a = inputs;
    a.mu = 0.5;
    a.beta = 0.5;
    a.h_max = 1.0;
    CertificateInputs b = a;
    b.n *= 2.0;
    CHECK(certificate_iterations(theorem, b).k_real ==
          doctest::Approx(2.0 * certificate_iterations(theorem, a).k_real)
              .epsilon(1e-12));
  }

  // inapplicable regimes
  CertificateInputs flat = inputs;
  flat.beta = 0.0;
  CHECK(!certificate_iterations(2, flat).applicable);
  CHECK(!certificate_iterations(3, flat).applicable);
  CHECK(certificate_iterations(3, sc).report().find("iterations:") !=
        std::string::npos);
}
