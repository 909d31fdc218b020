#include "bcn/rbcn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bcn/rng.hpp"

namespace bcn {

namespace {

constexpr double kTinyStep = 1e-15;

double now_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

// Deterministic decimal formatting for reproducible CSV bytes.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CubicSubproblem subproblem_from(const CubicModelData& model) {
  CubicSubproblem sub;
  sub.Q = model.quad;
  sub.b = model.grad;
  sub.H = model.h_coeff;
  if (model.bounded) sub.bounds = std::make_pair(model.lower, model.upper);
  return sub;
}

}  // namespace

void RunTrace::write_csv(std::ostream& out) const {
  out << "k,objective,step_norm,H,sample_size,elapsed_ms\n";
  for (const TraceRow& row : rows) {
    out << row.k << ',' << fmt(row.objective) << ',' << fmt(row.step_norm)
        << ',' << fmt(row.h) << ',' << row.sample_size << ','
        << fmt(row.elapsed_ms) << '\n';
  }
}

void RunTrace::write_csv_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file " + path);
  write_csv(out);
}

StepResult rbcn_step(const CompositeProblem& problem, const Vector& x,
                     const IndexSet& S, const HStrategy& strategy,
                     HState& state) {
  StepResult result;
  result.x_next = x;
  result.f_next = problem.objective(x);
  result.model_min = result.f_next;
  if (S.size() == 0) {
    result.no_op = true;
    return result;
  }

  const auto h_sel = problem.hess_lipschitz_max(S);
  double h_trial = 0.0;
  bool adaptive = false;
  switch (strategy.kind) {
    case HStrategy::Kind::constant_blockwise:
      if (!h_sel) {
        throw std::invalid_argument(
            "rbcn_step: constant strategy needs finite block constants");
      }
      h_trial = *h_sel;
      break;
    case HStrategy::Kind::constant_global:
      if (strategy.h_override) {
        h_trial = *strategy.h_override;
      } else if (state.h_max) {
        h_trial = *state.h_max;
      } else {
        throw std::invalid_argument(
            "rbcn_step: constant strategy needs finite block constants");
      }
      break;
    case HStrategy::Kind::adaptive:
      adaptive = true;
      h_trial = std::max(state.warm, strategy.h_min);
      if (state.h_max && *state.h_max > 0.0) {
        h_trial = std::min(h_trial, 2.0 * *state.h_max);
      }
      break;
  }
  // With all block constants zero the cubic term vanishes and the quadratic
  // model is already a global upper bound.
  if (state.h_max && *state.h_max == 0.0) {
    adaptive = false;
    h_trial = 0.0;
  }

  const double f0 = result.f_next;
  const double slack = 1e-12 * (1.0 + std::abs(f0));
  for (int trial = 1;; ++trial) {
    result.trials = trial;
    const CubicModelData model = build_model(problem, x, S, h_trial);
    const CubicSolution sol = solve(subproblem_from(model));
    const double step_norm = sol.y.norm();
    if (step_norm <= kTinyStep) {
      result.no_op = true;
      result.h_used = h_trial;
      return result;
    }
    const Vector x_try = x + scatter(sol.y, S, problem.partition);
    const double f_try = problem.objective(x_try);
    const double model_min = model.f_anchor + sol.model_value;
    if (f_try <= model_min + slack) {
      if (f_try > f0) {
        // Model decrease below rounding; keep the current point.
        result.no_op = true;
        result.h_used = h_trial;
        return result;
      }
      result.x_next = x_try;
      result.f_next = f_try;
      result.h_used = h_trial;
      result.model_min = model_min;
      result.step_norm = step_norm;
      if (adaptive) {
        state.warm = trial == 1 ? std::max(0.5 * h_trial, strategy.h_min)
                                : h_trial;
      }
      return result;
    }
    if (!adaptive) {
      // A constant choice at or above the block constants satisfies the
      // descent condition in exact arithmetic; treat the rounding edge as a
      // no-op rather than looping.
      if (f_try <= f0) {
        result.x_next = x_try;
        result.f_next = f_try;
        result.h_used = h_trial;
        result.model_min = model_min;
        result.step_norm = step_norm;
      } else {
        result.no_op = true;
        result.h_used = h_trial;
      }
      return result;
    }
    if (trial >= strategy.failure_budget) {
      std::ostringstream msg;
      msg << "rbcn_step: adaptive search exhausted its budget of "
          << strategy.failure_budget << " trials (last H = " << h_trial << ")";
      throw numerical_error(msg.str());
    }
    double h_next = 2.0 * h_trial;
    if (state.h_max && *state.h_max > 0.0) {
      h_next = std::min(h_next, 2.0 * *state.h_max);
    }
    if (h_next == h_trial) {
      // Already at the cap; accept the monotone edge or bail out as no-op.
      if (f_try <= f0) {
        result.x_next = x_try;
        result.f_next = f_try;
        result.h_used = h_trial;
        result.model_min = model_min;
        result.step_norm = step_norm;
      } else {
        result.no_op = true;
        result.h_used = h_trial;
      }
      return result;
    }
    h_trial = h_next;
    state.warm = h_trial;
  }
}

RunTrace rbcn_run(const CompositeProblem& problem, const Vector& x0,
                  const RbcnConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunTrace trace;
  if (!problem.feasible(x0)) {
    throw std::invalid_argument("rbcn_run: infeasible starting point");
  }
  const int n = problem.partition.num_blocks();
  config.sampling.validate(n);
  const int tau = config.sampling.effective_tau(n);

  Vector x = x0;
  double f = problem.objective(x);
  HState hstate{config.h_strategy.h0, problem.hess_lipschitz_max()};
  Rng rng = Rng(config.sampling.seed).split(config.seed);

  trace.rows.push_back(TraceRow{0, f, 0.0, 0.0, 0, 0.0, now_ms(start), {}});

  const long stall_window = (n + tau - 1) / tau;
  long stall_count = 0;
  trace.status = "max_iterations";
  for (long k = 1; k <= config.max_iterations; ++k) {
    const IndexSet S = draw(config.sampling, problem.partition, rng);
    StepResult step;
    try {
      step = rbcn_step(problem, x, S, config.h_strategy, hstate);
    } catch (const numerical_error& err) {
      trace.status = std::string("error at iteration ") + std::to_string(k) +
                     ": " + err.what();
      break;
    }
    const double model_decrease = f - step.model_min;
    if (step.f_next > f + 1e-12) trace.monotone = false;
    x = step.x_next;
    f = step.f_next;
    trace.iterations = k;

    if (k % config.record_every == 0 || k == config.max_iterations) {
      trace.rows.push_back(TraceRow{k, f, step.step_norm, step.h_used,
                                    S.size(), model_decrease, now_ms(start),
                                    S.members});
    }

    if (config.f_star_ref && f - *config.f_star_ref <= config.target_accuracy) {
      trace.status = "target_reached";
      break;
    }
    stall_count = model_decrease < config.stall_tolerance ? stall_count + 1 : 0;
    if (stall_count >= stall_window) {
      trace.status = "stalled";
      break;
    }
  }
  if (trace.rows.back().k != trace.iterations) {
    trace.rows.push_back(TraceRow{trace.iterations, f, 0.0, 0.0, 0, 0.0,
                                  now_ms(start), {}});
  }
  trace.x_final = x;
  trace.f_final = f;
  return trace;
}

double compute_beta(const CompositeProblem& problem,
                    const SamplingSpec& spec) {
  const int n = problem.partition.num_blocks();
  const double tau = spec.effective_tau(n);
  const Matrix E = expected_submatrix(problem.g.A, spec, problem.partition);
  const Matrix M1 = (tau / n) * problem.g.G;

  const double e_scale = E.cwiseAbs().maxCoeff();
  if (e_scale <= 1e-14 * std::max(1.0, problem.g.A.cwiseAbs().maxCoeff())) {
    return kInf;  // E[A(S)] = 0: every beta works
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(M1);
  const Vector& lam = es.eigenvalues();
  const Matrix& V = es.eigenvectors();
  const double lam_max = std::max(lam.maxCoeff(), 0.0);
  if (lam_max <= 0.0) return 0.0;
  const double thr = 1e-12 * lam_max;

  // Any energy of E on the kernel of M1 forces beta = 0.
  std::vector<int> kernel;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] <= thr) kernel.push_back(static_cast<int>(i));
  }
  if (!kernel.empty()) {
    Matrix K(static_cast<int>(kernel.size()), static_cast<int>(kernel.size()));
    for (std::size_t r = 0; r < kernel.size(); ++r) {
      for (std::size_t c = 0; c < kernel.size(); ++c) {
        K(static_cast<int>(r), static_cast<int>(c)) =
            V.col(kernel[r]).dot(E * V.col(kernel[c]));
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> esK(K, Eigen::EigenvaluesOnly);
    if (esK.eigenvalues().maxCoeff() > 1e-10 * e_scale) return 0.0;
  }

  // beta = 1 / lambda_max(M1^{-1/2} E M1^{-1/2}) on range(M1).
  Vector inv_sqrt = lam;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    inv_sqrt[i] = lam[i] > thr ? 1.0 / std::sqrt(lam[i]) : 0.0;
  }
  const Matrix W = V * inv_sqrt.asDiagonal();
  const Matrix C = W.transpose() * E * W;
  Eigen::SelfAdjointEigenSolver<Matrix> esC(C, Eigen::EigenvaluesOnly);
  const double top = esC.eigenvalues().maxCoeff();
  if (top <= 0.0) return kInf;
  return 1.0 / top;
}

RateCertificate certificate_iterations(int theorem,
                                       const CertificateInputs& inputs) {
  RateCertificate cert;
  cert.theorem = theorem;
  cert.inputs = inputs;
  cert.sigma = std::min(inputs.beta, 1.0);
  const double n_over_tau = inputs.n / inputs.tau;
  switch (theorem) {
    case 1: {
      const double d0 = std::max(
          inputs.L * inputs.D * inputs.D + inputs.h_max * cube(inputs.D),
          inputs.f0_minus_fstar);
      cert.k_real = 2.0 / inputs.eps * n_over_tau *
                    (1.0 + std::log(1.0 / inputs.rho)) * d0;
      break;
    }
    case 2: {
      if (!(inputs.beta > 0.0)) {
        cert.applicable = false;
        return cert;
      }
      const double d0 =
          std::max(inputs.h_max * cube(inputs.D), inputs.f0_minus_fstar);
      cert.k_real = 2.0 / std::sqrt(inputs.eps) * n_over_tau / cert.sigma *
                    (2.0 + std::log(1.0 / inputs.rho)) * std::sqrt(d0);
      break;
    }
    case 3: {
      if (!(inputs.mu > 0.0)) {
        cert.applicable = false;
        return cert;
      }
      const double factor =
          std::sqrt(std::max(inputs.h_max * inputs.D / inputs.mu, 1.0));
      cert.k_real = 1.5 *
                    std::log(inputs.f0_minus_fstar / (inputs.eps * inputs.rho)) *
                    n_over_tau / cert.sigma * factor;
      break;
    }
    default:
      throw std::invalid_argument("certificate_iterations: theorem in {1,2,3}");
  }
  // Back off by one part in 1e12 so exact-integer plug-ins round down.
  cert.iterations = static_cast<long long>(
      std::ceil(cert.k_real - 1e-12 * std::max(1.0, std::abs(cert.k_real))));
  return cert;
}

std::string RateCertificate::report() const {
  std::ostringstream out;
  out << "theorem: " << theorem << '\n'
      << "applicable: " << (applicable ? "yes" : "no") << '\n'
      << "L: " << inputs.L << '\n'
      << "mu: " << inputs.mu << '\n'
      << "H_max: " << inputs.h_max << '\n'
      << "D: " << inputs.D << " (estimated)" << '\n'
      << "beta: " << inputs.beta << '\n'
      << "sigma: " << sigma << '\n'
      << "n: " << inputs.n << '\n'
      << "tau: " << inputs.tau << '\n'
      << "epsilon: " << inputs.eps << '\n'
      << "rho: " << inputs.rho << '\n'
      << "f0_minus_fstar: " << inputs.f0_minus_fstar << '\n';
  if (applicable) {
    out << "iterations: " << iterations << '\n';
  } else {
    out << "iterations: not applicable" << '\n';
  }
  return out.str();
}

}  // namespace bcn
