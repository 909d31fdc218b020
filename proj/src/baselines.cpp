#include "bcn/baselines.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/Cholesky>

#include "bcn/rng.hpp"

namespace bcn {

namespace {

double now_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

Vector project(const CompositeProblem& problem, Vector x) {
  for (int i = 0; i < static_cast<int>(problem.psi.size()); ++i) {
    if (problem.psi[static_cast<std::size_t>(i)].kind !=
        SimpleTerm::Kind::box) {
      continue;
    }
    const auto& box = problem.psi[static_cast<std::size_t>(i)];
    auto seg = x.segment(problem.partition.offset(i), problem.partition.size(i));
    seg = seg.cwiseMax(box.lower).cwiseMin(box.upper);
  }
  if (problem.constraint.kind == ConstraintSet::Kind::box) {
    x = x.cwiseMax(problem.constraint.lower).cwiseMin(problem.constraint.upper);
  }
  return x;
}

// Damped Newton ascent on the dual restricted to S. Backtracks both for the
// Armijo condition and to stay inside the conjugate domains.
Vector restricted_dual_newton(const ErmProblem& erm, const Vector& alpha0,
                              const IndexSet& S,
                              const InnerNewtonParams& newton,
                              const ArmijoParams& armijo, bool* converged) {
  Vector alpha = alpha0;
  Vector v = erm.B.transpose() * alpha;
  double value = erm.dual(alpha);
  double t_init = 1.0;
  bool ok = false;
  for (int iter = 0; iter < newton.max_iterations; ++iter) {
    const DualRestriction rest = dual_restriction(erm, alpha, v, S);
    if (rest.grad.norm() <= newton.grad_tol) {
      ok = true;
      break;
    }
    Matrix negH = -rest.hess;
    negH.diagonal().array() += 1e-14;  // guards exactly singular corners
    Eigen::LDLT<Matrix> ldlt(negH);
    Vector dir = ldlt.solve(rest.grad);
    double slope = rest.grad.dot(dir);
    if (!(slope > 0.0)) {  // fall back to steepest ascent
      dir = rest.grad;
      slope = rest.grad.squaredNorm();
    }
    double t = t_init;
    bool accepted = false;
    for (int trial = 0; trial < armijo.max_trials; ++trial) {
      Vector alpha_try = alpha;
      Vector v_try = v;
      for (int r = 0; r < S.size(); ++r) {
        const int i = S.members[static_cast<std::size_t>(r)];
        alpha_try[i] += t * dir[r];
        v_try += t * dir[r] * erm.B.row(i).transpose();
      }
      if (erm.dual_feasible(alpha_try)) {
        const double value_try = erm.dual(alpha_try, v_try);
        if (value_try >= value + armijo.c1 * t * slope) {
          alpha = std::move(alpha_try);
          v = std::move(v_try);
          value = value_try;
          t_init = std::min(1.0, t / armijo.backtrack);
          accepted = true;
          break;
        }
      }
      t *= armijo.backtrack;
    }
    if (!accepted) break;  // stalled line search
  }
  if (converged) *converged = ok;
  return alpha;
}

}  // namespace

BcgdStep bcgd_step(const CompositeProblem& problem, const Vector& x,
                   const IndexSet& S, const ArmijoParams& armijo,
                   double& t_init) {
  BcgdStep out;
  out.x = x;
  const Vector grad_s =
      restrict_vector(problem.smooth_gradient(x), S, problem.partition);
  const double grad_sq = grad_s.squaredNorm();
  if (grad_sq == 0.0) {
    out.t_used = 0.0;
    return out;
  }
  const double f0 = problem.objective(x);
  double t = t_init;
  for (int trial = 0; trial < armijo.max_trials; ++trial) {
    const Vector x_try = project(problem, x - t * grad_s);
    const double f_try = problem.objective(x_try);
    if (f_try <= f0 - armijo.c1 * t * grad_sq) {
      out.x = x_try;
      out.t_used = t;
      t_init = std::min(1.0, t / armijo.backtrack);
      return out;
    }
    t *= armijo.backtrack;
  }
  out.line_search_ok = false;  // budget exhausted, keep the point
  out.t_used = 0.0;
  return out;
}

RunTrace bcgd_run(const CompositeProblem& problem, const Vector& x0,
                  const BaselineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunTrace trace;
  const int n = problem.partition.num_blocks();
  config.sampling.validate(n);

  Vector x = x0;
  double f = problem.objective(x);
  double t_init = 1.0;
  Rng rng = Rng(config.sampling.seed).split(config.seed);
  trace.rows.push_back(TraceRow{0, f, 0.0, 0.0, 0, 0.0, now_ms(start), {}});
  trace.status = "max_iterations";
  for (long k = 1; k <= config.max_iterations; ++k) {
    const IndexSet S = draw(config.sampling, problem.partition, rng);
    const BcgdStep step = bcgd_step(problem, x, S, config.armijo, t_init);
    const double f_new = problem.objective(step.x);
    if (f_new > f + 1e-12) trace.monotone = false;
    const double step_norm = (step.x - x).norm();
    x = step.x;
    f = f_new;
    trace.iterations = k;
    if (k % config.record_every == 0 || k == config.max_iterations) {
      trace.rows.push_back(TraceRow{k, f, step_norm, 0.0, S.size(), 0.0,
                                    now_ms(start), S.members});
    }
    if (config.f_star_ref &&
        f - *config.f_star_ref <= config.target_accuracy) {
      trace.status = "target_reached";
      break;
    }
  }
  if (trace.rows.back().k != trace.iterations) {
    trace.rows.push_back(
        TraceRow{trace.iterations, f, 0.0, 0.0, 0, 0.0, now_ms(start), {}});
  }
  trace.x_final = x;
  trace.f_final = f;
  return trace;
}

Vector sdca_step(const ErmProblem& erm, const Vector& alpha, int i,
                 const InnerNewtonParams& newton, const ArmijoParams& armijo,
                 bool* converged) {
  return restricted_dual_newton(erm, alpha, IndexSet::of({i}, erm.m()), newton,
                                armijo, converged);
}

Vector sdna_step(const ErmProblem& erm, const Vector& alpha, const IndexSet& S,
                 const InnerNewtonParams& newton, const ArmijoParams& armijo,
                 bool* converged) {
  if (S.size() == 0) {
    throw std::invalid_argument("sdna_step: S must be nonempty");
  }
  return restricted_dual_newton(erm, alpha, S, newton, armijo, converged);
}

namespace {

DualRunResult dual_coordinate_run(const ErmProblem& erm,
                                  const BaselineConfig& config,
                                  bool singleton) {
  const auto start = std::chrono::steady_clock::now();
  erm.validate();
  const int m = erm.m();
  const BlockPartition coords = BlockPartition::uniform(m);
  SamplingSpec sampling =
      singleton ? SamplingSpec::singleton(config.sampling.seed)
                : config.sampling;
  sampling.validate(m);
  const int tau = sampling.effective_tau(m);

  DualRunResult out;
  out.alpha = erm.initial_dual();
  out.w = primal_from_dual(erm, out.alpha);
  double dual_value = erm.dual(out.alpha);

  DualTrace& trace = out.trace;
  trace.rows.push_back(DualTraceRow{0.0, erm.primal(out.w), dual_value,
                                    erm.primal(out.w) - dual_value, 0.0,
                                    now_ms(start)});
  trace.gap_final = trace.rows.back().gap;
  if (config.target_gap > 0.0 && trace.gap_final <= config.target_gap) {
    trace.status = "target_reached";
    return out;
  }

  Rng rng = Rng(sampling.seed).split(config.seed);
  const long max_iterations =
      static_cast<long>(std::ceil(config.max_epochs * double(m) / tau));
  trace.status = "max_epochs";
  for (long k = 1; k <= max_iterations; ++k) {
    const IndexSet S = draw(sampling, coords, rng);
    const Vector alpha_next = restricted_dual_newton(
        erm, out.alpha, S, config.inner_newton, config.armijo, nullptr);
    const double dual_next = erm.dual(alpha_next);
    if (dual_next >= dual_value) {  // exact coordinate ascent is monotone
      out.alpha = alpha_next;
      if (dual_next < dual_value - 1e-12) trace.dual_monotone = false;
      dual_value = dual_next;
    }
    out.w = primal_from_dual(erm, out.alpha);
    trace.epochs += double(tau) / m;
    trace.iterations = k;
    const double primal_value = erm.primal(out.w);
    trace.gap_final = primal_value - dual_value;
    if (k % config.record_every == 0 || k == max_iterations) {
      trace.rows.push_back(DualTraceRow{trace.epochs, primal_value, dual_value,
                                        trace.gap_final, 0.0, now_ms(start)});
    }
    if (config.target_gap > 0.0 && trace.gap_final <= config.target_gap) {
      trace.status = "target_reached";
      break;
    }
  }
  if (trace.rows.back().epoch != trace.epochs) {
    trace.rows.push_back(DualTraceRow{trace.epochs, erm.primal(out.w),
                                      dual_value, trace.gap_final, 0.0,
                                      now_ms(start)});
  }
  trace.gap_final = trace.rows.back().gap;
  return out;
}

}  // namespace

DualRunResult sdca_run(const ErmProblem& erm, const BaselineConfig& config) {
  return dual_coordinate_run(erm, config, /*singleton=*/true);
}

DualRunResult sdna_run(const ErmProblem& erm, const BaselineConfig& config) {
  return dual_coordinate_run(erm, config, /*singleton=*/false);
}

}  // namespace bcn
