#include "bcn/erm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bcn/cubsolve.hpp"
#include "bcn/rng.hpp"

namespace bcn {

namespace {

double now_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ErmProblem::validate() const {
  if (m() < 1 || d() < 1) {
    throw std::invalid_argument("ErmProblem: need m, d >= 1");
  }
  if (static_cast<int>(losses.size()) != m()) {
    throw std::invalid_argument("ErmProblem: loss list length != m");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("ErmProblem: lambda must be > 0");
  }
}

double ErmProblem::primal(const Vector& w) const {
  const Vector margins = B * w;
  double sum = 0.0;
  for (int i = 0; i < m(); ++i) {
    sum += eval012(losses[static_cast<std::size_t>(i)], margins[i]).value;
  }
  return sum / m() + 0.5 * lambda * w.squaredNorm();
}

Vector ErmProblem::primal_gradient(const Vector& w) const {
  const Vector margins = B * w;
  Vector slopes(m());
  for (int i = 0; i < m(); ++i) {
    slopes[i] = eval012(losses[static_cast<std::size_t>(i)], margins[i]).d1;
  }
  return B.transpose() * slopes / m() + lambda * w;
}

double ErmProblem::dual(const Vector& alpha) const {
  return dual(alpha, B.transpose() * alpha);
}

double ErmProblem::dual(const Vector& alpha, const Vector& v) const {
  double sum = 0.0;
  for (int i = 0; i < m(); ++i) {
    sum -= conjugate012(losses[static_cast<std::size_t>(i)], -alpha[i]).value;
  }
  return sum / m() - v.squaredNorm() / (2.0 * lambda * m() * m());
}

bool ErmProblem::dual_feasible(const Vector& alpha) const {
  for (int i = 0; i < m(); ++i) {
    const auto [lo, hi] = conjugate_domain(losses[static_cast<std::size_t>(i)]);
    const double s = -alpha[i];
    if (s < lo || s > hi) return false;
  }
  return true;
}

Vector ErmProblem::initial_dual() const {
  Vector alpha(m());
  for (int i = 0; i < m(); ++i) {
    const auto& loss = losses[static_cast<std::size_t>(i)];
    switch (loss.kind) {
      case ScalarLoss::Kind::logistic:
        alpha[i] = -0.5;  // conjugate-domain midpoint
        break;
      case ScalarLoss::Kind::poisson:
        alpha[i] = loss.count - 1.0;  // one unit inside the domain
        break;
      default:
        alpha[i] = 0.0;
        break;
    }
  }
  return alpha;
}

Vector primal_from_dual(const ErmProblem& erm, const Vector& alpha) {
  return erm.B.transpose() * alpha / (erm.lambda * erm.m());
}

double duality_gap(const ErmProblem& erm, const Vector& w,
                   const Vector& alpha) {
  return erm.primal(w) - erm.dual(alpha);
}

CompositeProblem constrained_reformulate(const ErmProblem& erm) {
  erm.validate();
  const int d = erm.d();
  const int m = erm.m();
  CompositeProblem problem;
  problem.partition = BlockPartition::uniform(d + m);
  Matrix M = Matrix::Zero(d + m, d + m);
  M.topLeftCorner(d, d) = erm.lambda * Matrix::Identity(d, d);
  problem.g = SmoothTerm::quadratic(std::move(M));
  problem.phi.resize(static_cast<std::size_t>(d + m));
  for (int i = 0; i < m; ++i) {
    problem.phi[static_cast<std::size_t>(d + i)] =
        BlockLoss::scalar(erm.losses[static_cast<std::size_t>(i)], 1.0 / m);
  }
  problem.constraint = ConstraintSet::affine(erm.B, d);
  return problem;
}

CoupledStep constrained_rbcn_step(const ErmProblem& erm, const Vector& w,
                                  const Vector& alpha, const IndexSet& S,
                                  double H) {
  const int m = erm.m();
  CoupledStep out;
  out.w = w;
  out.alpha = alpha;
  if (S.size() == 0) return out;

  const int ds = S.size();
  CubicSubproblem sub;
  sub.Q = erm.lambda * m * Matrix::Identity(ds, ds);
  sub.b.resize(ds);
  AffineCoupling coupling;
  coupling.B.resize(m, ds);
  for (int c = 0; c < ds; ++c) {
    const int j = S.members[static_cast<std::size_t>(c)];
    sub.b[c] = erm.lambda * m * w[j];
    coupling.B.col(c) = erm.B.col(j);
  }
  coupling.weights.resize(m);
  coupling.linear.resize(m);
  for (int i = 0; i < m; ++i) {
    const Deriv012 der =
        eval012(erm.losses[static_cast<std::size_t>(i)], alpha[i]);
    coupling.linear[i] = der.d1;
    coupling.weights[i] = der.d2;
  }
  sub.H = H;
  sub.coupling = std::move(coupling);

  const CubicSolution sol = solve_affine_coupled(sub);
  for (int c = 0; c < ds; ++c) {
    out.w[S.members[static_cast<std::size_t>(c)]] += sol.y[c];
  }
  out.alpha += sub.coupling->B * sol.y;  // keeps alpha = B w exact
  // The coupled solver works with the model scaled by m.
  out.model_min_increment = sol.model_value / m;
  out.step_norm = sol.y.norm();
  return out;
}

ConstrainedRunResult constrained_rbcn_run(const ErmProblem& erm,
                                          const Vector& w0,
                                          const RbcnConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  erm.validate();
  const int d = erm.d();
  if (w0.size() != d) {
    throw std::invalid_argument("constrained_rbcn_run: w0 dimension mismatch");
  }
  config.sampling.validate(d);
  const int tau = config.sampling.effective_tau(d);
  const BlockPartition weights_blocks = BlockPartition::uniform(d);

  std::optional<double> h_max = 0.0;
  for (const ScalarLoss& loss : erm.losses) {
    const auto h = hess_lipschitz_constant(loss);
    if (!h) {
      h_max = std::nullopt;
      break;
    }
    h_max = std::max(*h_max, *h);
  }

  ConstrainedRunResult out;
  out.w = w0;
  out.alpha = erm.B * out.w;
  double f = erm.primal(out.w);
  RunTrace& trace = out.trace;
  trace.rows.push_back(TraceRow{0, f, 0.0, 0.0, 0, 0.0,
                                std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - start)
                                    .count(),
                                {}});

  double h_warm = config.h_strategy.h0;
  Rng rng = Rng(config.sampling.seed).split(config.seed);
  const long stall_window = (d + tau - 1) / tau;
  long stall_count = 0;
  trace.status = "max_iterations";
  for (long k = 1; k <= config.max_iterations; ++k) {
    const IndexSet S = draw(config.sampling, weights_blocks, rng);
    const bool adaptive =
        config.h_strategy.kind == HStrategy::Kind::adaptive;
    double h_trial;
    if (adaptive) {
      h_trial = std::max(h_warm, config.h_strategy.h_min);
      if (h_max && *h_max > 0.0) h_trial = std::min(h_trial, 2.0 * *h_max);
    } else if (config.h_strategy.h_override) {
      h_trial = *config.h_strategy.h_override;
    } else if (h_max) {
      h_trial = std::max(*h_max, 1e-300);  // coupled solver needs H > 0
    } else {
      throw std::invalid_argument(
          "constrained_rbcn_run: constant strategy needs finite constants");
    }

    const double slack = 1e-12 * (1.0 + std::abs(f));
    double model_decrease = 0.0;
    for (int trial = 1;; ++trial) {
      const CoupledStep step =
          constrained_rbcn_step(erm, out.w, out.alpha, S, h_trial);
      const double f_try = erm.primal(step.w);
      const double model_min = f + step.model_min_increment;
      const bool accepted = f_try <= model_min + slack && f_try <= f;
      if (accepted) {
        out.w = step.w;
        out.alpha = step.alpha;
        model_decrease = f - model_min;
        if (f_try > f + 1e-12) trace.monotone = false;
        f = f_try;
        if (adaptive) {
          h_warm = trial == 1 ? std::max(0.5 * h_trial, config.h_strategy.h_min)
                              : h_trial;
        }
        if (k % config.record_every == 0 || k == config.max_iterations) {
          trace.rows.push_back(
              TraceRow{k, f, step.step_norm, h_trial, S.size(), model_decrease,
                       std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count(),
                       S.members});
        }
        break;
      }
      if (!adaptive || trial >= config.h_strategy.failure_budget) {
        if (!adaptive) break;  // rounding edge of the constant choice
        throw numerical_error(
            "constrained_rbcn_run: adaptive search exhausted its budget");
      }
      double h_next = 2.0 * h_trial;
      if (h_max && *h_max > 0.0) h_next = std::min(h_next, 2.0 * *h_max);
      if (h_next == h_trial) break;
      h_trial = h_next;
      h_warm = h_trial;
    }
    trace.iterations = k;
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
                                  std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - start)
                                      .count(),
                                  {}});
  }
  trace.x_final = out.w;
  trace.f_final = f;
  return out;
}

DualRestriction dual_restriction(const ErmProblem& erm, const Vector& alpha,
                                 const Vector& v, const IndexSet& S) {
  const int m = erm.m();
  const int ds = S.size();
  DualRestriction out;
  out.grad.resize(ds);
  out.lower = Vector::Constant(ds, -kInf);
  out.upper = Vector::Constant(ds, kInf);
  Matrix Bs(ds, erm.d());
  Vector curvature(ds);
  for (int r = 0; r < ds; ++r) {
    const int i = S.members[static_cast<std::size_t>(r)];
    const auto& loss = erm.losses[static_cast<std::size_t>(i)];
    const Deriv012 conj = conjugate012(loss, -alpha[i]);
    out.grad[r] =
        conj.d1 / m - erm.B.row(i).dot(v) / (erm.lambda * m * m);
    curvature[r] = conj.d2 / m;
    Bs.row(r) = erm.B.row(i);
    const auto [lo, hi] = conjugate_domain(loss);
    if (std::isfinite(hi)) out.lower[r] = std::min(-hi - alpha[i], 0.0);
    if (std::isfinite(lo)) out.upper[r] = std::max(-lo - alpha[i], 0.0);
    if (std::isfinite(lo) || std::isfinite(hi)) out.bounded = true;
  }
  out.hess = -(Bs * Bs.transpose()) / (erm.lambda * m * m);
  out.hess.diagonal() -= curvature;
  return out;
}

void DualTrace::write_csv(std::ostream& out) const {
  out << "epoch,primal,dual,gap,H\n";
  for (const DualTraceRow& row : rows) {
    out << fmt(row.epoch) << ',' << fmt(row.primal) << ',' << fmt(row.dual)
        << ',' << fmt(row.gap) << ',' << fmt(row.h) << '\n';
  }
}

void DualTrace::write_csv_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file " + path);
  write_csv(out);
}

DualRunResult sdcna_run(const ErmProblem& erm, const DualConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  erm.validate();
  const int m = erm.m();
  config.sampling.validate(m);
  const int tau = config.sampling.effective_tau(m);
  const BlockPartition coords = BlockPartition::uniform(m);

  DualRunResult out;
  out.alpha = erm.initial_dual();
  Vector v = erm.B.transpose() * out.alpha;  // maintained incrementally
  out.w = v / (erm.lambda * m);
  double dual_value = erm.dual(out.alpha);

  DualTrace& trace = out.trace;
  const auto record = [&](double h_used) {
    const double primal_value = erm.primal(out.w);
    trace.rows.push_back(DualTraceRow{trace.epochs, primal_value, dual_value,
                                      primal_value - dual_value, h_used,
                                      now_ms(start)});
  };
  record(config.h0);
  trace.gap_final = trace.rows.back().gap;
  if (config.target_gap > 0.0 && trace.gap_final <= config.target_gap) {
    trace.status = "target_reached";
    return out;
  }

  Rng rng = Rng(config.sampling.seed).split(config.seed);
  double h_warm = config.h0;
  double h_last = config.h0;
  const long max_iterations =
      static_cast<long>(std::ceil(config.max_epochs * double(m) / tau));
  trace.status = "max_epochs";
  for (long k = 1; k <= max_iterations; ++k) {
    const IndexSet S = draw(config.sampling, coords, rng);
    const DualRestriction restriction =
        dual_restriction(erm, out.alpha, v, S);

    CubicSubproblem sub;
    sub.Q = -restriction.hess;  // model of -D, convex
    sub.b = -restriction.grad;
    if (restriction.bounded) {
      sub.bounds = std::make_pair(restriction.lower, restriction.upper);
    }

    double h_trial = std::max(h_warm, config.h_min);
    const double slack = 1e-12 * (1.0 + std::abs(dual_value));
    bool stepped = false;
    for (int trial = 1; trial <= config.failure_budget; ++trial) {
      sub.H = h_trial;
      const CubicSolution sol = solve(sub);
      if (sol.y.norm() <= 1e-15) {
        h_warm = h_trial;
        stepped = true;  // degenerate step, keep the point
        break;
      }
      Vector alpha_try = out.alpha;
      Vector v_try = v;
      for (int r = 0; r < S.size(); ++r) {
        const int i = S.members[static_cast<std::size_t>(r)];
        alpha_try[i] += sol.y[r];
        v_try += sol.y[r] * erm.B.row(i).transpose();
      }
      double dual_try;
      try {
        if (!erm.dual_feasible(alpha_try)) throw std::domain_error("dual");
        dual_try = erm.dual(alpha_try, v_try);
      } catch (const std::domain_error&) {
        h_trial *= 2.0;  // trial left the conjugate domain
        continue;
      }
      // Ascent acceptance: the attained dual meets the model's promise.
      if (dual_try >= dual_value - sol.model_value - slack &&
          dual_try >= dual_value) {
        out.alpha = std::move(alpha_try);
        v = std::move(v_try);
        out.w = v / (erm.lambda * m);
        if (dual_try < dual_value - 1e-12) trace.dual_monotone = false;
        dual_value = dual_try;
        h_warm = trial == 1 ? std::max(0.5 * h_trial, config.h_min) : h_trial;
        stepped = true;
        break;
      }
      h_trial *= 2.0;
    }
    if (!stepped) {
      trace.status = "error: adaptive search exhausted its trial budget";
      break;
    }
    h_last = h_trial;
    trace.epochs += double(tau) / m;
    trace.iterations = k;
    const double primal_value = erm.primal(out.w);
    trace.gap_final = primal_value - dual_value;
    if (k % config.record_every == 0 || k == max_iterations) {
      trace.rows.push_back(DualTraceRow{trace.epochs, primal_value, dual_value,
                                        trace.gap_final, h_trial,
                                        now_ms(start)});
    }
    if (config.target_gap > 0.0 && trace.gap_final <= config.target_gap) {
      trace.status = "target_reached";
      break;
    }
  }
  if (trace.rows.back().epoch != trace.epochs) record(h_last);
  trace.gap_final = trace.rows.back().gap;
  return out;
}

}  // namespace bcn
