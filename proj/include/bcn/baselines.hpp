#pragma once

#include <cstdint>

#include "bcn/erm.hpp"
#include "bcn/problem.hpp"
#include "bcn/rbcn.hpp"

namespace bcn {

struct ArmijoParams {
  double c1 = 1e-4;
  double backtrack = 0.5;
  int max_trials = 60;
};

struct InnerNewtonParams {
  double grad_tol = 1e-12;
  int max_iterations = 100;
};

struct BaselineConfig {
  enum class Method { bcgd, sdca, sdna };
  Method method = Method::bcgd;
  SamplingSpec sampling;
  ArmijoParams armijo;
  InnerNewtonParams inner_newton;
  std::uint64_t seed = 0;
  long max_iterations = 1000;   // bcgd
  long max_epochs = 100;        // dual methods
  double target_accuracy = 0.0;
  std::optional<double> f_star_ref;
  double target_gap = 0.0;
  long record_every = 1;
};

// Projected gradient step on the sampled blocks with Armijo backtracking:
// x+ = proj(x - t (grad F)(S)), accepted once
// F(x+) <= F(x) - c1 t ||(grad F)(S)||^2. t_init carries the last accepted
// step size across calls. Budget exhaustion returns a flagged no-op.
struct BcgdStep {
  Vector x;
  double t_used = 0.0;
  bool line_search_ok = true;
};
BcgdStep bcgd_step(const CompositeProblem& problem, const Vector& x,
                   const IndexSet& S, const ArmijoParams& armijo,
                   double& t_init);

RunTrace bcgd_run(const CompositeProblem& problem, const Vector& x0,
                  const BaselineConfig& config);

// Exact maximization of the dual restricted to one coordinate (sdca) or a
// coordinate subset (sdna) by damped Newton with Armijo backtracking, to
// gradient norm <= grad_tol. converged reports whether the inner solver hit
// its tolerance.
Vector sdca_step(const ErmProblem& erm, const Vector& alpha, int i,
                 const InnerNewtonParams& newton, const ArmijoParams& armijo,
                 bool* converged = nullptr);

Vector sdna_step(const ErmProblem& erm, const Vector& alpha, const IndexSet& S,
                 const InnerNewtonParams& newton, const ArmijoParams& armijo,
                 bool* converged = nullptr);

DualRunResult sdca_run(const ErmProblem& erm, const BaselineConfig& config);
DualRunResult sdna_run(const ErmProblem& erm, const BaselineConfig& config);

}  // namespace bcn
