#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "bcn/losses.hpp"
#include "bcn/problem.hpp"
#include "bcn/rbcn.hpp"

namespace bcn {

// Regularized empirical risk minimization
//   min_w P(w) = (1/m) sum_i loss_i(b_i' w) + lambda/2 ||w||^2,
// with the rows b_i' of B as examples. The l2 regularizer is 1-strongly
// convex, which the dual method requires.
struct ErmProblem {
  Matrix B;
  std::vector<ScalarLoss> losses;
  double lambda = 1.0;

  int m() const { return static_cast<int>(B.rows()); }
  int d() const { return static_cast<int>(B.cols()); }
  void validate() const;

  double primal(const Vector& w) const;
  Vector primal_gradient(const Vector& w) const;

  // Fenchel dual D(alpha) = (1/m) sum_i -loss_i*(-alpha_i)
  //                         - ||B' alpha||^2 / (2 lambda m^2).
  double dual(const Vector& alpha) const;
  // Same with v = B' alpha supplied by the caller.
  double dual(const Vector& alpha, const Vector& v) const;
  bool dual_feasible(const Vector& alpha) const;

  // Dual starting point strictly inside the conjugate domains.
  Vector initial_dual() const;
};

// w = grad g*( B' alpha / (lambda m) ); for the l2 regularizer this is
// B' alpha / (lambda m) exactly.
Vector primal_from_dual(const ErmProblem& erm, const Vector& alpha);

double duality_gap(const ErmProblem& erm, const Vector& w,
                   const Vector& alpha);

// Equivalent constrained problem over z = (w; alpha) with alpha = B w:
// lambda/2 ||w||^2 + (1/m) sum_i loss_i(alpha_i) on the affine set.
CompositeProblem constrained_reformulate(const ErmProblem& erm);

// One coupled cubic step on weight blocks S (unit blocks of w). Returns the
// updated pair; the coupling update h = B(:,S) y keeps alpha = B w exact.
struct CoupledStep {
  Vector w;
  Vector alpha;
  double model_min_increment = 0.0;  // model minimum minus P(w), <= 0
  double step_norm = 0.0;
};
CoupledStep constrained_rbcn_step(const ErmProblem& erm, const Vector& w,
                                  const Vector& alpha, const IndexSet& S,
                                  double H);

// Full run of coupled cubic steps on the ERM primal, sampling weight blocks
// with config.sampling (over d). Constant strategies use the largest loss
// constant; the adaptive strategy doubles on rejection with the usual
// warm-started halving.
struct ConstrainedRunResult {
  Vector w;
  Vector alpha;
  RunTrace trace;
};
ConstrainedRunResult constrained_rbcn_run(const ErmProblem& erm,
                                          const Vector& w0,
                                          const RbcnConfig& config);

// Restriction of the dual objective to coordinates S at the point alpha
// (v = B' alpha cached by the caller): gradient, Hessian and the step box
// induced by the conjugate domains.
struct DualRestriction {
  Vector grad;
  Matrix hess;      // negative semidefinite
  Vector lower;     // componentwise step bounds containing 0
  Vector upper;
  bool bounded = false;
};
DualRestriction dual_restriction(const ErmProblem& erm, const Vector& alpha,
                                 const Vector& v, const IndexSet& S);

struct DualConfig {
  SamplingSpec sampling;  // over the m dual coordinates
  double h0 = 1.0;
  double h_min = 1e-12;
  int failure_budget = 60;
  long max_epochs = 100;
  double target_gap = 0.0;  // stop when the duality gap drops below (if > 0)
  std::uint64_t seed = 0;
  long record_every = 1;
};

struct DualTraceRow {
  double epoch = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double h = 0.0;
  double elapsed_ms = 0.0;
};

struct DualTrace {
  std::vector<DualTraceRow> rows;
  std::string status;
  long iterations = 0;
  double epochs = 0.0;
  bool dual_monotone = true;
  double gap_final = 0.0;

  // Fixed header: epoch,primal,dual,gap,H
  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::string& path) const;
};

struct DualRunResult {
  Vector w;
  Vector alpha;
  DualTrace trace;
};

// Stochastic dual cubic Newton ascent: cubic steps on random subsets of the
// dual coordinates with an adaptive cubic coefficient (halved after an
// immediately accepted trial, doubled on rejection), primal iterates
// recovered through the stationarity map.
DualRunResult sdcna_run(const ErmProblem& erm, const DualConfig& config);

}  // namespace bcn
