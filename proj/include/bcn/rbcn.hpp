#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bcn/cubsolve.hpp"
#include "bcn/problem.hpp"

namespace bcn {

// Choice of the cubic coefficient per iteration.
//   constant_blockwise: H_k = max of the block constants over the sample
//   constant_global:    H_k = max block constant over all blocks
//                       (h_override, when set, replaces it)
//   adaptive:           doubling on rejection, warm-started from the
//                       previous iteration, capped by twice the global
//                       constant when that constant is known
struct HStrategy {
  enum class Kind { constant_blockwise, constant_global, adaptive };
  Kind kind = Kind::constant_blockwise;
  std::optional<double> h_override;
  double h0 = 1.0;
  double h_min = 1e-12;
  int failure_budget = 60;

  static HStrategy constant_blockwise() { return {}; }
  static HStrategy constant_global(std::optional<double> h = std::nullopt) {
    HStrategy s;
    s.kind = Kind::constant_global;
    s.h_override = h;
    return s;
  }
  static HStrategy adaptive(double h0 = 1.0) {
    HStrategy s;
    s.kind = Kind::adaptive;
    s.h0 = h0;
    return s;
  }
};

struct RbcnConfig {
  SamplingSpec sampling;
  HStrategy h_strategy;
  long max_iterations = 1000;
  double target_accuracy = 0.0;         // active when f_star_ref is set
  std::optional<double> f_star_ref;
  std::uint64_t seed = 0;               // run stream, combined with sampling.seed
  long record_every = 1;
  double stall_tolerance = 1e-15;
};

struct TraceRow {
  long k = 0;
  double objective = 0.0;
  double step_norm = 0.0;
  double h = 0.0;
  int sample_size = 0;
  double model_decrease = 0.0;
  double elapsed_ms = 0.0;
  std::vector<int> blocks;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::string status;
  long iterations = 0;
  bool monotone = true;  // online check of the descent condition
  Vector x_final;
  double f_final = 0.0;

  // Fixed header: k,objective,step_norm,H,sample_size,elapsed_ms
  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::string& path) const;
};

// Warm-start state threaded through adaptive steps of one run.
struct HState {
  double warm = 1.0;
  std::optional<double> h_max;  // global block constant, when known
};

struct StepResult {
  Vector x_next;
  double f_next = 0.0;
  double h_used = 0.0;
  int trials = 0;
  double model_min = 0.0;  // minimum value of the accepted model
  double step_norm = 0.0;
  bool no_op = false;
};

// One outer iteration on the sampled blocks: build the model, minimize it,
// and accept the step once the attained objective is below the model
// minimum. Degenerate steps (norm <= 1e-15) are accepted as no-ops.
StepResult rbcn_step(const CompositeProblem& problem, const Vector& x,
                     const IndexSet& S, const HStrategy& strategy,
                     HState& state);

RunTrace rbcn_run(const CompositeProblem& problem, const Vector& x0,
                  const RbcnConfig& config);

// Largest beta with beta E[A(S)] <= (tau/n) G in the semidefinite order,
// via an eigensolve of the pencil restricted to range(G). Returns +inf when
// the inequality holds for every nonnegative beta.
double compute_beta(const CompositeProblem& problem, const SamplingSpec& spec);

struct CertificateInputs {
  double L = 0.0;    // largest eigenvalue of A
  double mu = 0.0;   // smallest eigenvalue of G
  double h_max = 0.0;
  double D = 0.0;    // level-set radius estimate
  double beta = 0.0;
  double n = 1.0;
  double tau = 1.0;
  double eps = 1.0;
  double rho = 0.1;
  double f0_minus_fstar = 1.0;
};

// Iteration count that guarantees F - F* <= eps with probability 1 - rho.
//   theorem 1: sublinear O(1/eps) rate, convex case
//   theorem 2: O(1/sqrt(eps)) rate, needs beta > 0
//   theorem 3: linear rate, needs mu > 0
struct RateCertificate {
  int theorem = 1;
  CertificateInputs inputs;
  double sigma = 1.0;
  bool applicable = true;
  double k_real = 0.0;
  long long iterations = 0;

  std::string report() const;  // human-readable key: value lines
};

RateCertificate certificate_iterations(int theorem,
                                       const CertificateInputs& inputs);

}  // namespace bcn
