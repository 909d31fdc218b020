#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "bcn/types.hpp"

namespace bcn {

// Optional coupling h = B y with its own quadratic and linear data; the
// cubic penalty then acts on ||h||:
//   f(y) = <b, y> + 0.5 <Q y, y> + <linear, B y>
//          + 0.5 <diag(weights) B y, B y> + (H/6) ||B y||^3.
struct AffineCoupling {
  Matrix B;        // m x d
  Vector weights;  // m, nonnegative
  Vector linear;   // m
};

// One cubically regularized quadratic minimization, the unit of work of the
// solvers below. Without coupling the objective is
//   f(y) = <b, y> + 0.5 <Q y, y> + (H/6) ||y||^3.
struct CubicSubproblem {
  Matrix Q;  // d x d symmetric PSD
  Vector b;  // d
  double H = 0.0;
  std::optional<AffineCoupling> coupling;
  std::optional<std::pair<Vector, Vector>> bounds;  // componentwise on y

  int dim() const { return static_cast<int>(b.size()); }
  double value(const Vector& y) const;
  void validate() const;
};

struct CubicSolution {
  Vector y;
  double tau = 0.0;  // ||y||, or ||B y|| in the coupled case
  double model_value = 0.0;
  double kkt_residual = 0.0;
  int root_iterations = 0;
  int inner_iterations = 0;
  bool to_tolerance = true;
};

struct SecularOptions {
  double tol = 1e-12;
  int max_iterations = 200;
};

struct SecularRoot {
  double tau = 0.0;
  int iterations = 0;
};

// Smallest nonnegative solution of tau = phi(tau) for a continuous
// non-increasing phi >= 0 (so tau - phi(tau) is strictly increasing and the
// root is unique when phi is continuous). Guarded Newton when the derivative
// is supplied, secant otherwise, with a bisection fallback on the bracket
// [0, hi] where hi grows geometrically from the hint until the residual
// changes sign. Terminates with |tau - phi(tau)| <= tol (1 + tau).
SecularRoot root_find_secular(
    const std::function<double(double)>& phi, double bracket_hint = 1.0,
    const std::function<double(double)>& phi_prime = nullptr,
    const SecularOptions& options = {});

// Global minimizer of <b,y> + 0.5<Qy,y> + (H/6)||y||^3 for PSD Q. One
// symmetric eigendecomposition of Q, reused for every evaluation of the
// secular map. H = 0 degenerates to a (pseudo-inverse) Newton step and
// throws unbounded_error when b has a component outside range(Q).
CubicSolution solve_unconstrained(const CubicSubproblem& sub);

// Coupled form: minimizes over the affine set h = B y by solving
// tau* = ||B Z(tau*)^+ (b + B' linear)|| with
// Z(tau) = Q + B'(diag(weights) + (H tau / 2) I)B, then y = -Z(tau*)^+ b.
// Near-singular Z takes a pseudo-inverse branch (singular values below
// 1e-12 of the largest treated as zero).
CubicSolution solve_affine_coupled(const CubicSubproblem& sub);

struct FallbackOptions {
  long max_iterations = 100000;
  double tol = 1e-12;
};

// Projected-gradient fallback for box-constrained subproblems (monotone,
// backtracking step sizes, warm-started from the clamped unconstrained
// minimizer when available). kkt_residual reports the projected-gradient
// mapping norm; to_tolerance is false when the iteration cap was hit.
CubicSolution solve_fallback_composite(const CubicSubproblem& sub,
                                       const FallbackOptions& options = {});

// Route to the appropriate solver: coupling -> coupled, bounds -> fallback,
// otherwise the unconstrained secular path.
CubicSolution solve(const CubicSubproblem& sub);

}  // namespace bcn
