#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "bcn/blocks.hpp"
#include "bcn/losses.hpp"
#include "bcn/types.hpp"

namespace bcn {

// Smooth component g together with its curvature bounds G <= hess g <= A
// (in the semidefinite order). The quadratic path stores
// g(x) = 0.5 x'Mx + q'x + r with G = A = M; the general path takes value and
// gradient callbacks plus user-supplied G and A.
struct SmoothTerm {
  bool is_quadratic = true;
  Matrix M;
  Vector q;
  double r = 0.0;
  std::function<double(const Vector&)> value_fn;
  std::function<Vector(const Vector&)> grad_fn;
  Matrix G;
  Matrix A;

  static SmoothTerm quadratic(Matrix M, Vector q = Vector(), double r = 0.0);
  static SmoothTerm general(std::function<double(const Vector&)> value,
                            std::function<Vector(const Vector&)> grad,
                            Matrix G, Matrix A);
  static SmoothTerm zero(int dim);

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  int dim() const { return static_cast<int>(A.rows()); }
};

// Separable simple term on one block: nothing, or a box indicator applied
// componentwise (a fixed-value pin is a box with lower == upper).
struct SimpleTerm {
  enum class Kind { none, box };
  Kind kind = Kind::none;
  double lower = -kInf;
  double upper = kInf;

  static SimpleTerm none() { return {}; }
  static SimpleTerm box(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("SimpleTerm::box: lo > hi");
    return SimpleTerm{Kind::box, lo, hi};
  }
  static SimpleTerm fixed(double v) { return box(v, v); }
};

// Feasible set descriptor. The affine kind couples a head segment (dimension
// head_dim) to a tail segment via tail = coupling * head; steps for such
// problems go through the coupled subproblem solver.
struct ConstraintSet {
  enum class Kind { reals, box, affine };
  Kind kind = Kind::reals;
  Vector lower;
  Vector upper;
  Matrix coupling;
  int head_dim = 0;

  static ConstraintSet reals() { return {}; }
  static ConstraintSet box(Vector lo, Vector hi);
  static ConstraintSet affine(Matrix coupling, int head_dim);
};

// min F(x) = g(x) + sum_i phi_i(x_(i)) + sum_i psi_i(x_(i))  over x in Q.
struct CompositeProblem {
  BlockPartition partition;
  SmoothTerm g;
  std::vector<std::optional<BlockLoss>> phi;  // empty, or one per block
  std::vector<SimpleTerm> psi;                // empty, or one per block
  ConstraintSet constraint;

  void validate() const;
  bool feasible(const Vector& x, double tol = kFeasTol) const;

  // F(x); +inf sentinel when an indicator (psi or Q) is violated.
  double objective(const Vector& x) const;

  // grad g + grad phi (psi excluded).
  Vector smooth_gradient(const Vector& x) const;

  bool has_phi() const { return !phi.empty(); }
  // Hessian-Lipschitz constant of block i (0 when phi_i is absent); empty
  // when no global constant exists.
  std::optional<double> block_hess_lipschitz(int i) const;
  std::optional<double> hess_lipschitz_max() const;
  std::optional<double> hess_lipschitz_max(const IndexSet& S) const;
};

// Compact data of the block-restricted cubic model around an anchor point:
//   model(y) = F(x) + <grad, yc> + 0.5 <quad yc, yc> + (H/6) ||yc||^3
//              [+ indicator of step bounds],
// where yc is the step gathered onto the selected coordinates.
struct CubicModelData {
  Vector anchor;
  IndexSet blocks;
  double h_coeff = 0.0;
  double f_anchor = 0.0;
  std::vector<int> coords;  // embedding map compact -> global
  Vector grad;
  Matrix quad;
  bool bounded = false;
  Vector lower;  // bounds on the compact step; +-inf when free
  Vector upper;
};

// Build the model of `problem` at feasible x over blocks S with cubic
// coefficient H. H = 0 is allowed only when every block constant is zero
// (phi absent or with exactly quadratic blocks), where the model degenerates
// to the plain quadratic one.
CubicModelData build_model(const CompositeProblem& problem, const Vector& x,
                           const IndexSet& S, double H);

// Model value at a step y (full-size, zero outside S). Includes the F(x)
// anchor; returns +inf if y violates the model's bounds.
double evaluate_model(const CubicModelData& model, const Vector& y);

// Second-order oracle for a general twice-differentiable objective.
struct SketchedOracle {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&, const Vector&)> hess_vec;
};

// Sketched model F(x) + <(grad F)(S), y> + 0.5 <(hess F)(S) y, y>
// + (H/6)||y(S)||^3, assembled from gradient and Hessian-vector products.
// Coincides with build_model when g is quadratic with hess g = A and phi
// supplies the remaining curvature.
CubicModelData build_sketched_model(const SketchedOracle& oracle,
                                    const BlockPartition& partition,
                                    const Vector& x, const IndexSet& S,
                                    double H);

}  // namespace bcn
