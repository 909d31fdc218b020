#pragma once

#include <optional>
#include <utility>

#include "bcn/types.hpp"

namespace bcn {

struct Deriv012 {
  double value;
  double d1;
  double d2;
};

// Scalar convex loss with analytic derivatives, Hessian-Lipschitz constant
// and Fenchel conjugate. The four kinds:
//   quadratic:  (a/2) (t - t0)^2
//   logistic:   log(1 + exp(t))
//   cubed_abs:  (c/3) |t - t0|^3
//   poisson:    exp(t) - y t            (count y >= 0)
struct ScalarLoss {
  enum class Kind { quadratic, logistic, cubed_abs, poisson };

  Kind kind = Kind::quadratic;
  double a = 1.0;   // quadratic curvature, must be > 0
  double t0 = 0.0;  // quadratic / cubed_abs shift
  double c = 1.0;   // cubed_abs coefficient, must be > 0
  int count = 0;    // poisson response

  static ScalarLoss quadratic(double a = 1.0, double t0 = 0.0);
  static ScalarLoss logistic();
  static ScalarLoss cubed_abs(double c = 1.0, double t0 = 0.0);
  static ScalarLoss poisson(int count);
};

// Value and first two derivatives at t. Overflow-safe for logistic.
Deriv012 eval012(const ScalarLoss& loss, double t);

// Lipschitz constant of the second derivative. Empty for poisson, whose
// Hessian has no global Lipschitz constant; only adaptive regularization
// strategies apply there.
std::optional<double> hess_lipschitz_constant(const ScalarLoss& loss);

// Closure of the conjugate domain as [lo, hi] (entries may be +-inf).
std::pair<double, double> conjugate_domain(const ScalarLoss& loss);

// Fenchel conjugate loss*(s) = sup_t (s t - loss(t)) with derivatives.
// Arguments inside the closed domain are clamped 1e-12 away from the
// boundary before evaluation; arguments outside throw std::domain_error.
Deriv012 conjugate012(const ScalarLoss& loss, double s);

// Loss attached to one coordinate block: either the scalar loss applied to
// the single coordinate of a 1-D block, or to <direction, x> for a block of
// matching dimension, the whole term multiplied by a nonnegative scale.
struct BlockLoss {
  ScalarLoss loss;
  Vector direction;  // size 0 means: 1-D block, apply to the coordinate
  int dim = 1;
  double scale = 1.0;

  static BlockLoss scalar(ScalarLoss loss, double scale = 1.0);
  static BlockLoss along(ScalarLoss loss, Vector direction, double scale = 1.0);

  double value(const Vector& xb) const;
  Vector gradient(const Vector& xb) const;
  Matrix hessian(const Vector& xb) const;
  // Scalar constant times ||direction||^3 for the composed form.
  std::optional<double> hess_lipschitz() const;
};

}  // namespace bcn
