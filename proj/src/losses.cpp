#include "bcn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace bcn {

namespace {

constexpr double kDomainMargin = 1e-12;

// 1 / (1 + exp(-t)) without overflow.
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

ScalarLoss ScalarLoss::quadratic(double a, double t0) {
  if (a <= 0.0) {
    throw std::invalid_argument("ScalarLoss::quadratic: a must be > 0");
  }
  ScalarLoss l;
  l.kind = Kind::quadratic;
  l.a = a;
  l.t0 = t0;
  return l;
}

ScalarLoss ScalarLoss::logistic() {
  ScalarLoss l;
  l.kind = Kind::logistic;
  return l;
}

ScalarLoss ScalarLoss::cubed_abs(double c, double t0) {
  if (c <= 0.0) {
    throw std::invalid_argument("ScalarLoss::cubed_abs: c must be > 0");
  }
  ScalarLoss l;
  l.kind = Kind::cubed_abs;
  l.c = c;
  l.t0 = t0;
  return l;
}

ScalarLoss ScalarLoss::poisson(int count) {
  if (count < 0) {
    throw std::invalid_argument("ScalarLoss::poisson: count must be >= 0");
  }
  ScalarLoss l;
  l.kind = Kind::poisson;
  l.count = count;
  return l;
}

Deriv012 eval012(const ScalarLoss& loss, double t) {
  switch (loss.kind) {
    case ScalarLoss::Kind::quadratic: {
      const double u = t - loss.t0;
      return {0.5 * loss.a * u * u, loss.a * u, loss.a};
    }
    case ScalarLoss::Kind::logistic: {
      const double value =
          t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      const double s = sigmoid(t);
      return {value, s, s * (1.0 - s)};
    }
    case ScalarLoss::Kind::cubed_abs: {
      const double u = t - loss.t0;
      const double au = std::abs(u);
      return {loss.c / 3.0 * au * au * au, loss.c * u * au, 2.0 * loss.c * au};
    }
    case ScalarLoss::Kind::poisson: {
      const double e = std::exp(t);
      return {e - loss.count * t, e - loss.count, e};
    }
  }
  throw std::logic_error("eval012: unknown loss kind");
}

std::optional<double> hess_lipschitz_constant(const ScalarLoss& loss) {
  switch (loss.kind) {
    case ScalarLoss::Kind::quadratic:
      return 0.0;
    case ScalarLoss::Kind::logistic:
      return 1.0 / (6.0 * std::sqrt(3.0));
    case ScalarLoss::Kind::cubed_abs:
      return 2.0 * loss.c;
    case ScalarLoss::Kind::poisson:
      return std::nullopt;
  }
  throw std::logic_error("hess_lipschitz_constant: unknown loss kind");
}

std::pair<double, double> conjugate_domain(const ScalarLoss& loss) {
  switch (loss.kind) {
    case ScalarLoss::Kind::quadratic:
    case ScalarLoss::Kind::cubed_abs:
      return {-kInf, kInf};
    case ScalarLoss::Kind::logistic:
      return {0.0, 1.0};
    case ScalarLoss::Kind::poisson:
      return {-static_cast<double>(loss.count), kInf};
  }
  throw std::logic_error("conjugate_domain: unknown loss kind");
}

Deriv012 conjugate012(const ScalarLoss& loss, double s) {
  switch (loss.kind) {
    case ScalarLoss::Kind::quadratic: {
      // sup_t (s t - (a/2)(t - t0)^2) = s t0 + s^2 / (2a)
      return {s * loss.t0 + 0.5 * s * s / loss.a, loss.t0 + s / loss.a,
              1.0 / loss.a};
    }
    case ScalarLoss::Kind::logistic: {
      if (s < 0.0 || s > 1.0) {
        throw std::domain_error("conjugate012: logistic needs s in [0, 1]");
      }
      const double u =
          std::min(std::max(s, kDomainMargin), 1.0 - kDomainMargin);
      return {u * std::log(u) + (1.0 - u) * std::log(1.0 - u),
              std::log(u / (1.0 - u)), 1.0 / (u * (1.0 - u))};
    }
    case ScalarLoss::Kind::cubed_abs: {
      const double as = std::abs(s);
      const double root = std::sqrt(as / loss.c);
      const double sign = s >= 0.0 ? 1.0 : -1.0;
      const double d2 = as > 0.0 ? 0.5 / std::sqrt(loss.c * as) : kInf;
      return {s * loss.t0 + 2.0 / 3.0 * as * root, loss.t0 + sign * root, d2};
    }
    case ScalarLoss::Kind::poisson: {
      // sup_t (s t - exp(t) + y t) = u log u - u with u = s + y >= 0.
      const double u0 = s + loss.count;
      if (u0 < 0.0) {
        throw std::domain_error("conjugate012: poisson needs s + count >= 0");
      }
      const double u = std::max(u0, kDomainMargin);
      return {u * std::log(u) - u, std::log(u), 1.0 / u};
    }
  }
  throw std::logic_error("conjugate012: unknown loss kind");
}

BlockLoss BlockLoss::scalar(ScalarLoss loss, double scale) {
  if (scale < 0.0) {
    throw std::invalid_argument("BlockLoss: scale must be >= 0");
  }
  BlockLoss b;
  b.loss = loss;
  b.dim = 1;
  b.scale = scale;
  return b;
}

BlockLoss BlockLoss::along(ScalarLoss loss, Vector direction, double scale) {
  if (direction.size() < 1) {
    throw std::invalid_argument("BlockLoss::along: empty direction");
  }
  if (scale < 0.0) {
    throw std::invalid_argument("BlockLoss: scale must be >= 0");
  }
  BlockLoss b;
  b.loss = loss;
  b.dim = static_cast<int>(direction.size());
  b.direction = std::move(direction);
  b.scale = scale;
  return b;
}

double BlockLoss::value(const Vector& xb) const {
  if (xb.size() != dim) {
    throw std::invalid_argument("BlockLoss: block dimension mismatch");
  }
  const double t = direction.size() ? direction.dot(xb) : xb[0];
  return scale * eval012(loss, t).value;
}

Vector BlockLoss::gradient(const Vector& xb) const {
  if (xb.size() != dim) {
    throw std::invalid_argument("BlockLoss: block dimension mismatch");
  }
  if (!direction.size()) {
    return Vector::Constant(1, scale * eval012(loss, xb[0]).d1);
  }
  return (scale * eval012(loss, direction.dot(xb)).d1) * direction;
}

Matrix BlockLoss::hessian(const Vector& xb) const {
  if (xb.size() != dim) {
    throw std::invalid_argument("BlockLoss: block dimension mismatch");
  }
  if (!direction.size()) {
    return Matrix::Constant(1, 1, scale * eval012(loss, xb[0]).d2);
  }
  return (scale * eval012(loss, direction.dot(xb)).d2) *
         (direction * direction.transpose());
}

std::optional<double> BlockLoss::hess_lipschitz() const {
  const auto h = hess_lipschitz_constant(loss);
  if (!h) return std::nullopt;
  if (!direction.size()) return scale * *h;
  return scale * *h * cube(direction.norm());
}

}  // namespace bcn
