#include "bcn/cubsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace bcn {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPinvThreshold = 1e-12;

void require_symmetric(const Matrix& Q, const char* who) {
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw std::invalid_argument(std::string(who) + ": Q must be symmetric");
  }
}

// Solve Z u = rhs with a pseudo-inverse fallback when Z is near singular.
// Returns false when even the pseudo-inverse leaves a large residual
// (inconsistent system).
bool solve_psd(const Matrix& Z, const Vector& rhs, Vector& u) {
  Eigen::LDLT<Matrix> ldlt(Z);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    u = ldlt.solve(rhs);
    const double scale = 1.0 + rhs.norm();
    if ((Z * u - rhs).norm() <= 1e-8 * scale) return true;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(Z);
  const Vector& lam = es.eigenvalues();
  const double thr = kPinvThreshold * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  Vector proj = es.eigenvectors().transpose() * rhs;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    proj[i] = std::abs(lam[i]) > thr ? proj[i] / lam[i] : 0.0;
  }
  u = es.eigenvectors() * proj;
  return (Z * u - rhs).norm() <= 1e-6 * (1.0 + rhs.norm());
}

}  // namespace

double CubicSubproblem::value(const Vector& y) const {
  if (!coupling) {
    return b.dot(y) + 0.5 * y.dot(Q * y) + H / 6.0 * cube(y.norm());
  }
  const Vector h = coupling->B * y;
  return b.dot(y) + 0.5 * y.dot(Q * y) + coupling->linear.dot(h) +
         0.5 * h.dot(coupling->weights.cwiseProduct(h)) +
         H / 6.0 * cube(h.norm());
}

void CubicSubproblem::validate() const {
  if (Q.rows() != Q.cols() || Q.rows() != b.size()) {
    throw std::invalid_argument("CubicSubproblem: dimension mismatch");
  }
  require_symmetric(Q, "CubicSubproblem");
  if (H < 0.0) throw std::invalid_argument("CubicSubproblem: H must be >= 0");
  if (coupling) {
    if (coupling->B.cols() != b.size() ||
        coupling->weights.size() != coupling->B.rows() ||
        coupling->linear.size() != coupling->B.rows()) {
      throw std::invalid_argument("CubicSubproblem: coupling shape mismatch");
    }
    if (coupling->weights.minCoeff() < 0.0) {
      throw std::invalid_argument(
          "CubicSubproblem: coupling weights must be nonnegative");
    }
  }
  if (bounds) {
    if (bounds->first.size() != b.size() || bounds->second.size() != b.size()) {
      throw std::invalid_argument("CubicSubproblem: bounds size mismatch");
    }
  }
}

SecularRoot root_find_secular(const std::function<double(double)>& phi,
                              double bracket_hint,
                              const std::function<double(double)>& phi_prime,
                              const SecularOptions& options) {
  SecularRoot out;
  const auto residual = [&](double t) { return t - phi(t); };

  double r0 = residual(0.0);
  ++out.iterations;
  if (std::abs(r0) <= options.tol) {
    out.tau = 0.0;
    return out;
  }
  if (r0 > 0.0) {
    // phi(0) < 0 cannot occur for the maps we solve; treat as malformed.
    throw numerical_error("root_find_secular: phi(0) < 0");
  }

  double lo = 0.0;
  double hi = std::max(bracket_hint, 1e-8);
  double r_hi = residual(hi);
  ++out.iterations;
  int expansions = 0;
  while (r_hi < 0.0) {
    if (++expansions > 60) {
      throw numerical_error("root_find_secular: bracket expansion failed");
    }
    lo = hi;
    hi *= 2.0;
    r_hi = residual(hi);
    ++out.iterations;
  }

  double t = hi;
  double r = r_hi;
  double t_prev = lo;
  double r_prev = r0;
  while (out.iterations < options.max_iterations) {
    if (std::abs(r) <= options.tol * (1.0 + t)) break;
    if (r < 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    double cand;
    if (phi_prime) {
      const double slope = 1.0 - phi_prime(t);  // >= 1 for non-increasing phi
      cand = t - r / slope;
    } else {
      const double dr = r - r_prev;
      cand = dr != 0.0 ? t - r * (t - t_prev) / dr : 0.5 * (lo + hi);
    }
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    t_prev = t;
    r_prev = r;
    t = cand;
    r = residual(t);
    ++out.iterations;
  }
  if (std::abs(r) > options.tol * (1.0 + t)) {
    throw numerical_error("root_find_secular: no convergence in budget");
  }
  out.tau = t;
  return out;
}

CubicSolution solve_unconstrained(const CubicSubproblem& sub) {
  sub.validate();
  if (sub.coupling || sub.bounds) {
    throw std::invalid_argument(
        "solve_unconstrained: plain subproblems only");
  }
  const int d = sub.dim();
  CubicSolution sol;

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sub.Q + sub.Q.transpose()));
  Vector lam = es.eigenvalues();
  const double lam_max = std::max(lam.maxCoeff(), 0.0);
  if (lam.minCoeff() < -1e-10 * std::max(1.0, lam_max)) {
    throw std::invalid_argument("solve_unconstrained: Q must be PSD");
  }
  lam = lam.cwiseMax(0.0);
  const Vector bt = es.eigenvectors().transpose() * sub.b;
  const double b_norm = sub.b.norm();

  Vector yt(d);
  if (sub.H == 0.0) {
    const double thr = kPinvThreshold * std::max(lam_max, 1e-300);
    for (int i = 0; i < d; ++i) {
      if (lam[i] > thr) {
        yt[i] = -bt[i] / lam[i];
      } else if (std::abs(bt[i]) > 1e-10 * (1.0 + b_norm)) {
        throw unbounded_error(
            "solve_unconstrained: H = 0 with b outside range(Q)");
      } else {
        yt[i] = 0.0;
      }
    }
  } else if (b_norm == 0.0) {
    yt.setZero();
  } else {
    const double lam_min = lam.minCoeff();
    // norm of y(t) with (Q + (H t / 2) I) y = -b, via the eigenbasis
    const auto phi = [&](double t) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double den = lam[i] + 0.5 * sub.H * t;
        if (den <= 0.0) {
          if (std::abs(bt[i]) > 0.0) return kInf;
          continue;
        }
        s += bt[i] * bt[i] / (den * den);
      }
      return std::sqrt(s);
    };
    const auto phi_prime = [&](double t) {
      const double p = phi(t);
      if (!(p > 0.0) || !std::isfinite(p)) return 0.0;
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double den = lam[i] + 0.5 * sub.H * t;
        if (den <= 0.0) continue;
        s += bt[i] * bt[i] / (den * den * den);
      }
      return -0.5 * sub.H * s / p;
    };
    // tau (lam_min + H tau / 2) = ||b|| brackets the root from above.
    const double hint =
        (-lam_min + std::sqrt(lam_min * lam_min + 2.0 * sub.H * b_norm)) /
        sub.H;
    // Tighter than the public default so the stationarity residual stays
    // below 1e-10 even for large H.
    const SecularRoot root =
        root_find_secular(phi, hint, phi_prime, SecularOptions{1e-14, 200});
    sol.root_iterations = root.iterations;
    for (int i = 0; i < d; ++i) {
      const double den = lam[i] + 0.5 * sub.H * root.tau;
      yt[i] = den > 0.0 ? -bt[i] / den : 0.0;
    }
  }

  sol.y = es.eigenvectors() * yt;
  sol.tau = sol.y.norm();
  sol.model_value = sub.value(sol.y);
  sol.kkt_residual =
      (sub.Q * sol.y + 0.5 * sub.H * sol.tau * sol.y + sub.b).norm();
  if (sol.kkt_residual > 1e-10 * (1.0 + b_norm)) {
    std::ostringstream msg;
    msg << "solve_unconstrained: stationarity residual " << sol.kkt_residual
        << " exceeds tolerance (d=" << d << ", H=" << sub.H << ")";
    throw numerical_error(msg.str());
  }
  return sol;
}

CubicSolution solve_affine_coupled(const CubicSubproblem& sub) {
  sub.validate();
  if (!sub.coupling) {
    throw std::invalid_argument("solve_affine_coupled: coupling required");
  }
  if (sub.bounds) {
    throw std::invalid_argument(
        "solve_affine_coupled: bounds are not supported on the coupled path");
  }
  if (sub.H <= 0.0) {
    throw std::invalid_argument("solve_affine_coupled: H must be > 0");
  }
  const Matrix& B = sub.coupling->B;
  const Matrix K0 =
      sub.Q + B.transpose() * sub.coupling->weights.asDiagonal() * B;
  const Matrix BtB = B.transpose() * B;
  const Vector b_comb = sub.b + B.transpose() * sub.coupling->linear;

  CubicSolution sol;
  const int d = sub.dim();
  if (b_comb.norm() == 0.0) {
    sol.y = Vector::Zero(d);
    sol.model_value = 0.0;
    return sol;
  }

  Vector x(d);
  const auto solve_at = [&](double t, Vector& out) {
    const Matrix Z = K0 + (0.5 * sub.H * t) * BtB;
    return solve_psd(Z, -b_comb, out);
  };
  // Inconsistent solves along the path behave like an infinite step norm,
  // which pushes the bracket to the right.
  const auto phi = [&](double t) {
    if (!solve_at(t, x)) return kInf;
    return (B * x).norm();
  };
  const auto phi_prime = [&](double t) {
    // assumes x holds the solve at t (phi was just evaluated there)
    const Vector v = B * x;
    const double p = v.norm();
    if (!(p > 0.0)) return 0.0;
    const Matrix Z = K0 + (0.5 * sub.H * t) * BtB;
    Vector u;
    if (!solve_psd(Z, B.transpose() * v, u)) return 0.0;
    return -0.5 * sub.H * v.dot(B * u) / p;
  };

  const SecularRoot root = root_find_secular(
      phi, 1.0 + b_comb.norm(), phi_prime, SecularOptions{1e-13, 200});
  sol.root_iterations = root.iterations;
  if (!solve_at(root.tau, x)) {
    throw numerical_error(
        "solve_affine_coupled: inconsistent linear system at the root");
  }
  sol.y = x;
  const Vector h = B * x;
  sol.tau = h.norm();
  sol.model_value = sub.value(sol.y);

  // KKT system of the coupled problem with multiplier mu recovered from the
  // h-stationarity equation.
  const Vector mu = sub.coupling->linear +
                    sub.coupling->weights.cwiseProduct(h) +
                    0.5 * sub.H * sol.tau * h;
  sol.kkt_residual = (sub.b + sub.Q * sol.y + B.transpose() * mu).norm();
  const double scale = 1.0 + b_comb.norm();
  if (std::abs(sol.tau - root.tau) > 1e-10 * (1.0 + sol.tau) ||
      sol.kkt_residual > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "solve_affine_coupled: residuals out of tolerance (fixed point "
        << std::abs(sol.tau - root.tau) << ", KKT " << sol.kkt_residual
        << ", d=" << d << ", m=" << B.rows() << ", H=" << sub.H << ")";
    throw numerical_error(msg.str());
  }
  return sol;
}

CubicSolution solve_fallback_composite(const CubicSubproblem& sub,
                                       const FallbackOptions& options) {
  sub.validate();
  if (sub.coupling) {
    throw std::invalid_argument(
        "solve_fallback_composite: coupling is not supported here");
  }
  const int d = sub.dim();
  const Vector lo = sub.bounds ? sub.bounds->first : Vector::Constant(d, -kInf);
  const Vector hi = sub.bounds ? sub.bounds->second : Vector::Constant(d, kInf);
  const auto clamp = [&](const Vector& v) {
    return v.cwiseMax(lo).cwiseMin(hi).eval();
  };

  const auto objective = [&](const Vector& y) { return sub.value(y); };
  const auto gradient = [&](const Vector& y) {
    return (sub.b + sub.Q * y + 0.5 * sub.H * y.norm() * y).eval();
  };

  CubicSolution sol;
  Vector y = Vector::Zero(d);
  // Warm start from the clamped unconstrained minimizer when it exists.
  try {
    CubicSubproblem plain;
    plain.Q = sub.Q;
    plain.b = sub.b;
    plain.H = sub.H;
    const CubicSolution inner = solve_unconstrained(plain);
    const Vector clamped = clamp(inner.y);
    if (objective(clamped) < objective(y)) y = clamped;
  } catch (const numerical_error&) {
  } catch (const std::invalid_argument&) {
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(sub.Q, Eigen::EigenvaluesOnly);
  const double q_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  double f = objective(y);
  double step = 1.0 / std::max(q_norm + sub.H * (y.norm() + 1.0), 1e-12);
  const double b_scale = 1.0 + sub.b.norm();

  bool reached = false;
  long it = 0;
  for (; it < options.max_iterations; ++it) {
    const Vector g = gradient(y);
    const double lip = q_norm + sub.H * (y.norm() + 1.0);
    const double t0 = 1.0 / std::max(lip, 1e-12);
    const Vector mapped = clamp(y - t0 * g);
    sol.kkt_residual = (y - mapped).norm() / t0;
    if (sol.kkt_residual <= options.tol * b_scale) {
      reached = true;
      break;
    }

    double t = std::min(step * 1.25, t0 * 16.0);
    Vector z = clamp(y - t * g);
    double fz = objective(z);
    int backtracks = 0;
    while (fz > f + g.dot(z - y) + 0.5 / t * (z - y).squaredNorm() &&
           backtracks < 60) {
      t *= 0.5;
      z = clamp(y - t * g);
      fz = objective(z);
      ++backtracks;
    }
    if (fz > f) break;  // rounding floor, no further monotone progress
    y = z;
    f = fz;
    step = t;
  }
  sol.inner_iterations = static_cast<int>(it);
  sol.to_tolerance = reached || sol.kkt_residual <= 1e-8 * b_scale;
  sol.y = y;
  sol.tau = y.norm();
  sol.model_value = f;
  return sol;
}

CubicSolution solve(const CubicSubproblem& sub) {
  if (sub.coupling) return solve_affine_coupled(sub);
  if (sub.bounds) return solve_fallback_composite(sub);
  return solve_unconstrained(sub);
}

}  // namespace bcn
