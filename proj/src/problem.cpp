#include "bcn/problem.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace bcn {

SmoothTerm SmoothTerm::quadratic(Matrix M, Vector q, double r) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("SmoothTerm::quadratic: M must be square");
  }
  SmoothTerm g;
  g.is_quadratic = true;
  g.M = std::move(M);
  g.q = q.size() ? std::move(q) : Vector::Zero(g.M.rows());
  if (g.q.size() != g.M.rows()) {
    throw std::invalid_argument("SmoothTerm::quadratic: q dimension mismatch");
  }
  g.r = r;
  g.G = g.M;
  g.A = g.M;
  return g;
}

SmoothTerm SmoothTerm::general(std::function<double(const Vector&)> value,
                               std::function<Vector(const Vector&)> grad,
                               Matrix G, Matrix A) {
  if (G.rows() != G.cols() || A.rows() != A.cols() || G.rows() != A.rows()) {
    throw std::invalid_argument("SmoothTerm::general: bad curvature shapes");
  }
  SmoothTerm g;
  g.is_quadratic = false;
  g.value_fn = std::move(value);
  g.grad_fn = std::move(grad);
  g.G = std::move(G);
  g.A = std::move(A);
  return g;
}

SmoothTerm SmoothTerm::zero(int dim) {
  return quadratic(Matrix::Zero(dim, dim));
}

double SmoothTerm::value(const Vector& x) const {
  if (is_quadratic) return 0.5 * x.dot(M * x) + q.dot(x) + r;
  return value_fn(x);
}

Vector SmoothTerm::gradient(const Vector& x) const {
  if (is_quadratic) return M * x + q;
  return grad_fn(x);
}

ConstraintSet ConstraintSet::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) {
    throw std::invalid_argument("ConstraintSet::box: bound size mismatch");
  }
  ConstraintSet c;
  c.kind = Kind::box;
  c.lower = std::move(lo);
  c.upper = std::move(hi);
  return c;
}

ConstraintSet ConstraintSet::affine(Matrix coupling, int head_dim) {
  if (coupling.cols() != head_dim) {
    throw std::invalid_argument("ConstraintSet::affine: shape mismatch");
  }
  ConstraintSet c;
  c.kind = Kind::affine;
  c.coupling = std::move(coupling);
  c.head_dim = head_dim;
  return c;
}

void CompositeProblem::validate() const {
  const int n = partition.num_blocks();
  const int N = partition.total;
  if (g.A.rows() != N) {
    throw std::invalid_argument("CompositeProblem: g dimension != partition");
  }
  if (!phi.empty() && static_cast<int>(phi.size()) != n) {
    throw std::invalid_argument("CompositeProblem: phi list length != n");
  }
  if (!psi.empty() && static_cast<int>(psi.size()) != n) {
    throw std::invalid_argument("CompositeProblem: psi list length != n");
  }
  for (int i = 0; i < n && !phi.empty(); ++i) {
    if (phi[i] && phi[i]->dim != partition.size(i)) {
      throw std::invalid_argument("CompositeProblem: phi block dim mismatch");
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> esG(g.G, Eigen::EigenvaluesOnly);
  if (esG.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("CompositeProblem: G must be PSD");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> esAG(g.A - g.G,
                                             Eigen::EigenvaluesOnly);
  if (esAG.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("CompositeProblem: need G <= A");
  }
}

bool CompositeProblem::feasible(const Vector& x, double tol) const {
  if (x.size() != partition.total) return false;
  for (int i = 0; i < static_cast<int>(psi.size()); ++i) {
    if (psi[i].kind != SimpleTerm::Kind::box) continue;
    const auto seg = x.segment(partition.offset(i), partition.size(i));
    if (seg.minCoeff() < psi[i].lower - tol ||
        seg.maxCoeff() > psi[i].upper + tol) {
      return false;
    }
  }
  switch (constraint.kind) {
    case ConstraintSet::Kind::reals:
      return true;
    case ConstraintSet::Kind::box:
      return (x - constraint.lower).minCoeff() >= -tol &&
             (constraint.upper - x).minCoeff() >= -tol;
    case ConstraintSet::Kind::affine: {
      const int d = constraint.head_dim;
      const Vector residual =
          x.tail(x.size() - d) - constraint.coupling * x.head(d);
      return residual.cwiseAbs().maxCoeff() <= tol;
    }
  }
  return false;
}

double CompositeProblem::objective(const Vector& x) const {
  if (x.size() != partition.total) {
    throw std::invalid_argument("objective: dimension mismatch");
  }
  if (!feasible(x)) return kInf;
  double f = g.value(x);
  for (int i = 0; i < static_cast<int>(phi.size()); ++i) {
    if (phi[i]) {
      f += phi[i]->value(x.segment(partition.offset(i), partition.size(i)));
    }
  }
  return f;
}

Vector CompositeProblem::smooth_gradient(const Vector& x) const {
  Vector grad = g.gradient(x);
  for (int i = 0; i < static_cast<int>(phi.size()); ++i) {
    if (phi[i]) {
      grad.segment(partition.offset(i), partition.size(i)) +=
          phi[i]->gradient(x.segment(partition.offset(i), partition.size(i)));
    }
  }
  return grad;
}

std::optional<double> CompositeProblem::block_hess_lipschitz(int i) const {
  if (phi.empty() || !phi[static_cast<std::size_t>(i)]) return 0.0;
  return phi[static_cast<std::size_t>(i)]->hess_lipschitz();
}

std::optional<double> CompositeProblem::hess_lipschitz_max() const {
  return hess_lipschitz_max(IndexSet::all(partition.num_blocks()));
}

std::optional<double> CompositeProblem::hess_lipschitz_max(
    const IndexSet& S) const {
  double h = 0.0;
  for (int i : S.members) {
    const auto hi = block_hess_lipschitz(i);
    if (!hi) return std::nullopt;
    h = std::max(h, *hi);
  }
  return h;
}

CubicModelData build_model(const CompositeProblem& problem, const Vector& x,
                           const IndexSet& S, double H) {
  const BlockPartition& P = problem.partition;
  if (x.size() != P.total) {
    throw std::invalid_argument("build_model: dimension mismatch");
  }
  if (!problem.feasible(x)) {
    throw std::invalid_argument("build_model: anchor point infeasible");
  }
  if (H < 0.0) throw std::invalid_argument("build_model: H must be >= 0");
  if (H == 0.0) {
    const auto hmax = problem.hess_lipschitz_max(S);
    if (!hmax || *hmax > 0.0) {
      throw std::invalid_argument(
          "build_model: H = 0 needs zero Hessian-Lipschitz blocks");
    }
  }
  if (problem.constraint.kind == ConstraintSet::Kind::affine) {
    throw std::invalid_argument(
        "build_model: affine-coupled problems use the coupled solver path");
  }

  CubicModelData model;
  model.anchor = x;
  model.blocks = S;
  model.h_coeff = H;
  model.f_anchor = problem.objective(x);
  model.coords = selected_coordinates(S, P);
  const int d = static_cast<int>(model.coords.size());

  const Vector g_grad = problem.g.gradient(x);
  model.grad.resize(d);
  for (int r = 0; r < d; ++r) model.grad[r] = g_grad[model.coords[r]];

  model.quad.resize(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      model.quad(r, c) = problem.g.A(model.coords[r], model.coords[c]);
    }
  }

  // phi enters through its blockwise gradient and Hessian.
  int pos = 0;
  for (int i : S.members) {
    const int sz = P.size(i);
    if (!problem.phi.empty() && problem.phi[static_cast<std::size_t>(i)]) {
      const auto& bl = *problem.phi[static_cast<std::size_t>(i)];
      const Vector xb = x.segment(P.offset(i), sz);
      model.grad.segment(pos, sz) += bl.gradient(xb);
      model.quad.block(pos, pos, sz, sz) += bl.hessian(xb);
    }
    pos += sz;
  }

  // Step bounds collected from psi boxes and a box constraint set.
  model.lower = Vector::Constant(d, -kInf);
  model.upper = Vector::Constant(d, kInf);
  pos = 0;
  for (int i : S.members) {
    const int sz = P.size(i);
    if (!problem.psi.empty() &&
        problem.psi[static_cast<std::size_t>(i)].kind ==
            SimpleTerm::Kind::box) {
      const auto& box = problem.psi[static_cast<std::size_t>(i)];
      for (int j = 0; j < sz; ++j) {
        const double xj = x[P.offset(i) + j];
        model.lower[pos + j] = std::max(model.lower[pos + j], box.lower - xj);
        model.upper[pos + j] = std::min(model.upper[pos + j], box.upper - xj);
      }
    }
    pos += sz;
  }
  if (problem.constraint.kind == ConstraintSet::Kind::box) {
    for (int r = 0; r < d; ++r) {
      const int j = model.coords[r];
      model.lower[r] = std::max(model.lower[r], problem.constraint.lower[j] - x[j]);
      model.upper[r] = std::min(model.upper[r], problem.constraint.upper[j] - x[j]);
    }
  }
  for (int r = 0; r < d; ++r) {
    if (std::isfinite(model.lower[r]) || std::isfinite(model.upper[r])) {
      model.bounded = true;
    }
  }
  // The anchor is feasible within tolerance only; keep the zero step inside.
  for (int r = 0; r < d && model.bounded; ++r) {
    model.lower[r] = std::min(model.lower[r], 0.0);
    model.upper[r] = std::max(model.upper[r], 0.0);
  }
  return model;
}

double evaluate_model(const CubicModelData& model, const Vector& y) {
  if (y.size() != model.anchor.size()) {
    throw std::invalid_argument("evaluate_model: dimension mismatch");
  }
  // y must be supported on the model's blocks.
  std::vector<bool> selected(static_cast<std::size_t>(y.size()), false);
  for (int c : model.coords) selected[static_cast<std::size_t>(c)] = true;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (!selected[static_cast<std::size_t>(j)] && y[j] != 0.0) {
      throw std::invalid_argument("evaluate_model: y not supported on S");
    }
  }
  const int d = static_cast<int>(model.coords.size());
  Vector yc(d);
  for (int r = 0; r < d; ++r) yc[r] = y[model.coords[r]];
  if (model.bounded) {
    for (int r = 0; r < d; ++r) {
      if (yc[r] < model.lower[r] - kFeasTol ||
          yc[r] > model.upper[r] + kFeasTol) {
        return kInf;
      }
    }
  }
  return model.f_anchor + model.grad.dot(yc) +
         0.5 * yc.dot(model.quad * yc) + model.h_coeff / 6.0 * cube(yc.norm());
}

CubicModelData build_sketched_model(const SketchedOracle& oracle,
                                    const BlockPartition& partition,
                                    const Vector& x, const IndexSet& S,
                                    double H) {
  CubicModelData model;
  model.anchor = x;
  model.blocks = S;
  model.h_coeff = H;
  model.f_anchor = oracle.value(x);
  model.coords = selected_coordinates(S, partition);
  const int d = static_cast<int>(model.coords.size());

  const Vector grad = oracle.gradient(x);
  model.grad.resize(d);
  for (int r = 0; r < d; ++r) model.grad[r] = grad[model.coords[r]];

  // One Hessian-vector product per selected coordinate.
  model.quad.resize(d, d);
  Vector unit = Vector::Zero(x.size());
  for (int c = 0; c < d; ++c) {
    unit[model.coords[c]] = 1.0;
    const Vector column = oracle.hess_vec(x, unit);
    unit[model.coords[c]] = 0.0;
    for (int r = 0; r < d; ++r) model.quad(r, c) = column[model.coords[r]];
  }
  model.quad = 0.5 * (model.quad + model.quad.transpose()).eval();

  model.lower = Vector::Constant(d, -kInf);
  model.upper = Vector::Constant(d, kInf);
  return model;
}

}  // namespace bcn
