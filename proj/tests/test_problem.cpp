#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "bcn/problem.hpp"
#include "bcn/rng.hpp"

using namespace bcn;

namespace {

Matrix random_psd(int d, Rng& rng, double eig_lo = 0.0, double eig_hi = 2.0) {
  Matrix basis(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) basis(i, j) = rng.normal();
  }
  const Matrix Q = Eigen::HouseholderQR<Matrix>(basis).householderQ();
  Vector eig(d);
  for (int i = 0; i < d; ++i) {
    eig[i] = eig_lo + (eig_hi - eig_lo) * rng.uniform01();
  }
  return Q * eig.asDiagonal() * Q.transpose();
}

Vector random_vector(int d, Rng& rng, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

// Random mixed-loss problem on a random partition, quadratic g.
CompositeProblem random_problem(Rng& rng, int max_blocks = 6,
                                bool with_box = false,
                                bool ensure_positive_constant = false) {
  std::vector<int> sizes;
  const int n = 2 + static_cast<int>(rng.below(max_blocks - 1));
  for (int i = 0; i < n; ++i) sizes.push_back(1 + static_cast<int>(rng.below(3)));
  CompositeProblem problem;
  problem.partition = BlockPartition::from_sizes(sizes);
  const int N = problem.partition.total;
  problem.g = SmoothTerm::quadratic(random_psd(N, rng),
                                    random_vector(N, rng, 0.4));
  problem.phi.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int sz = problem.partition.size(i);
    const int kind = static_cast<int>(rng.below(4));
    if (kind == 0) continue;  // no loss on this block
    ScalarLoss loss = ScalarLoss::logistic();
    if (kind == 1) loss = ScalarLoss::quadratic(0.5 + rng.uniform01());
    if (kind == 2) loss = ScalarLoss::cubed_abs(0.5 + rng.uniform01());
    if (sz == 1 && rng.below(2)) {
      problem.phi[static_cast<std::size_t>(i)] = BlockLoss::scalar(loss);
    } else {
      problem.phi[static_cast<std::size_t>(i)] =
          BlockLoss::along(loss, random_vector(sz, rng));
    }
  }
  if (ensure_positive_constant) {
    problem.phi[0] = BlockLoss::along(ScalarLoss::logistic(),
                                      random_vector(sizes[0], rng));
  }
  if (with_box) {
    problem.psi.assign(static_cast<std::size_t>(n), SimpleTerm::none());
    problem.psi[0] = SimpleTerm::box(-1.5, 1.5);
  }
  return problem;
}

Vector feasible_point(const CompositeProblem& problem, Rng& rng,
                      double scale = 0.5) {
  Vector x = random_vector(problem.partition.total, rng, scale);
  for (int i = 0; i < static_cast<int>(problem.psi.size()); ++i) {
    if (problem.psi[static_cast<std::size_t>(i)].kind != SimpleTerm::Kind::box)
      continue;
    const auto& box = problem.psi[static_cast<std::size_t>(i)];
    auto seg = x.segment(problem.partition.offset(i),
                         problem.partition.size(i));
    seg = seg.cwiseMax(box.lower).cwiseMin(box.upper);
  }
  return x;
}

// Model value recomputed term by term with full-size restriction operators.
double model_by_definition(const CompositeProblem& problem, const Vector& x,
                           const IndexSet& S, double H, const Vector& y) {
  const BlockPartition& P = problem.partition;
  double value = problem.objective(x);
  const Vector gs = restrict_vector(problem.g.gradient(x), S, P);
  value += gs.dot(y);
  const Matrix AS = restrict_matrix(problem.g.A, S, P);
  value += 0.5 * y.dot(AS * y);
  for (int i : S.members) {
    if (problem.phi.empty() || !problem.phi[static_cast<std::size_t>(i)]) {
      continue;
    }
    const auto& bl = *problem.phi[static_cast<std::size_t>(i)];
    const Vector xb = x.segment(P.offset(i), P.size(i));
    const Vector yb = y.segment(P.offset(i), P.size(i));
    value += bl.gradient(xb).dot(yb) + 0.5 * yb.dot(bl.hessian(xb) * yb);
  }
  value += H / 6.0 * cube(restrict_vector(y, S, P).norm());
  return value;
}

}  // namespace

TEST_CASE("objective basics") {
  CompositeProblem problem;
  problem.partition = BlockPartition::uniform(2);
  problem.g = SmoothTerm::quadratic(Matrix::Identity(2, 2));
  Vector x(2);
  x << 3, 4;
  CHECK(problem.objective(x) == doctest::Approx(12.5));

  problem.psi = {SimpleTerm::box(-1.0, 1.0), SimpleTerm::none()};
  CHECK(problem.objective(x) == kInf);  // box violated
  x << 0.5, 4;
  CHECK(std::isfinite(problem.objective(x)));
}

TEST_CASE("validation rejects bad curvature ordering") {
  CompositeProblem problem;
  problem.partition = BlockPartition::uniform(2);
  problem.g = SmoothTerm::general(
      [](const Vector& x) { return x.squaredNorm(); },
      [](const Vector& x) { return Vector(2.0 * x); },
      2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2));  // G > A
  CHECK_THROWS_AS(problem.validate(), std::invalid_argument);
}

TEST_CASE("model matches a term-by-term re-evaluation") {
  Rng rng(42);
  for (int rep = 0; rep < 12; ++rep) {
    const CompositeProblem problem = random_problem(rng);
    const int n = problem.partition.num_blocks();
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
      if (rng.below(2)) ids.push_back(i);
    }
    if (ids.empty()) ids.push_back(0);
    const IndexSet S = IndexSet::of(ids, n);
    const Vector x = feasible_point(problem, rng);
    const double H = 0.5 + rng.uniform01();
    const CubicModelData model = build_model(problem, x, S, H);

    CHECK(evaluate_model(model, Vector::Zero(problem.partition.total)) ==
          doctest::Approx(problem.objective(x)).epsilon(1e-14));

    for (int probe = 0; probe < 20; ++probe) {
      const Vector y = restrict_vector(
          random_vector(problem.partition.total, rng, 0.6), S,
          problem.partition);
      const double direct = model_by_definition(problem, x, S, H, y);
      CHECK(evaluate_model(model, y) ==
            doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("empty sample gives a constant model") {
  Rng rng(43);
  const CompositeProblem problem = random_problem(rng);
  const Vector x = feasible_point(problem, rng);
  const CubicModelData model =
      build_model(problem, x, IndexSet::empty(), 1.0);
  const Vector zero = Vector::Zero(problem.partition.total);
  CHECK(evaluate_model(model, zero) ==
        doctest::Approx(problem.objective(x)).epsilon(1e-14));
}

TEST_CASE("model preconditions") {
  Rng rng(44);
  const CompositeProblem problem = random_problem(rng, 4, false, true);
  const Vector x = feasible_point(problem, rng);
  const IndexSet S = IndexSet::all(problem.partition.num_blocks());
  CHECK_THROWS_AS(build_model(problem, x, S, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_model(problem, x, S, -1.0), std::invalid_argument);

  const CubicModelData model = build_model(problem, x, S, 1.0);
  Vector off = Vector::Zero(problem.partition.total);
  // support violation
  std::vector<bool> in_s(static_cast<std::size_t>(problem.partition.total));
  for (int c : model.coords) in_s[static_cast<std::size_t>(c)] = true;
  for (int j = 0; j < problem.partition.total; ++j) {
    if (!in_s[static_cast<std::size_t>(j)]) {
      off[j] = 1.0;
      CHECK_THROWS_AS(evaluate_model(model, off), std::invalid_argument);
      break;
    }
  }
}

TEST_CASE("upper bound for H at the selected block constants") {
  Rng rng(45);
  int checked = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const CompositeProblem problem = random_problem(rng, 5, true, true);
    const int n = problem.partition.num_blocks();
    const Vector x = feasible_point(problem, rng);
    std::vector<int> ids = {0};
    for (int i = 1; i < n; ++i) {
      if (rng.below(2)) ids.push_back(i);
    }
    const IndexSet S = IndexSet::of(ids, n);
    const double H = problem.hess_lipschitz_max(S).value();
    REQUIRE(H > 0.0);
    const CubicModelData model = build_model(problem, x, S, H);
    const double fx = problem.objective(x);
    for (int probe = 0; probe < 100; ++probe) {
      Vector y = restrict_vector(
          random_vector(problem.partition.total, rng, 0.8), S,
          problem.partition);
      // keep x + y feasible for box terms
      for (int i : S.members) {
        if (problem.psi.empty() ||
            problem.psi[static_cast<std::size_t>(i)].kind !=
                SimpleTerm::Kind::box) {
          continue;
        }
        const auto& box = problem.psi[static_cast<std::size_t>(i)];
        for (int j = 0; j < problem.partition.size(i); ++j) {
          const int c = problem.partition.offset(i) + j;
          y[c] = std::min(std::max(x[c] + y[c], box.lower), box.upper) - x[c];
        }
      }
      const double lhs = problem.objective(x + y);
      const double rhs = evaluate_model(model, y);
      CHECK(lhs <= rhs + 1e-10 * (1.0 + std::abs(fx)));
      ++checked;
    }
  }
  CHECK(checked == 1000);
}

TEST_CASE("second-order approximation bound for the separable part") {
  Rng rng(46);
  for (int rep = 0; rep < 10; ++rep) {
    const CompositeProblem problem = random_problem(rng, 5, false, true);
    const int n = problem.partition.num_blocks();
    const BlockPartition& P = problem.partition;
    std::vector<int> ids = {0};
    for (int i = 1; i < n; ++i) {
      if (rng.below(2)) ids.push_back(i);
    }
    const IndexSet S = IndexSet::of(ids, n);
    const Vector x = random_vector(P.total, rng, 0.5);
    const Vector h =
        restrict_vector(random_vector(P.total, rng, 0.5), S, P);
    double phi_x = 0.0, phi_xh = 0.0, taylor = 0.0, h_max = 0.0;
    for (int i : S.members) {
      if (!problem.phi[static_cast<std::size_t>(i)]) continue;
      const auto& bl = *problem.phi[static_cast<std::size_t>(i)];
      const Vector xb = x.segment(P.offset(i), P.size(i));
      const Vector hb = h.segment(P.offset(i), P.size(i));
      phi_x += bl.value(xb);
      phi_xh += bl.value(xb + hb);
      taylor += bl.gradient(xb).dot(hb) + 0.5 * hb.dot(bl.hessian(xb) * hb);
      h_max = std::max(h_max, bl.hess_lipschitz().value());
    }
    const double lhs = std::abs(phi_xh - phi_x - taylor);
    CHECK(lhs <= h_max * cube(h.norm()) + 1e-12);
  }
}

TEST_CASE("model gradient at zero matches finite differences") {
  Rng rng(47);
  const CompositeProblem problem = random_problem(rng, 5, false, true);
  const int n = problem.partition.num_blocks();
  const IndexSet S = IndexSet::all(n);
  const Vector x = feasible_point(problem, rng);
  const CubicModelData model = build_model(problem, x, S, 1.0);
  const Vector smooth = problem.smooth_gradient(x);
  const double h = 1e-6;
  for (int c = 0; c < problem.partition.total; ++c) {
    Vector y = Vector::Zero(problem.partition.total);
    y[c] = h;
    const double up = evaluate_model(model, y);
    y[c] = -h;
    const double down = evaluate_model(model, y);
    const double fd = (up - down) / (2.0 * h);
    CHECK(fd == doctest::Approx(smooth[c]).epsilon(1e-5));
  }
}

TEST_CASE("sketched model equals the structured model for quadratic g") {
  Rng rng(48);
  const int N = 5;
  CompositeProblem problem;
  problem.partition = BlockPartition::from_sizes({2, 1, 2});
  const Matrix M = random_psd(N, rng, 0.1, 2.0);
  const Vector q = random_vector(N, rng);
  problem.g = SmoothTerm::quadratic(M, q);

  SketchedOracle oracle;
  oracle.value = [&](const Vector& x) { return problem.objective(x); };
  oracle.gradient = [&](const Vector& x) { return problem.g.gradient(x); };
  oracle.hess_vec = [&](const Vector&, const Vector& v) {
    return Vector(M * v);
  };

  const Vector x = random_vector(N, rng);
  const IndexSet S = IndexSet::of({0, 2}, 3);
  const CubicModelData structured = build_model(problem, x, S, 1.5);
  const CubicModelData sketched =
      build_sketched_model(oracle, problem.partition, x, S, 1.5);
  for (int probe = 0; probe < 10; ++probe) {
    const Vector y =
        restrict_vector(random_vector(N, rng), S, problem.partition);
    CHECK(evaluate_model(structured, y) ==
          doctest::Approx(evaluate_model(sketched, y)).epsilon(1e-12));
  }
}

TEST_CASE("sketched model Hessian block matches finite differences") {
  // sum of logistic terms in each coordinate
  const int N = 3;
  const auto value = [](const Vector& x) {
    double f = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      f += eval012(ScalarLoss::logistic(), x[i]).value;
    }
    return f;
  };
  SketchedOracle oracle;
  oracle.value = value;
  oracle.gradient = [](const Vector& x) {
    Vector g(x.size());
    for (int i = 0; i < x.size(); ++i) {
      g[i] = eval012(ScalarLoss::logistic(), x[i]).d1;
    }
    return g;
  };
  oracle.hess_vec = [](const Vector& x, const Vector& v) {
    Vector out(x.size());
    for (int i = 0; i < x.size(); ++i) {
      out[i] = eval012(ScalarLoss::logistic(), x[i]).d2 * v[i];
    }
    return out;
  };
  Vector x(N);
  x << 0.2, -0.7, 1.1;
  const BlockPartition P = BlockPartition::uniform(N);
  const IndexSet S = IndexSet::all(N);
  const CubicModelData model = build_sketched_model(oracle, P, x, S, 1.0);

  const double h = 1e-4;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      Vector a = x, b = x, c = x, d = x;
      a[i] += h; a[j] += h;
      b[i] += h; b[j] -= h;
      c[i] -= h; c[j] += h;
      d[i] -= h; d[j] -= h;
      const double fd =
          (value(a) - value(b) - value(c) + value(d)) / (4.0 * h * h);
      CHECK(model.quad(i, j) == doctest::Approx(fd).epsilon(1e-4));
    }
  }

  // full sample: the model is the classical cubic one; spot check at a point
  Vector y(N);
  y << 0.1, 0.05, -0.2;
  double direct = value(x) + oracle.gradient(x).dot(y);
  for (int i = 0; i < N; ++i) {
    direct += 0.5 * eval012(ScalarLoss::logistic(), x[i]).d2 * y[i] * y[i];
  }
  direct += 1.0 / 6.0 * cube(y.norm());
  CHECK(evaluate_model(model, y) == doctest::Approx(direct).epsilon(1e-10));
}
