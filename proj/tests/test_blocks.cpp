#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "bcn/blocks.hpp"

using namespace bcn;

namespace {

Matrix random_symmetric(int n, Rng& rng) {
  Matrix A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      A(i, j) = rng.normal();
      A(j, i) = A(i, j);
    }
  }
  return A;
}

Vector random_vector(int n, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// All tau-subsets of [n], for enumeration oracles.
void enumerate_subsets(int n, int tau, std::vector<std::vector<int>>& out,
                       std::vector<int>& current, int next) {
  if (static_cast<int>(current.size()) == tau) {
    out.push_back(current);
    return;
  }
  for (int i = next; i < n; ++i) {
    current.push_back(i);
    enumerate_subsets(n, tau, out, current, i + 1);
    current.pop_back();
  }
}

std::vector<std::vector<int>> subsets(int n, int tau) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  enumerate_subsets(n, tau, out, current, 0);
  return out;
}

}  // namespace

TEST_CASE("partition bookkeeping") {
  const BlockPartition P = BlockPartition::from_sizes({2, 1, 3});
  CHECK(P.num_blocks() == 3);
  CHECK(P.total == 6);
  CHECK(P.offset(0) == 0);
  CHECK(P.offset(1) == 2);
  CHECK(P.offset(2) == 3);
  CHECK_THROWS_AS(BlockPartition::from_sizes({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(BlockPartition::from_sizes({}), std::invalid_argument);

  CHECK_THROWS_AS(IndexSet::of({0, 0}, 3), std::invalid_argument);
  CHECK_THROWS_AS(IndexSet::of({3}, 3), std::invalid_argument);
  CHECK(IndexSet::of({2, 0}, 3).members == std::vector<int>{0, 2});
}

TEST_CASE("restrict_vector basics") {
  const BlockPartition P = BlockPartition::uniform(3);
  Vector x(3);
  x << 1, 2, 3;
  const Vector r = restrict_vector(x, IndexSet::of({0, 2}, 3), P);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 3.0);
  CHECK(restrict_vector(x, IndexSet::all(3), P) == x);
  CHECK(restrict_vector(x, IndexSet::empty(), P).norm() == 0.0);
  CHECK_THROWS_AS(restrict_vector(Vector::Zero(2), IndexSet::all(3), P),
                  std::invalid_argument);
}

TEST_CASE("restrict_vector is an idempotent linear contraction") {
  Rng rng(11);
  const BlockPartition P = BlockPartition::from_sizes({2, 3, 1, 2});
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<int> members;
    for (int i = 0; i < 4; ++i) {
      if (rng.below(2)) members.push_back(i);
    }
    const IndexSet S = IndexSet::of(members, 4);
    const Vector x = random_vector(P.total, rng);
    const Vector y = random_vector(P.total, rng);
    const double a = rng.normal();
    const Vector once = restrict_vector(x, S, P);
    CHECK((restrict_vector(once, S, P) - once).norm() == 0.0);
    CHECK((restrict_vector((a * x + y).eval(), S, P) -
           (a * once + restrict_vector(y, S, P)))
              .norm() <= 1e-12);
    CHECK(once.norm() <= x.norm() + 1e-15);
  }
}

TEST_CASE("restrict_matrix basics and the pairing identity") {
  const BlockPartition unit2 = BlockPartition::uniform(2);
  const Matrix r =
      restrict_matrix(Matrix::Identity(2, 2), IndexSet::of({1}, 2), unit2);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(1, 1) == 1.0);

  Rng rng(5);
  const BlockPartition P = BlockPartition::from_sizes({2, 2});
  const Matrix A = random_symmetric(4, rng);
  CHECK((restrict_matrix(A, IndexSet::all(2), P) - A).norm() == 0.0);
  const IndexSet S = IndexSet::of({0}, 2);
  const Matrix AS = restrict_matrix(A, S, P);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector x = random_vector(4, rng);
    const Vector y = random_vector(4, rng);
    const double lhs = (AS * x).dot(y);
    const double rhs =
        (A * restrict_vector(x, S, P)).dot(restrict_vector(y, S, P));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("blockdiag") {
  const Matrix ones = Matrix::Ones(3, 3);
  const BlockPartition P = BlockPartition::from_sizes({2, 1});
  const Matrix bd = blockdiag(ones, P);
  CHECK(bd(0, 0) == 1.0);
  CHECK(bd(0, 1) == 1.0);
  CHECK(bd(1, 0) == 1.0);
  CHECK(bd(2, 2) == 1.0);
  CHECK(bd(0, 2) == 0.0);
  CHECK(bd(2, 1) == 0.0);

  Rng rng(3);
  const Matrix A = random_symmetric(3, rng);
  CHECK((blockdiag(A, BlockPartition::uniform(3)) -
         Matrix(A.diagonal().asDiagonal()))
            .norm() == 0.0);
  CHECK((blockdiag(A, BlockPartition::from_sizes({3})) - A).norm() == 0.0);

  // blockdiag(A) equals the sum of single-block restrictions
  Matrix sum = Matrix::Zero(3, 3);
  for (int i = 0; i < P.num_blocks(); ++i) {
    sum += restrict_matrix(A, IndexSet::of({i}, P.num_blocks()), P);
  }
  CHECK((blockdiag(A, P) - sum).norm() == 0.0);
}

TEST_CASE("gather/scatter round trip") {
  Rng rng(7);
  const BlockPartition P = BlockPartition::from_sizes({1, 2, 2});
  const IndexSet S = IndexSet::of({0, 2}, 3);
  const Vector x = random_vector(P.total, rng);
  const Vector compact = gather(x, S, P);
  CHECK(compact.size() == 3);
  CHECK((scatter(compact, S, P) - restrict_vector(x, S, P)).norm() == 0.0);
  const Matrix A = random_symmetric(P.total, rng);
  const Matrix compact_m = gather_matrix(A, S, P);
  CHECK(compact_m.rows() == 3);
  CHECK(compact_m(0, 0) == A(0, 0));
  CHECK(compact_m(1, 2) == A(3, 4));
}

TEST_CASE("draw: full sampling and determinism") {
  const BlockPartition P = BlockPartition::uniform(5);
  Rng rng(99);
  CHECK(draw(SamplingSpec::full(), P, rng).members ==
        IndexSet::all(5).members);
  CHECK(draw(SamplingSpec::tau_nice(5), P, rng).members ==
        IndexSet::all(5).members);

  Rng a(123), b(123);
  const SamplingSpec spec = SamplingSpec::tau_nice(2, 77);
  for (int rep = 0; rep < 50; ++rep) {
    CHECK(draw(spec, P, a).members == draw(spec, P, b).members);
  }
  CHECK_THROWS_AS(draw(SamplingSpec::tau_nice(6), P, a),
                  std::invalid_argument);
}

TEST_CASE("draw frequencies match the uniform law") {
  const int draws = 100000;
  {
    const BlockPartition P = BlockPartition::uniform(4);
    Rng rng(2024);
    std::vector<int> hits(4, 0);
    const SamplingSpec spec = SamplingSpec::singleton();
    for (int rep = 0; rep < draws; ++rep) {
      ++hits[static_cast<std::size_t>(draw(spec, P, rng).members[0])];
    }
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(double(hits[static_cast<std::size_t>(i)]) / draws -
                     0.25) <= 0.005);
    }
  }
  {
    const BlockPartition P = BlockPartition::uniform(3);
    Rng rng(2025);
    std::map<std::vector<int>, int> hits;
    const SamplingSpec spec = SamplingSpec::tau_nice(2);
    for (int rep = 0; rep < draws; ++rep) {
      ++hits[draw(spec, P, rng).members];
    }
    CHECK(hits.size() == 3);
    for (const auto& [pair, count] : hits) {
      CHECK(std::abs(double(count) / draws - 1.0 / 3.0) <= 0.01);
    }
  }
}

TEST_CASE("probability_matrix closed forms") {
  {
    const BlockPartition P = BlockPartition::uniform(3);
    const Matrix prob = probability_matrix(SamplingSpec::singleton(), P);
    CHECK((prob - Matrix::Identity(3, 3) / 3.0).norm() <= 1e-15);
  }
  {
    const BlockPartition P = BlockPartition::from_sizes({2, 3});
    const Matrix prob = probability_matrix(SamplingSpec::full(), P);
    CHECK((prob - Matrix::Ones(5, 5)).norm() <= 1e-15);
  }
  {
    const BlockPartition P = BlockPartition::uniform(3);
    const Matrix prob = probability_matrix(SamplingSpec::tau_nice(2), P);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(prob(i, j) ==
              doctest::Approx(i == j ? 2.0 / 3.0 : 1.0 / 3.0).epsilon(1e-14));
      }
    }
  }
  // constant diagonal tau/n for a blocked partition
  {
    const BlockPartition P = BlockPartition::from_sizes({2, 1, 3, 2});
    const Matrix prob = probability_matrix(SamplingSpec::tau_nice(3), P);
    for (int i = 0; i < P.total; ++i) {
      CHECK(prob(i, i) == doctest::Approx(3.0 / 4.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("probability_matrix equals the subset-enumeration average") {
  Rng rng(31);
  for (int n = 1; n <= 5; ++n) {
    const BlockPartition P = BlockPartition::from_sizes(
        [&] {
          std::vector<int> sizes;
          for (int i = 0; i < n; ++i) {
            sizes.push_back(1 + static_cast<int>(rng.below(2)));
          }
          return sizes;
        }());
    for (int tau = 1; tau <= n; ++tau) {
      const auto all = subsets(n, tau);
      Matrix avg = Matrix::Zero(P.total, P.total);
      for (const auto& ids : all) {
        avg += restrict_matrix(Matrix::Ones(P.total, P.total),
                               IndexSet::of(ids, n), P);
      }
      avg /= double(all.size());
      const Matrix prob = probability_matrix(SamplingSpec::tau_nice(tau), P);
      CHECK((avg - prob).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("expected_submatrix: closed form, Hadamard identity, Monte Carlo") {
  Rng rng(13);
  const BlockPartition P = BlockPartition::uniform(3);
  const Matrix A = random_symmetric(3, rng);

  CHECK((expected_submatrix(A, SamplingSpec::full(), P) - A).norm() == 0.0);
  CHECK((expected_submatrix(A, SamplingSpec::singleton(), P) -
         blockdiag(A, P) / 3.0)
            .norm() <= 1e-15);

  const SamplingSpec spec = SamplingSpec::tau_nice(2);
  const Matrix expected = expected_submatrix(A, spec, P);

  // exact Hadamard identity
  const Matrix hadamard = A.cwiseProduct(probability_matrix(spec, P));
  CHECK((expected - hadamard).cwiseAbs().maxCoeff() == 0.0);

  // closed form tau/n ((1-gamma) blockdiag + gamma full)
  const double gamma = (2.0 - 1.0) / (3.0 - 1.0);
  const Matrix closed =
      (2.0 / 3.0) * ((1.0 - gamma) * blockdiag(A, P) + gamma * A);
  CHECK((expected - closed).cwiseAbs().maxCoeff() <= 1e-14);

  // Monte Carlo oracle
  Matrix mc = Matrix::Zero(3, 3);
  Rng mc_rng(606);
  const int draws = 200000;
  for (int rep = 0; rep < draws; ++rep) {
    mc += restrict_matrix(A, draw(spec, P, mc_rng), P);
  }
  mc /= double(draws);
  CHECK((mc - expected).norm() <= 0.02 * expected.norm());
}
