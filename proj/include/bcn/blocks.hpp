#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bcn/rng.hpp"
#include "bcn/types.hpp"

namespace bcn {

// Fixed partition of the N coordinates into n contiguous blocks.
struct BlockPartition {
  std::vector<int> sizes;
  std::vector<int> offsets;  // prefix sums; offsets[i] is the start of block i
  int total = 0;

  static BlockPartition from_sizes(std::vector<int> block_sizes) {
    if (block_sizes.empty()) {
      throw std::invalid_argument("BlockPartition: need at least one block");
    }
    BlockPartition p;
    p.sizes = std::move(block_sizes);
    p.offsets.resize(p.sizes.size());
    int acc = 0;
    for (std::size_t i = 0; i < p.sizes.size(); ++i) {
      if (p.sizes[i] < 1) {
        throw std::invalid_argument("BlockPartition: block sizes must be >= 1");
      }
      p.offsets[i] = acc;
      acc += p.sizes[i];
    }
    p.total = acc;
    return p;
  }

  // n blocks of equal size.
  static BlockPartition uniform(int n_blocks, int block_size = 1) {
    return from_sizes(std::vector<int>(static_cast<std::size_t>(n_blocks),
                                       block_size));
  }

  int num_blocks() const { return static_cast<int>(sizes.size()); }
  int size(int i) const { return sizes[static_cast<std::size_t>(i)]; }
  int offset(int i) const { return offsets[static_cast<std::size_t>(i)]; }
};

// Sorted duplicate-free subset of block indices.
struct IndexSet {
  std::vector<int> members;

  static IndexSet of(std::vector<int> ids, int n_blocks) {
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= n_blocks) {
        throw std::invalid_argument("IndexSet: block index out of range");
      }
      if (i > 0 && ids[i] == ids[i - 1]) {
        throw std::invalid_argument("IndexSet: duplicate block index");
      }
    }
    return IndexSet{std::move(ids)};
  }

  static IndexSet all(int n_blocks) {
    std::vector<int> ids(static_cast<std::size_t>(n_blocks));
    std::iota(ids.begin(), ids.end(), 0);
    return IndexSet{std::move(ids)};
  }

  static IndexSet empty() { return IndexSet{}; }

  int size() const { return static_cast<int>(members.size()); }
  bool contains(int i) const {
    return std::binary_search(members.begin(), members.end(), i);
  }
};

// Global coordinate indices covered by the blocks of S, in increasing order.
// This is the embedding map between compact and full-size representations.
inline std::vector<int> selected_coordinates(const IndexSet& S,
                                             const BlockPartition& P) {
  std::vector<int> coords;
  for (int i : S.members) {
    for (int j = 0; j < P.size(i); ++j) coords.push_back(P.offset(i) + j);
  }
  return coords;
}

namespace detail {
inline void check_vector_dims(Eigen::Index len, const BlockPartition& P,
                              const char* who) {
  if (len != P.total) {
    throw std::invalid_argument(std::string(who) +
                                ": vector length does not match partition");
  }
}
inline void check_matrix_dims(Eigen::Index rows, Eigen::Index cols,
                              const BlockPartition& P, const char* who) {
  if (rows != P.total || cols != P.total) {
    throw std::invalid_argument(std::string(who) +
                                ": matrix shape does not match partition");
  }
}
}  // namespace detail

// x(S): keep blocks in S, zero out the rest.
template <class Derived>
Vector restrict_vector(const Eigen::MatrixBase<Derived>& x, const IndexSet& S,
                       const BlockPartition& P) {
  detail::check_vector_dims(x.size(), P, "restrict_vector");
  Vector out = Vector::Zero(P.total);
  for (int i : S.members) {
    out.segment(P.offset(i), P.size(i)) = x.segment(P.offset(i), P.size(i));
  }
  return out;
}

// A(S): keep entries whose row and column both lie in blocks of S.
// Satisfies <A(S) x, y> = <A x(S), y(S)> for all x, y.
template <class Derived>
Matrix restrict_matrix(const Eigen::MatrixBase<Derived>& A, const IndexSet& S,
                       const BlockPartition& P) {
  detail::check_matrix_dims(A.rows(), A.cols(), P, "restrict_matrix");
  Matrix out = Matrix::Zero(P.total, P.total);
  for (int i : S.members) {
    for (int j : S.members) {
      out.block(P.offset(i), P.offset(j), P.size(i), P.size(j)) =
          A.block(P.offset(i), P.offset(j), P.size(i), P.size(j));
    }
  }
  return out;
}

// Keep diagonal blocks, null the off-diagonal ones.
template <class Derived>
Matrix blockdiag(const Eigen::MatrixBase<Derived>& A,
                 const BlockPartition& P) {
  detail::check_matrix_dims(A.rows(), A.cols(), P, "blockdiag");
  Matrix out = Matrix::Zero(P.total, P.total);
  for (int i = 0; i < P.num_blocks(); ++i) {
    out.block(P.offset(i), P.offset(i), P.size(i), P.size(i)) =
        A.block(P.offset(i), P.offset(i), P.size(i), P.size(i));
  }
  return out;
}

// Compact |S|-dimensional views used by the subproblem solvers.
template <class Derived>
Vector gather(const Eigen::MatrixBase<Derived>& x, const IndexSet& S,
              const BlockPartition& P) {
  detail::check_vector_dims(x.size(), P, "gather");
  Vector out(0);
  int pos = 0;
  for (int i : S.members) pos += P.size(i);
  out.resize(pos);
  pos = 0;
  for (int i : S.members) {
    out.segment(pos, P.size(i)) = x.segment(P.offset(i), P.size(i));
    pos += P.size(i);
  }
  return out;
}

inline Vector scatter(const Vector& compact, const IndexSet& S,
                      const BlockPartition& P) {
  Vector out = Vector::Zero(P.total);
  int pos = 0;
  for (int i : S.members) {
    out.segment(P.offset(i), P.size(i)) = compact.segment(pos, P.size(i));
    pos += P.size(i);
  }
  if (pos != compact.size()) {
    throw std::invalid_argument("scatter: compact length does not match S");
  }
  return out;
}

template <class Derived>
Matrix gather_matrix(const Eigen::MatrixBase<Derived>& A, const IndexSet& S,
                     const BlockPartition& P) {
  detail::check_matrix_dims(A.rows(), A.cols(), P, "gather_matrix");
  const std::vector<int> coords = selected_coordinates(S, P);
  const int d = static_cast<int>(coords.size());
  Matrix out(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) out(r, c) = A(coords[r], coords[c]);
  }
  return out;
}

// Uniform block sampling descriptor. singleton_uniform and full are the
// tau = 1 and tau = n special cases of the tau-nice family.
struct SamplingSpec {
  enum class Kind { tau_nice, singleton_uniform, full };

  Kind kind = Kind::tau_nice;
  int tau = 1;
  std::uint64_t seed = 0;

  static SamplingSpec tau_nice(int tau, std::uint64_t seed = 0) {
    return SamplingSpec{Kind::tau_nice, tau, seed};
  }
  static SamplingSpec singleton(std::uint64_t seed = 0) {
    return SamplingSpec{Kind::singleton_uniform, 1, seed};
  }
  static SamplingSpec full(std::uint64_t seed = 0) {
    return SamplingSpec{Kind::full, 1, seed};
  }

  int effective_tau(int n_blocks) const {
    switch (kind) {
      case Kind::singleton_uniform:
        return 1;
      case Kind::full:
        return n_blocks;
      case Kind::tau_nice:
      default:
        return tau;
    }
  }

  void validate(int n_blocks) const {
    const int t = effective_tau(n_blocks);
    if (t < 1 || t > n_blocks) {
      throw std::invalid_argument("SamplingSpec: need 1 <= tau <= n");
    }
  }
};

// Uniformly random tau-subset of the blocks, by partial Fisher-Yates.
// Deterministic given the generator state.
inline IndexSet draw(const SamplingSpec& spec, const BlockPartition& P,
                     Rng& rng) {
  const int n = P.num_blocks();
  spec.validate(n);
  const int t = spec.effective_tau(n);
  if (t == n) return IndexSet::all(n);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < t; ++i) {
    const int j =
        i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(t));
  std::sort(ids.begin(), ids.end());
  return IndexSet{std::move(ids)};
}

// Elementwise probability that a coordinate pair is selected together:
// P = (tau/n) ((1-gamma) blockdiag(E) + gamma E), gamma = (tau-1)/(n-1).
// For n = 1 we set gamma = 1, consistent with full sampling.
inline Matrix probability_matrix(const SamplingSpec& spec,
                                 const BlockPartition& P) {
  const int n = P.num_blocks();
  spec.validate(n);
  const double t = spec.effective_tau(n);
  const double gamma = (n == 1) ? 1.0 : (t - 1.0) / (n - 1.0);
  const Matrix ones = Matrix::Ones(P.total, P.total);
  return (t / n) * ((1.0 - gamma) * blockdiag(ones, P) + gamma * ones);
}

// E[A(S)] over the sampling, computed as the Hadamard product with the
// probability matrix so the identity E[A(S)] = A o P holds exactly.
inline Matrix expected_submatrix(const Matrix& A, const SamplingSpec& spec,
                                 const BlockPartition& P) {
  detail::check_matrix_dims(A.rows(), A.cols(), P, "expected_submatrix");
  return A.cwiseProduct(probability_matrix(spec, P));
}

}  // namespace bcn
