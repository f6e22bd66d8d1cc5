// Copyright 2026 The Orthocert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file states.hpp
 * Pure quantum states over a d-dimensional Hilbert space, Haar-distributed
 * samplers, orthonormal complements and the orthogonality measure
 * max_{i != j} |<psi_i|psi_j>| of an n-state tuple.
 */

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "orthocert/numerics.hpp"

namespace orthocert {

/// Unit-norm state vector over C^d, d >= 2.
class Ket {
 public:
  explicit Ket(ComplexVector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 2) {
      throw UsageError("Ket: dimension must be at least 2");
    }
    if (!amps_.allFinite()) {
      throw UsageError("Ket: amplitudes must be finite");
    }
    if (std::abs(amps_.norm() - 1.0) > tol::kUnit) {
      throw UsageError("Ket: state vector must have unit norm");
    }
  }

  /// Normalizes the given amplitudes first; rejects the zero vector.
  static Ket normalized(ComplexVector amplitudes) {
    const double nrm = amplitudes.norm();
    if (nrm == 0.0) throw UsageError("Ket::normalized: zero vector");
    return Ket(amplitudes / nrm);
  }

  Eigen::Index dim() const { return amps_.size(); }
  const ComplexVector& amplitudes() const { return amps_; }

 private:
  ComplexVector amps_;
};

/// Computational basis state |i> in dimension d.
inline Ket basis_ket(int d, int i) {
  if (d < 2 || i < 0 || i >= d) throw UsageError("basis_ket: bad index");
  ComplexVector v = ComplexVector::Zero(d);
  v[i] = Complex(1.0, 0.0);
  return Ket(std::move(v));
}

/// Ordered tuple of n kets over a common d-dimensional space, 2 <= n <= d.
class StateTuple {
 public:
  explicit StateTuple(std::vector<Ket> states) : states_(std::move(states)) {
    const auto n = states_.size();
    if (n < 2) throw UsageError("StateTuple: need at least two states");
    const Eigen::Index d = states_[0].dim();
    for (const Ket& k : states_) {
      if (k.dim() != d) throw UsageError("StateTuple: mixed dimensions");
    }
    if (static_cast<Eigen::Index>(n) > d) {
      throw UsageError("StateTuple: more states than the dimension allows");
    }
  }

  int n() const { return static_cast<int>(states_.size()); }
  int dim() const { return static_cast<int>(states_[0].dim()); }
  const std::vector<Ket>& states() const { return states_; }
  const Ket& operator[](std::size_t i) const { return states_[i]; }

 private:
  std::vector<Ket> states_;
};

namespace detail {

inline std::mt19937_64 seeded_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

inline ComplexVector gaussian_vector(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexVector v(d);
  for (int i = 0; i < d; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[i] = Complex(re, im);
  }
  return v;
}

inline ComplexMatrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = Complex(re, im);
    }
  }
  return m;
}

/// QR of a complex Gaussian matrix with the diagonal phases of R fixed, so
/// the columns are Haar-uniform over orthonormal frames.
inline ComplexMatrix haar_frame(int d, int n, std::mt19937_64& rng) {
  ComplexMatrix g = gaussian_matrix(d, n, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, n);
  const auto& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    const Complex rjj = r(j, j);
    const double mag = std::abs(rjj);
    if (mag > 0.0) q.col(j) *= rjj / mag;
  }
  return q;
}

}  // namespace detail

/// Haar-distributed unit vector in C^d; deterministic for a given seed.
inline Ket random_ket(int d, std::uint64_t seed) {
  if (d < 2) throw UsageError("random_ket: dimension must be at least 2");
  auto rng = detail::seeded_engine(seed);
  return Ket::normalized(detail::gaussian_vector(d, rng));
}

/// Haar-uniform orthonormal n-frame in C^d; deterministic for a given seed.
inline StateTuple random_orthonormal_tuple(int d, int n, std::uint64_t seed) {
  if (n < 2 || n > d) {
    throw UsageError("random_orthonormal_tuple: need 2 <= n <= d");
  }
  auto rng = detail::seeded_engine(seed);
  ComplexMatrix q = detail::haar_frame(d, n, rng);
  std::vector<Ket> states;
  states.reserve(n);
  for (int j = 0; j < n; ++j) {
    states.push_back(Ket::normalized(q.col(j)));
  }
  return StateTuple(std::move(states));
}

/// max_{i != j} |<psi_i|psi_j>|: 0 for mutually orthogonal tuples, 1 when two
/// states coincide up to phase.
inline double orthogonality_measure(const StateTuple& tuple) {
  double measure = 0.0;
  const auto& states = tuple.states();
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      const double overlap =
          std::abs(states[i].amplitudes().dot(states[j].amplitudes()));
      measure = std::max(measure, overlap);
    }
  }
  return std::min(measure, 1.0);
}

/// True iff the tuple's orthogonality measure is at most A.
inline bool threshold_test(const StateTuple& tuple, double A) {
  if (A < 0.0 || A > 1.0) {
    throw UsageError("threshold_test: threshold must lie in [0, 1]");
  }
  return orthogonality_measure(tuple) <= A;
}

/// d-1 mutually orthonormal kets, each orthogonal to psi; together with psi
/// they form a basis of C^d.
inline std::vector<Ket> orthonormal_complement(const Ket& psi) {
  const Eigen::Index d = psi.dim();
  ComplexMatrix column(d, 1);
  column.col(0) = psi.amplitudes();
  Eigen::HouseholderQR<ComplexMatrix> qr(column);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, d);
  std::vector<Ket> complement;
  complement.reserve(d - 1);
  for (Eigen::Index j = 1; j < d; ++j) {
    complement.push_back(Ket::normalized(q.col(j)));
  }
  return complement;
}

}  // namespace orthocert
