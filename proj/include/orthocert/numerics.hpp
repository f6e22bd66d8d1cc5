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
 * @file numerics.hpp
 * Dense complex linear-algebra kernel: Kronecker products, Hermitian
 * eigendecomposition, numerical rank, PSD projection, Gram matrices.
 *
 * All functions are pure; inner products are conjugate-linear in the first
 * argument throughout.
 */

#pragma once

#include <span>
#include <vector>

#include "orthocert/common.hpp"

namespace orthocert {

/// Max-entry deviation between op and its adjoint.
inline double hermiticity_defect(const ComplexMatrix& op) {
  if (op.rows() != op.cols()) {
    throw ContractViolation("hermiticity_defect: matrix is not square");
  }
  return (op - op.adjoint()).cwiseAbs().maxCoeff();
}

inline void require_hermitian(const ComplexMatrix& op, const char* where) {
  if (op.rows() != op.cols()) {
    throw ContractViolation(std::string(where) + ": matrix is not square");
  }
  if (hermiticity_defect(op) > tol::kHermiticity) {
    throw ContractViolation(std::string(where) +
                            ": matrix is not Hermitian within tolerance");
  }
}

/// Kronecker product of one or more vectors. The output dimension is the
/// product of the factor dimensions and its norm the product of factor norms.
inline ComplexVector tensor(std::span<const ComplexVector> factors) {
  if (factors.empty()) {
    throw UsageError("tensor: factor list must not be empty");
  }
  for (const auto& f : factors) {
    if (f.size() == 0) throw UsageError("tensor: empty factor");
  }
  ComplexVector out = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) {
    const ComplexVector& f = factors[i];
    ComplexVector next(out.size() * f.size());
    for (Eigen::Index a = 0; a < out.size(); ++a) {
      next.segment(a * f.size(), f.size()) = out[a] * f;
    }
    out.swap(next);
  }
  return out;
}

inline ComplexVector tensor(std::initializer_list<ComplexVector> factors) {
  std::vector<ComplexVector> v(factors);
  return tensor(std::span<const ComplexVector>(v));
}

struct EigResult {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors; // columns, unitary
};

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; the
/// reconstruction residual satisfies |A - V diag(w) V^H|_F <= 1e-10 max(1,|A|_F).
inline EigResult eig_hermitian(const ComplexMatrix& op) {
  require_hermitian(op, "eig_hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op);
  if (solver.info() != Eigen::Success) {
    throw ContractViolation("eig_hermitian: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Count of singular values above rel_tol times the largest one.
inline int numerical_rank(const ComplexMatrix& matrix,
                          double rel_tol = tol::kRankRel) {
  if (rel_tol <= 0.0 || rel_tol >= 1.0) {
    throw UsageError("numerical_rank: rel_tol must lie in (0, 1)");
  }
  if (matrix.size() == 0) return 0;
  Eigen::BDCSVD<ComplexMatrix> svd(matrix);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  const double cut = rel_tol * sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cut) ++rank;
  }
  return rank;
}

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues are
/// clipped to zero, eigenvectors kept.
inline ComplexMatrix psd_project(const ComplexMatrix& op) {
  require_hermitian(op, "psd_project");
  EigResult eig = eig_hermitian(op);
  RealVector clipped = eig.eigenvalues.cwiseMax(0.0);
  return eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.adjoint();
}

/// Gram matrix G(k, l) = <v_k | v_l>; Hermitian positive semidefinite.
inline ComplexMatrix gram(std::span<const ComplexVector> vectors) {
  if (vectors.empty()) {
    throw UsageError("gram: vector list must not be empty");
  }
  const Eigen::Index dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw UsageError("gram: dimension mismatch");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(vectors.size());
  ComplexMatrix stacked(dim, k);
  for (Eigen::Index i = 0; i < k; ++i) stacked.col(i) = vectors[i];
  return stacked.adjoint() * stacked;
}

inline ComplexMatrix gram(std::initializer_list<ComplexVector> vectors) {
  std::vector<ComplexVector> v(vectors);
  return gram(std::span<const ComplexVector>(v));
}

}  // namespace orthocert
