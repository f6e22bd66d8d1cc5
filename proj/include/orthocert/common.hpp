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

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace orthocert {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Bad arguments or violated call preconditions.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input breaks a numerical contract (e.g. a non-Hermitian matrix where a
/// Hermitian one is required).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

/// A constructive procedure could not reach its guaranteed state.
class ConstructionFailure : public std::runtime_error {
 public:
  explicit ConstructionFailure(const std::string& what)
      : std::runtime_error(what) {}
};

/// An iterative search ended without a conclusive answer.
class InconclusiveSearch : public std::runtime_error {
 public:
  explicit InconclusiveSearch(const std::string& what)
      : std::runtime_error(what) {}
};

namespace tol {
// Max-entry deviation allowed between A and its adjoint.
inline constexpr double kHermiticity = 1e-10;
// Default relative cutoff for numerical rank (singular values).
inline constexpr double kRankRel = 1e-9;
// Unit-norm and exact-reconstruction tolerance for constructed states.
inline constexpr double kUnit = 1e-12;
// A tuple counts as mutually orthogonal when its measure is below this.
inline constexpr double kOrthogonal = 1e-10;
// Minimum pairwise overlap certifying non-orthogonality in floating point.
inline constexpr double kNonOrthFloor = 1e-6;
// Relative eigenvalue threshold for frame-operator certification.
inline constexpr double kCertifyRel = 1e-9;
// Residual at which the repeated-factor expansion is accepted.
inline constexpr double kExpansionResidual = 1e-8;
// Feasibility search declares the zero operator reached below this norm.
inline constexpr double kFeasibilityNorm = 1e-6;
// Eigenvalue floor for accepting a POVM element as positive semidefinite.
inline constexpr double kPsdFloor = -1e-10;
// POVM elements must sum to the identity within this.
inline constexpr double kPovmCompleteness = 1e-10;
// Conclusive probabilities below this count as the exact zero.
inline constexpr double kAudit = 1e-9;
}  // namespace tol

}  // namespace orthocert
