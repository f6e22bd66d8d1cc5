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
 * @file certifier.hpp
 * Frame-operator certificates that every positive semidefinite operator
 * vanishing on a spanning family must be zero, plus an independent
 * alternating-projection feasibility search that cross-checks the claim.
 *
 * For a family {Psi_k} with frame operator F = sum_k |Psi_k><Psi_k| and
 * smallest eigenvalue lambda_min > 0, every PSD M obeys
 *   max_k <Psi_k|M|Psi_k>  >=  (lambda_min / K) tr(M),
 * so all K diagonal constraints zero forces M = 0. That quantitative bound is
 * the machine-checkable form of the vanishing claim.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orthocert/spanning.hpp"

namespace orthocert {

/// Frame operator sum_k |Psi_k><Psi_k| over the member tensor expansions.
/// Hermitian PSD with trace equal to the member count.
inline ComplexMatrix frame_operator(const SpanningFamily& family) {
  ComplexMatrix stacked = family.stacked_expansions();
  ComplexMatrix frame = stacked * stacked.adjoint();
  return Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
}

enum class Verdict { kCertified, kNotCertified };

inline std::string to_string(Verdict v) {
  return v == Verdict::kCertified ? "certified" : "not_certified";
}

/// Numerical verdict record for one family.
struct Certificate {
  int d = 0;
  int n = 0;
  FamilyClass class_tag = FamilyClass::kOrthogonal;
  std::optional<double> threshold;
  int member_count = 0;      // K
  double lambda_min = 0.0;   // smallest frame eigenvalue
  double lambda_max = 0.0;   // largest frame eigenvalue
  int rank = 0;              // SVD rank of the stacked expansions
  double bound_constant = 0.0;  // lambda_min / K
  Verdict verdict = Verdict::kNotCertified;
  std::vector<std::string> path_notes;
  std::optional<double> solver_final_norm;
  std::optional<std::vector<double>> solver_trace;

  bool certified() const { return verdict == Verdict::kCertified; }
};

/// Certifies that the only PSD operator vanishing on every family member is
/// zero: computes the frame spectrum and, independently, the SVD rank of the
/// stacked expansions. Certified iff lambda_min exceeds 1e-9 of lambda_max.
inline Certificate lemma1_certificate(const SpanningFamily& family) {
  Certificate cert;
  cert.d = family.d();
  cert.n = family.n();
  cert.class_tag = family.class_tag();
  cert.threshold = family.threshold();
  cert.member_count = static_cast<int>(family.size());

  ComplexMatrix stacked = family.stacked_expansions();
  cert.rank = numerical_rank(stacked, tol::kRankRel);

  ComplexMatrix frame = stacked * stacked.adjoint();
  frame = Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
  EigResult eig = eig_hermitian(frame);
  cert.lambda_min = eig.eigenvalues[0];
  cert.lambda_max = eig.eigenvalues[eig.eigenvalues.size() - 1];
  cert.bound_constant = cert.lambda_min / cert.member_count;
  cert.verdict = (cert.lambda_min > tol::kCertifyRel * cert.lambda_max)
                     ? Verdict::kCertified
                     : Verdict::kNotCertified;
  return cert;
}

struct FeasibilityOptions {
  int max_iters = 5000;
  std::uint64_t seed = 0;
  // Accept a family without a spanning certificate (used to demonstrate that
  // the search stalls on deliberately non-spanning input).
  bool skip_certification_check = false;
  // Optional fixed start; when absent a random PSD matrix of unit Frobenius
  // norm is drawn from the seed.
  std::optional<ComplexMatrix> initial;
  // Families larger than this use a column-pivoted spanning subset as the
  // constraint set (a spanning subset certifies the same conclusion).
  int constraint_cap = 1024;
  double target_norm = tol::kFeasibilityNorm;
};

struct FeasibilityResult {
  // Frobenius norm of the returned operator, original coordinates.
  double final_norm = 0.0;
  // Per-iteration residual norms in the metric the projections run in;
  // non-increasing by construction.
  std::vector<double> trace;
  bool converged = false;
  int constraints_used = 0;
  bool whitened = false;
};

namespace detail {

/// Spanning subset of columns chosen by column-pivoted QR; very wide inputs
/// are stride-subsampled first to keep the factorization cheap.
inline ComplexMatrix spanning_subset(const ComplexMatrix& stacked, int cap,
                                     bool allow_subsample) {
  if (stacked.cols() <= cap) return stacked;
  ComplexMatrix pool;
  const Eigen::Index wide_limit = 4L * cap;
  if (allow_subsample && stacked.cols() > wide_limit) {
    pool.resize(stacked.rows(), wide_limit);
    for (Eigen::Index c = 0; c < wide_limit; ++c) {
      pool.col(c) = stacked.col((c * stacked.cols()) / wide_limit);
    }
  } else {
    pool = stacked;
  }
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(pool);
  const auto& perm = qr.colsPermutation().indices();
  const int keep = std::min<Eigen::Index>(cap, pool.cols());
  ComplexMatrix out(pool.rows(), keep);
  for (int c = 0; c < keep; ++c) out.col(c) = pool.col(perm[c]);
  return out;
}

struct ConstraintSet {
  ComplexMatrix columns;  // whitened when `spanning`
  ComplexMatrix white;    // F^{-1/2} of the constraint frame (identity if not)
  ComplexMatrix unwhite;  // F^{+1/2}
  double lambda_min = 0.0;
  bool spanning = false;
};

inline ConstraintSet build_constraints(const ComplexMatrix& subset) {
  ConstraintSet cs;
  const Eigen::Index dim = subset.rows();
  ComplexMatrix frame = subset * subset.adjoint();
  frame = Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(frame);
  const RealVector& w = eig.eigenvalues();
  const double wmax = w[w.size() - 1];
  cs.lambda_min = w[0];
  cs.spanning = wmax > 0.0 && w[0] > tol::kCertifyRel * wmax;
  if (!cs.spanning) {
    cs.columns = subset;
    cs.white = ComplexMatrix::Identity(dim, dim);
    cs.unwhite = ComplexMatrix::Identity(dim, dim);
    return cs;
  }
  RealVector inv_sqrt(w.size()), sqrt_w(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    inv_sqrt[k] = 1.0 / std::sqrt(w[k]);
    sqrt_w[k] = std::sqrt(w[k]);
  }
  cs.white = eig.eigenvectors() * inv_sqrt.asDiagonal() *
             eig.eigenvectors().adjoint();
  cs.unwhite = eig.eigenvectors() * sqrt_w.asDiagonal() *
               eig.eigenvectors().adjoint();
  cs.columns = cs.white * subset;
  return cs;
}

}  // namespace detail

/// Alternating projections between the subspace
/// {M Hermitian : <Psi_k|M|Psi_k> = 0 for all k} and the PSD cone, from a
/// random PSD start of unit Frobenius norm. For a spanning family the two
/// sets meet only at zero, so the iterate must shrink below the target norm;
/// failure to do so raises InconclusiveSearch. When the constraint frame is
/// nonsingular the projections run in frame-whitened coordinates (there the
/// family is a Parseval frame, which removes the conditioning penalty); the
/// trace records the method's own residuals while final_norm is always the
/// operator norm in the original coordinates.
inline FeasibilityResult feasibility_search(const SpanningFamily& family,
                                            const FeasibilityOptions& options) {
  if (options.max_iters < 1) {
    throw UsageError("feasibility_search: max_iters must be at least 1");
  }
  ComplexMatrix all = family.stacked_expansions();
  const Eigen::Index dim = all.rows();
  const int cap = std::max<int>(options.constraint_cap, static_cast<int>(dim));

  ComplexMatrix subset = detail::spanning_subset(all, cap, true);
  detail::ConstraintSet cs = detail::build_constraints(subset);
  if (!cs.spanning && subset.cols() < all.cols()) {
    // The cheap subsample may have missed directions; retry exhaustively.
    subset = detail::spanning_subset(all, cap, false);
    cs = detail::build_constraints(subset);
  }
  if (!cs.spanning && !options.skip_certification_check) {
    throw UsageError(
        "feasibility_search: family is not certified spanning; "
        "set skip_certification_check to probe it anyway");
  }
  const ComplexMatrix& constraints = cs.columns;
  const int k_used = static_cast<int>(constraints.cols());

  // Gram system of the rank-1 constraint operators, factored once.
  Eigen::MatrixXd gram_sys = (constraints.adjoint() * constraints).cwiseAbs2();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(gram_sys);
  const RealVector& gw = gram_eig.eigenvalues();
  RealVector gram_inv = RealVector::Zero(gw.size());
  const double gw_max = gw[gw.size() - 1];
  for (Eigen::Index k = 0; k < gw.size(); ++k) {
    if (gw_max > 0.0 && gw[k] > 1e-12 * gw_max) gram_inv[k] = 1.0 / gw[k];
  }

  // Random PSD start of unit Frobenius norm (or the caller's start).
  ComplexMatrix m0;
  if (options.initial) {
    m0 = *options.initial;
    if (m0.rows() != dim || m0.cols() != dim) {
      throw UsageError("feasibility_search: initial matrix shape mismatch");
    }
  } else {
    auto rng = detail::seeded_engine(options.seed);
    ComplexMatrix g = detail::gaussian_matrix(static_cast<int>(dim),
                                              static_cast<int>(dim), rng);
    m0 = g.adjoint() * g;
    m0 /= m0.norm();
  }

  ComplexMatrix iterate =
      cs.spanning ? (cs.unwhite * m0 * cs.unwhite).eval() : m0;
  iterate = Complex(0.5, 0.0) * (iterate + iterate.adjoint().eval());

  FeasibilityResult result;
  result.constraints_used = k_used;
  result.whitened = cs.spanning;
  result.trace.reserve(options.max_iters);

  // |W N W|_F <= |N|_F / lambda_min gives a cheap convergence bound; the
  // exact back-mapped norm is only computed when it could already pass, and
  // periodically in case the bound is loose.
  const double amp = cs.spanning ? 1.0 / cs.lambda_min : 1.0;
  auto original_norm = [&](const ComplexMatrix& n) {
    return cs.spanning ? (cs.white * n * cs.white).norm() : n.norm();
  };

  double final_norm = original_norm(iterate);
  for (int it = 0; it < options.max_iters; ++it) {
    // Project onto the constraint subspace.
    ComplexMatrix y = iterate * constraints;
    RealVector b(k_used);
    for (int k = 0; k < k_used; ++k) {
      b[k] = constraints.col(k).dot(y.col(k)).real();
    }
    RealVector c = gram_eig.eigenvectors() *
                   (gram_inv.asDiagonal() *
                    (gram_eig.eigenvectors().transpose() * b).eval());
    iterate.noalias() -= constraints * c.asDiagonal() * constraints.adjoint();
    iterate = Complex(0.5, 0.0) * (iterate + iterate.adjoint().eval());

    // Project onto the PSD cone.
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> step_eig(iterate);
    RealVector clipped = step_eig.eigenvalues().cwiseMax(0.0);
    iterate = step_eig.eigenvectors() * clipped.asDiagonal() *
              step_eig.eigenvectors().adjoint();

    const double residual = iterate.norm();
    result.trace.push_back(residual);
    if (residual * amp < options.target_norm || residual == 0.0 ||
        (it + 1) % 50 == 0 || it + 1 == options.max_iters) {
      final_norm = original_norm(iterate);
      if (final_norm < options.target_norm) {
        result.converged = true;
        break;
      }
    }
  }
  result.final_norm = final_norm;
  if (!result.converged && !options.skip_certification_check) {
    throw InconclusiveSearch(
        "feasibility_search: norm " + std::to_string(result.final_norm) +
        " after " + std::to_string(options.max_iters) + " iterations");
  }
  return result;
}

inline FeasibilityResult feasibility_search(const SpanningFamily& family,
                                            int max_iters,
                                            std::uint64_t seed) {
  FeasibilityOptions options;
  options.max_iters = max_iters;
  options.seed = seed;
  return feasibility_search(family, options);
}

struct TheoremCertificates {
  Certificate m1;
  Certificate m2;

  bool both_certified() const { return m1.certified() && m2.certified(); }
};

namespace detail {

// Perturbations this large keep the family comfortably conditioned while the
// all-equal anchor keeps every member far from orthogonal.
inline constexpr double kTheoremEps0 = 0.9;
inline constexpr double kTheoremFloor = 0.5;

inline StateTuple all_equal_anchor(int d, int n, std::uint64_t seed) {
  Ket psi = random_ket(d, seed);
  std::vector<Ket> copies(static_cast<std::size_t>(n), psi);
  return StateTuple(std::move(copies));
}

}  // namespace detail

/// Both sides of the orthogonality no-go at (d, n): m1 certifies over a
/// perturbation basis of non-orthogonal products (so the conclusive
/// "orthogonal" element must vanish), m2 over the orthogonal-product family
/// (so the conclusive "not orthogonal" element must vanish).
inline TheoremCertificates theorem1_certify(int d, int n, std::uint64_t seed) {
  if (n < 2 || n > d) {
    throw UsageError(
        "theorem1_certify: need 2 <= n <= d (no n orthogonal states exist "
        "otherwise)");
  }
  StateTuple anchor = detail::all_equal_anchor(d, n, seed);
  SpanningFamily non_orth = perturbation_basis(anchor, detail::kTheoremFloor,
                                               detail::kTheoremEps0);
  Certificate m1 = lemma1_certificate(non_orth);
  m1.path_notes.push_back("anchor=all-equal haar ket");

  SpanningFamily orth = orthogonal_spanning_family(d, n);
  Certificate m2 = lemma1_certificate(orth);
  return {std::move(m1), std::move(m2)};
}

/// Threshold variant: for 0 < A < 1, m1 certifies over a family strictly
/// above A and m2 over one strictly below. A = 0 reduces to the plain
/// orthogonality statement; A = 1 is rejected because every tuple meets the
/// threshold and the trivial always-"below" measurement succeeds.
inline TheoremCertificates theorem2_certify(int d, int n, double A,
                                            std::uint64_t seed) {
  if (n < 2 || n > d) {
    throw UsageError("theorem2_certify: need 2 <= n <= d");
  }
  if (A < 0.0 || A > 1.0) {
    throw UsageError("theorem2_certify: threshold must lie in [0, 1]");
  }
  if (A == 1.0) {
    throw UsageError(
        "theorem2_certify: A = 1 is the trivial case: every tuple meets the "
        "threshold, so declaring it unconditionally is already error-free");
  }
  if (A == 0.0) {
    return theorem1_certify(d, n, seed);
  }

  StateTuple above_anchor = detail::all_equal_anchor(d, n, seed);
  SpanningFamily above = perturbation_basis_threshold(
      above_anchor, A, ThresholdSide::kAbove, detail::kTheoremEps0);
  Certificate m1 = lemma1_certificate(above);
  m1.path_notes.push_back("side=above, anchor=all-equal haar ket");

  StateTuple below_anchor = random_orthonormal_tuple(d, n, seed + 1);
  SpanningFamily below = perturbation_basis_threshold(
      below_anchor, A, ThresholdSide::kBelow, detail::kTheoremEps0);
  Certificate m2 = lemma1_certificate(below);
  m2.path_notes.push_back("side=below, anchor=haar orthonormal tuple");
  return {std::move(m1), std::move(m2)};
}

}  // namespace orthocert
