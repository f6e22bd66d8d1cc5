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
 * @file spanning.hpp
 * Spanning families of product states over the composite space (C^d)^{x n}.
 *
 * Two constructions are provided:
 *  - a perturbation basis of d^n non-orthogonal (or threshold-sided) product
 *    states obtained by perturbing one anchor tuple along its orthonormal
 *    complements with a common, adaptively halved epsilon;
 *  - a family of orthogonal-factor product states that spans the whole
 *    composite space, built recursively: products of distinct basis vectors
 *    are orthogonal already, repeated-index patterns are resolved through
 *    orthogonal subspace blocks, and all-equal powers u^{x N} are expanded
 *    through the +/- phase pairs (u + e^{i theta} v)/sqrt(2).
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "orthocert/states.hpp"

namespace orthocert {

/// Product of n kets with its full d^n-dimensional expansion on demand.
class ProductState {
 public:
  explicit ProductState(StateTuple factors) : factors_(std::move(factors)) {}

  const StateTuple& factors() const { return factors_; }
  int d() const { return factors_.dim(); }
  int n() const { return factors_.n(); }

  /// Kronecker product of the factors, dimension d^n.
  ComplexVector expansion() const {
    std::vector<ComplexVector> amps;
    amps.reserve(factors_.n());
    for (const Ket& k : factors_.states()) amps.push_back(k.amplitudes());
    return tensor(std::span<const ComplexVector>(amps));
  }

 private:
  StateTuple factors_;
};

/// Reorders factors: factor k of the output is factor sigma[k] of the input.
inline ProductState permute_factors(const ProductState& state,
                                    const std::vector<int>& sigma) {
  const int n = state.n();
  if (static_cast<int>(sigma.size()) != n) {
    throw UsageError("permute_factors: permutation length mismatch");
  }
  std::vector<bool> seen(n, false);
  for (int v : sigma) {
    if (v < 0 || v >= n || seen[v]) {
      throw UsageError("permute_factors: not a permutation");
    }
    seen[v] = true;
  }
  std::vector<Ket> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) out.push_back(state.factors()[sigma[k]]);
  return ProductState(StateTuple(std::move(out)));
}

enum class FamilyClass { kOrthogonal, kNonOrthogonal, kAboveThreshold, kBelowThreshold };

inline std::string to_string(FamilyClass c) {
  switch (c) {
    case FamilyClass::kOrthogonal: return "S_O";
    case FamilyClass::kNonOrthogonal: return "S_N";
    case FamilyClass::kAboveThreshold: return "above_threshold";
    case FamilyClass::kBelowThreshold: return "below_threshold";
  }
  throw UsageError("to_string: unknown family class");
}

inline FamilyClass family_class_from_string(const std::string& s) {
  if (s == "S_O") return FamilyClass::kOrthogonal;
  if (s == "S_N") return FamilyClass::kNonOrthogonal;
  if (s == "above_threshold") return FamilyClass::kAboveThreshold;
  if (s == "below_threshold") return FamilyClass::kBelowThreshold;
  throw UsageError("family_class_from_string: unknown tag '" + s + "'");
}

/// Per-direction perturbation strengths and their normalization constants
/// C = (1 + eps^2)^{-1/2}. Row i holds the entries for state i.
struct PerturbationParams {
  Eigen::MatrixXd epsilons;     // n x (d-1), nonnegative
  Eigen::MatrixXd normalizers;  // same shape

  PerturbationParams(Eigen::MatrixXd eps, Eigen::MatrixXd norm)
      : epsilons(std::move(eps)), normalizers(std::move(norm)) {
    if (epsilons.rows() != normalizers.rows() ||
        epsilons.cols() != normalizers.cols()) {
      throw UsageError("PerturbationParams: shape mismatch");
    }
    for (Eigen::Index i = 0; i < epsilons.rows(); ++i) {
      for (Eigen::Index j = 0; j < epsilons.cols(); ++j) {
        const double e = epsilons(i, j);
        const double c = normalizers(i, j);
        if (e < 0.0) throw UsageError("PerturbationParams: negative epsilon");
        if (c <= 0.0 || c > 1.0 ||
            std::abs(c * c * (1.0 + e * e) - 1.0) > tol::kUnit) {
          throw UsageError("PerturbationParams: inconsistent normalizer");
        }
      }
    }
  }

  static PerturbationParams uniform(int n, int d, double eps) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Constant(n, d - 1, eps);
    Eigen::MatrixXd c =
        Eigen::MatrixXd::Constant(n, d - 1, 1.0 / std::sqrt(1.0 + eps * eps));
    return PerturbationParams(std::move(e), std::move(c));
  }
};

/// A list of product states with a membership class and per-member
/// construction provenance.
class SpanningFamily {
 public:
  SpanningFamily(FamilyClass tag, int d, int n,
                 std::vector<ProductState> members,
                 std::vector<std::string> provenance,
                 std::optional<double> threshold = std::nullopt)
      : tag_(tag),
        d_(d),
        n_(n),
        members_(std::move(members)),
        provenance_(std::move(provenance)),
        threshold_(threshold) {
    if (members_.empty()) throw UsageError("SpanningFamily: no members");
    if (provenance_.size() != members_.size()) {
      throw UsageError("SpanningFamily: provenance count mismatch");
    }
    for (const ProductState& m : members_) {
      if (m.d() != d_ || m.n() != n_) {
        throw UsageError("SpanningFamily: member shape mismatch");
      }
    }
    validate_membership();
  }

  FamilyClass class_tag() const { return tag_; }
  int d() const { return d_; }
  int n() const { return n_; }
  std::optional<double> threshold() const { return threshold_; }
  const std::vector<ProductState>& members() const { return members_; }
  const std::vector<std::string>& provenance() const { return provenance_; }
  std::size_t size() const { return members_.size(); }

  /// Tensor expansions of all members as the columns of a d^n x K matrix.
  ComplexMatrix stacked_expansions() const {
    Eigen::Index dim = 1;
    for (int i = 0; i < n_; ++i) dim *= d_;
    ComplexMatrix m(dim, static_cast<Eigen::Index>(members_.size()));
    for (std::size_t k = 0; k < members_.size(); ++k) {
      m.col(static_cast<Eigen::Index>(k)) = members_[k].expansion();
    }
    return m;
  }

 private:
  void validate_membership() const {
    switch (tag_) {
      case FamilyClass::kOrthogonal:
        for (const ProductState& m : members_) {
          std::vector<ComplexVector> amps;
          for (const Ket& k : m.factors().states()) {
            amps.push_back(k.amplitudes());
          }
          ComplexMatrix g = gram(std::span<const ComplexVector>(amps));
          const double defect =
              (g - ComplexMatrix::Identity(g.rows(), g.cols()))
                  .cwiseAbs()
                  .maxCoeff();
          if (defect > tol::kOrthogonal) {
            throw UsageError(
                "SpanningFamily: S_O member with non-orthonormal factors");
          }
        }
        break;
      case FamilyClass::kNonOrthogonal:
        for (const ProductState& m : members_) {
          if (orthogonality_measure(m.factors()) < tol::kNonOrthFloor) {
            throw UsageError(
                "SpanningFamily: S_N member with orthogonal factors");
          }
        }
        break;
      case FamilyClass::kAboveThreshold:
      case FamilyClass::kBelowThreshold: {
        if (!threshold_) {
          throw UsageError("SpanningFamily: threshold tag without threshold");
        }
        const double a = *threshold_;
        for (const ProductState& m : members_) {
          const double measure = orthogonality_measure(m.factors());
          if (tag_ == FamilyClass::kAboveThreshold && !(measure > a)) {
            throw UsageError("SpanningFamily: member not above threshold");
          }
          if (tag_ == FamilyClass::kBelowThreshold && !(measure <= a)) {
            throw UsageError("SpanningFamily: member not below threshold");
          }
        }
        break;
      }
    }
  }

  FamilyClass tag_;
  int d_;
  int n_;
  std::vector<ProductState> members_;
  std::vector<std::string> provenance_;
  std::optional<double> threshold_;
};

namespace detail {

inline Eigen::Index pow_index(int d, int n) {
  Eigen::Index out = 1;
  for (int i = 0; i < n; ++i) out *= d;
  return out;
}

/// Raw construction member: unit, mutually orthonormal factor vectors.
struct RawMember {
  std::vector<ComplexVector> factors;
  std::string note;
};

/// Collects members, dropping byte-exact duplicates (identical recipes
/// produce identical doubles).
class MemberPool {
 public:
  void add(RawMember m) {
    std::string key;
    key.reserve(m.factors.size() * m.factors[0].size() * sizeof(Complex));
    for (const ComplexVector& f : m.factors) {
      key.append(reinterpret_cast<const char*>(f.data()),
                 static_cast<std::size_t>(f.size()) * sizeof(Complex));
    }
    if (seen_.insert(key).second) members_.push_back(std::move(m));
  }

  const std::vector<RawMember>& members() const { return members_; }
  std::vector<RawMember> take() { return std::move(members_); }

 private:
  std::vector<RawMember> members_;
  std::unordered_set<std::string> seen_;
};

/// Distinct arrangements of a sorted label multiset, lexicographic.
inline std::vector<std::vector<int>> multiset_arrangements(
    std::vector<int> labels) {
  std::sort(labels.begin(), labels.end());
  std::vector<std::vector<int>> out;
  do {
    out.push_back(labels);
  } while (std::next_permutation(labels.begin(), labels.end()));
  return out;
}

/// Interleaves per-block factor lists according to an arrangement of block
/// labels, preserving the within-block factor order.
inline std::vector<ComplexVector> interleave(
    const std::vector<const std::vector<ComplexVector>*>& blocks,
    const std::vector<int>& arrangement) {
  std::vector<std::size_t> next(blocks.size(), 0);
  std::vector<ComplexVector> out;
  out.reserve(arrangement.size());
  for (int label : arrangement) {
    out.push_back((*blocks[label])[next[label]++]);
  }
  return out;
}

/// The exact two-factor decomposition members for u (x) u: the +/- and
/// +/-i phase pairs plus the (u, v), (v, u) products, with both factor
/// orders so higher levels can permute freely.
inline std::vector<RawMember> pair_cover(const ComplexVector& u,
                                         const ComplexVector& v,
                                         const std::string& note) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  std::vector<RawMember> out;
  for (double theta : {0.0, std::numbers::pi / 2.0}) {
    const Complex phase = std::polar(1.0, theta);
    ComplexVector gp = inv_sqrt2 * (u + phase * v);
    ComplexVector gm = inv_sqrt2 * (u - phase * v);
    out.push_back({{gp, gm}, note + "|pair+"});
    out.push_back({{gm, gp}, note + "|pair-"});
  }
  out.push_back({{u, v}, note + "|uv"});
  out.push_back({{v, u}, note + "|vu"});
  return out;
}

// Members whose span contains u^{x N}. u, partner and the fillers must be
// mutually orthonormal; N - 2 fillers are consumed. Works through the
// identities
//   2^{N/2} u^{x N} = sum over sign patterns of G_s1 (x) ... (x) G_sN,
//   G_+- = (u +- e^{i theta} partner)/sqrt(2),
// taken at theta = 0 (and theta = pi/N when N is even, to cancel the
// partner^{x N} term), with every mixed pattern resolved recursively on
// orthogonal blocks.
inline std::vector<RawMember> all_equal_cover(
    const ComplexVector& u, const ComplexVector& partner,
    std::span<const ComplexVector> fillers, int N, const std::string& note) {
  if (N == 1) return {{{u}, note}};
  if (N == 2) return pair_cover(u, partner, note);
  if (static_cast<int>(fillers.size()) < N - 2) {
    throw ConstructionFailure("all_equal_cover: not enough filler directions");
  }

  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  std::vector<double> thetas = {0.0};
  if (N % 2 == 0) thetas.push_back(std::numbers::pi / N);

  std::vector<std::pair<ComplexVector, ComplexVector>> pairs;
  for (double theta : thetas) {
    const Complex phase = std::polar(1.0, theta);
    pairs.emplace_back(inv_sqrt2 * (u + phase * partner),
                       inv_sqrt2 * (u - phase * partner));
  }
  pairs.emplace_back(u, partner);

  std::vector<RawMember> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [w1, w2] = pairs[p];
    for (int a = 1; a < N; ++a) {
      const int b = N - a;
      std::vector<RawMember> c1 =
          (a == 1) ? std::vector<RawMember>{{{w1}, note}}
                   : all_equal_cover(w1, fillers[0], fillers.subspan(1, a - 2),
                                     a, note);
      std::vector<RawMember> c2 =
          (b == 1) ? std::vector<RawMember>{{{w2}, note}}
                   : all_equal_cover(w2, fillers[a - 1],
                                     fillers.subspan(a, b - 2), b, note);
      std::vector<int> labels(a, 0);
      labels.insert(labels.end(), b, 1);
      for (const std::vector<int>& arr : multiset_arrangements(labels)) {
        for (const RawMember& m1 : c1) {
          for (const RawMember& m2 : c2) {
            std::vector<const std::vector<ComplexVector>*> blocks = {
                &m1.factors, &m2.factors};
            out.push_back({interleave(blocks, arr), note});
          }
        }
      }
    }
  }
  return out;
}

/// Enumerates all multisets of size n over {0, ..., d-1}.
inline void for_each_multiset(
    int d, int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int lo, int left) {
    if (left == 0) {
      fn(cur);
      return;
    }
    for (int i = lo; i < d; ++i) {
      cur.push_back(i);
      rec(i, left - 1);
      cur.pop_back();
    }
  };
  rec(0, n);
}

/// All members generated by resolving one index multiset over the given
/// orthonormal basis columns, appended into the pool.
inline void append_multiset_cover(MemberPool& pool, const ComplexMatrix& basis,
                                  const std::vector<int>& multiset) {
  const int d = static_cast<int>(basis.cols());
  const int n = static_cast<int>(multiset.size());

  std::vector<int> indices;
  std::vector<int> mults;
  for (int v : multiset) {
    if (!indices.empty() && indices.back() == v) {
      ++mults.back();
    } else {
      indices.push_back(v);
      mults.push_back(1);
    }
  }
  const int kappa = static_cast<int>(indices.size());

  std::ostringstream tag;
  tag << "multiset{";
  for (int l = 0; l < kappa; ++l) {
    tag << (l ? "," : "") << indices[l] << "^" << mults[l];
  }
  tag << "}";

  if (kappa == n) {
    // All factors distinct: every arrangement is an orthogonal product.
    std::vector<int> perm = indices;
    std::sort(perm.begin(), perm.end());
    do {
      RawMember m;
      for (int idx : perm) m.factors.push_back(basis.col(idx));
      m.note = tag.str() + "|basis-product";
      pool.add(std::move(m));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return;
  }

  if (kappa == 1) {
    // All factors equal: phase-pair expansion with the next basis vector.
    const int i = indices[0];
    const int j = (i + 1) % d;
    std::vector<ComplexVector> fillers;
    for (int l = 0; l < d; ++l) {
      if (l != i && l != j) fillers.push_back(basis.col(l));
    }
    for (RawMember& m : all_equal_cover(basis.col(i), basis.col(j),
                                        std::span<const ComplexVector>(fillers),
                                        n, tag.str() + "|all-equal")) {
      pool.add(std::move(m));
    }
    return;
  }

  // Repeated but not all equal: put each index into its own orthogonal
  // block of matching dimension, cover each block, then realize every
  // arrangement of the pattern.
  std::vector<int> free_pool;
  for (int l = 0; l < d; ++l) {
    if (std::find(indices.begin(), indices.end(), l) == indices.end()) {
      free_pool.push_back(l);
    }
  }
  std::size_t next_free = 0;
  std::vector<std::vector<RawMember>> covers(kappa);
  for (int l = 0; l < kappa; ++l) {
    const int r = mults[l];
    if (r == 1) {
      covers[l] = {{{basis.col(indices[l])}, ""}};
      continue;
    }
    std::vector<ComplexVector> block;
    for (int t = 0; t < r - 1; ++t) {
      block.push_back(basis.col(free_pool[next_free++]));
    }
    covers[l] = all_equal_cover(
        basis.col(indices[l]), block[0],
        std::span<const ComplexVector>(block).subspan(1), r, "");
  }

  std::vector<int> labels;
  for (int l = 0; l < kappa; ++l) labels.insert(labels.end(), mults[l], l);
  const auto arrangements = multiset_arrangements(labels);

  std::vector<std::size_t> pick(kappa, 0);
  while (true) {
    std::vector<const std::vector<ComplexVector>*> blocks;
    blocks.reserve(kappa);
    for (int l = 0; l < kappa; ++l) {
      blocks.push_back(&covers[l][pick[l]].factors);
    }
    for (std::size_t a = 0; a < arrangements.size(); ++a) {
      RawMember m;
      m.factors = interleave(blocks, arrangements[a]);
      m.note = tag.str() + "|block-cover|arr" + std::to_string(a);
      pool.add(std::move(m));
    }
    int l = kappa - 1;
    while (l >= 0 && ++pick[l] == covers[l].size()) {
      pick[l] = 0;
      --l;
    }
    if (l < 0) break;
  }
}

inline SpanningFamily family_from_raw(FamilyClass tag, int d, int n,
                                      std::vector<RawMember> raw,
                                      std::optional<double> threshold = {}) {
  std::vector<ProductState> members;
  std::vector<std::string> provenance;
  members.reserve(raw.size());
  provenance.reserve(raw.size());
  for (RawMember& m : raw) {
    std::vector<Ket> kets;
    kets.reserve(m.factors.size());
    for (ComplexVector& f : m.factors) kets.push_back(Ket::normalized(std::move(f)));
    members.emplace_back(StateTuple(std::move(kets)));
    provenance.push_back(std::move(m.note));
  }
  return SpanningFamily(tag, d, n, std::move(members), std::move(provenance),
                        threshold);
}

}  // namespace detail

struct SpanningReport {
  int rank;
  double lambda_min;
};

/// Rank of the stacked member expansions (SVD route) together with the
/// smallest frame-operator eigenvalue (eigenvalue route). The family spans
/// iff rank == d^n iff lambda_min > 0; both are reported for cross-checking.
inline SpanningReport verify_spanning(const SpanningFamily& family,
                                      double rel_tol = tol::kRankRel) {
  ComplexMatrix stacked = family.stacked_expansions();
  const int rank = numerical_rank(stacked, rel_tol);
  ComplexMatrix frame = stacked * stacked.adjoint();
  frame = Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
  EigResult eig = eig_hermitian(frame);
  return {rank, eig.eigenvalues[0]};
}

namespace detail {

/// Lower bound used when deciding whether a perturbed family keeps its
/// members away from orthogonality.
inline double member_measure_floor(double floor) {
  return std::max(floor / 2.0, tol::kNonOrthFloor);
}

/// Perturbed slot states psi_{i,0} = anchor_i, psi_{i,j} = C (anchor_i +
/// eps phi_{i,j}); returns one d-column matrix per slot.
inline std::vector<ComplexMatrix> perturbed_slots(
    const StateTuple& anchor,
    const std::vector<std::vector<Ket>>& complements, double eps) {
  const int d = anchor.dim();
  const int n = anchor.n();
  const double c = 1.0 / std::sqrt(1.0 + eps * eps);
  std::vector<ComplexMatrix> slots(n, ComplexMatrix(d, d));
  for (int i = 0; i < n; ++i) {
    slots[i].col(0) = anchor[i].amplitudes();
    for (int j = 1; j < d; ++j) {
      slots[i].col(j) =
          c * (anchor[i].amplitudes() + eps * complements[i][j - 1].amplitudes());
    }
  }
  return slots;
}

/// Smallest and largest orthogonality measure over all d^n member tuples of
/// the perturbed slots.
inline std::pair<double, double> member_measure_range(
    const std::vector<ComplexMatrix>& slots) {
  const int n = static_cast<int>(slots.size());
  const int d = static_cast<int>(slots[0].cols());
  // Pairwise overlap tables |<psi_{a,j}|psi_{b,k}>|.
  std::vector<std::vector<Eigen::MatrixXd>> overlap(n);
  for (int a = 0; a < n; ++a) {
    overlap[a].resize(n);
    for (int b = a + 1; b < n; ++b) {
      overlap[a][b] = (slots[a].adjoint() * slots[b]).cwiseAbs();
    }
  }
  std::vector<int> idx(n, 0);
  double lo = 1.0, hi = 0.0;
  while (true) {
    double measure = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        measure = std::max(measure, overlap[a][b](idx[a], idx[b]));
      }
    }
    lo = std::min(lo, measure);
    hi = std::max(hi, measure);
    int p = n - 1;
    while (p >= 0 && ++idx[p] == d) {
      idx[p] = 0;
      --p;
    }
    if (p < 0) break;
  }
  return {lo, hi};
}

inline SpanningFamily perturbation_family(
    const StateTuple& anchor, double eps0, FamilyClass tag,
    std::optional<double> threshold,
    const std::function<bool(double lo, double hi)>& member_condition,
    const char* who) {
  if (eps0 <= 0.0 || eps0 >= 1.0) {
    throw UsageError(std::string(who) + ": eps0 must lie in (0, 1)");
  }
  const int d = anchor.dim();
  const int n = anchor.n();

  std::vector<std::vector<Ket>> complements;
  complements.reserve(n);
  for (const Ket& k : anchor.states()) {
    complements.push_back(orthonormal_complement(k));
  }

  constexpr int kMaxHalvings = 60;
  double eps = eps0;
  for (int h = 0; h <= kMaxHalvings; ++h, eps *= 0.5) {
    std::vector<ComplexMatrix> slots = perturbed_slots(anchor, complements, eps);
    auto [lo, hi] = member_measure_range(slots);
    if (!member_condition(lo, hi)) continue;

    std::vector<RawMember> raw;
    raw.reserve(static_cast<std::size_t>(pow_index(d, n)));
    std::vector<int> idx(n, 0);
    while (true) {
      RawMember m;
      m.factors.reserve(n);
      std::ostringstream note;
      note << "eps=" << eps << "|j=(";
      for (int i = 0; i < n; ++i) {
        m.factors.push_back(slots[i].col(idx[i]));
        note << (i ? "," : "") << idx[i];
      }
      note << ")";
      m.note = note.str();
      raw.push_back(std::move(m));
      int p = n - 1;
      while (p >= 0 && ++idx[p] == d) {
        idx[p] = 0;
        --p;
      }
      if (p < 0) break;
    }
    return family_from_raw(tag, d, n, std::move(raw), threshold);
  }
  throw ConstructionFailure(
      std::string(who) +
      ": halving exhausted without an acceptable epsilon (degenerate anchor)");
}

}  // namespace detail

/// The d^n product states obtained by perturbing a strictly non-orthogonal
/// anchor tuple along its orthonormal complements, with a single common
/// epsilon halved from eps0 until every member tuple keeps orthogonality
/// measure at least floor/2. Their expansions form a (non-orthogonal) basis
/// of the composite space.
inline SpanningFamily perturbation_basis(const StateTuple& anchor, double floor,
                                         double eps0 = 0.1) {
  if (floor <= 0.0) {
    throw UsageError("perturbation_basis: floor must be positive");
  }
  if (orthogonality_measure(anchor) < floor) {
    throw UsageError(
        "perturbation_basis: anchor orthogonality measure below floor");
  }
  const double need = detail::member_measure_floor(floor);
  return detail::perturbation_family(
      anchor, eps0, FamilyClass::kNonOrthogonal, std::nullopt,
      [need](double lo, double /*hi*/) { return lo >= need; },
      "perturbation_basis");
}

enum class ThresholdSide { kAbove, kBelow };

/// Threshold-sided variant: every member tuple's measure stays strictly on
/// the requested side of A. The anchor must clear A by a 0.05 margin.
inline SpanningFamily perturbation_basis_threshold(const StateTuple& anchor,
                                                   double A, ThresholdSide side,
                                                   double eps0 = 0.1) {
  if (A <= 0.0 || A >= 1.0) {
    throw UsageError("perturbation_basis_threshold: need 0 < A < 1");
  }
  constexpr double kMargin = 0.05;
  const double measure = orthogonality_measure(anchor);
  if (side == ThresholdSide::kAbove && !(measure > A + kMargin)) {
    throw UsageError(
        "perturbation_basis_threshold: anchor measure not above A + margin");
  }
  if (side == ThresholdSide::kBelow && !(measure < A - kMargin)) {
    throw UsageError(
        "perturbation_basis_threshold: anchor measure not below A - margin");
  }
  if (side == ThresholdSide::kAbove) {
    return detail::perturbation_family(
        anchor, eps0, FamilyClass::kAboveThreshold, A,
        [A](double lo, double /*hi*/) { return lo > A; },
        "perturbation_basis_threshold");
  }
  return detail::perturbation_family(
      anchor, eps0, FamilyClass::kBelowThreshold, A,
      [A](double /*lo*/, double hi) { return hi < A; },
      "perturbation_basis_threshold");
}

struct ExpansionTerm {
  Complex coefficient;
  ProductState member;
};

/// The exact four-term decomposition of |e_i> (x) |e_i> over orthogonal-factor
/// products built from an arbitrary companion |e_j>, j != i:
///   e_i (x) e_i = (e_i+e_j)/sqrt2 (x) (e_i-e_j)/sqrt2
///               + (e_i+ie_j)/sqrt2 (x) (e_i-ie_j)/sqrt2
///               + (1+i)/2 e_i (x) e_j - (1+i)/2 e_j (x) e_i.
inline std::vector<ExpansionTerm> expand_pair_diag(int i, int j, int d) {
  if (i == j) throw UsageError("expand_pair_diag: indices must differ");
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw UsageError("expand_pair_diag: index out of range");
  }
  const ComplexVector u = basis_ket(d, i).amplitudes();
  const ComplexVector v = basis_ket(d, j).amplitudes();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const Complex half_1pi(0.5, 0.5);

  auto product = [](ComplexVector a, ComplexVector b) {
    return ProductState(
        StateTuple({Ket::normalized(std::move(a)), Ket::normalized(std::move(b))}));
  };

  std::vector<ExpansionTerm> terms;
  terms.push_back({Complex(1.0, 0.0),
                   product(inv_sqrt2 * (u + v), inv_sqrt2 * (u - v))});
  terms.push_back({Complex(1.0, 0.0),
                   product(inv_sqrt2 * (u + Complex(0, 1) * v),
                           inv_sqrt2 * (u - Complex(0, 1) * v))});
  terms.push_back({half_1pi, product(u, v)});
  terms.push_back({-half_1pi, product(v, u)});
  return terms;
}

namespace detail {

/// Projects target onto the column span of stacked (via the frame operator
/// pseudo-inverse); returns coefficients and the residual norm.
inline std::pair<ComplexVector, double> project_onto_span(
    const ComplexMatrix& stacked, const ComplexVector& target) {
  ComplexMatrix frame = stacked * stacked.adjoint();
  frame = Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(frame);
  const RealVector& w = eig.eigenvalues();
  const double wmax = w[w.size() - 1];
  RealVector winv = RealVector::Zero(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (wmax > 0.0 && w[k] > 1e-12 * wmax) winv[k] = 1.0 / w[k];
  }
  ComplexVector x = eig.eigenvectors() *
                    (winv.asDiagonal() *
                     (eig.eigenvectors().adjoint() * target).eval());
  ComplexVector coeffs = stacked.adjoint() * x;
  const double residual = (stacked * coeffs - target).norm();
  return {std::move(coeffs), residual};
}

/// Evaluates the typeset repeated-factor identity for u^{x (m+1)} term by
/// term and returns the residual against the target. Kept verbatim so the
/// attempt is honest; the identity does not hold as printed, and callers
/// fall back to least squares when the residual shows it.
inline double printed_repeated_identity_residual(int i, int j, int m, int d) {
  const ComplexVector u = basis_ket(d, i).amplitudes();
  const ComplexVector v = basis_ket(d, j).amplitudes();
  const Eigen::Index dim = pow_index(d, m + 1);

  auto tensor_of = [](const std::vector<const ComplexVector*>& fs) {
    ComplexVector out = *fs[0];
    for (std::size_t t = 1; t < fs.size(); ++t) {
      const ComplexVector& f = *fs[t];
      ComplexVector next(out.size() * f.size());
      for (Eigen::Index a = 0; a < out.size(); ++a) {
        next.segment(a * f.size(), f.size()) = out[a] * f;
      }
      out.swap(next);
    }
    return out;
  };

  ComplexVector upv = u + v;
  ComplexVector umv = u - v;

  ComplexVector sum = ComplexVector::Zero(dim);
  {  // (1/2) (u - v) (x) (u + v)^{x m}
    std::vector<const ComplexVector*> fs = {&umv};
    for (int t = 0; t < m; ++t) fs.push_back(&upv);
    sum += 0.5 * tensor_of(fs);
  }
  {  // (1/2) (u + v)^{x 2} (x) (u + v)^{x (m-1)}
    std::vector<const ComplexVector*> fs(m + 1, &upv);
    sum += 0.5 * tensor_of(fs);
  }
  // - u^{x 2} (x) sum_{k=1}^{m-1} sum_sigma (u^{x (m-k-1)} (x) v^{x k})
  for (int k = 1; k <= m - 1; ++k) {
    std::vector<int> labels(m - k - 1, 0);
    labels.insert(labels.end(), k, 1);
    for (const std::vector<int>& arr : multiset_arrangements(labels)) {
      std::vector<const ComplexVector*> fs = {&u, &u};
      for (int lab : arr) fs.push_back(lab == 0 ? &u : &v);
      sum -= tensor_of(fs);
    }
  }
  // + v (x) u (x) sum_{k=0}^{m-1} sum_sigma (u^{x (m-k-1)} (x) v^{x k})
  for (int k = 0; k <= m - 1; ++k) {
    std::vector<int> labels(m - k - 1, 0);
    labels.insert(labels.end(), k, 1);
    for (const std::vector<int>& arr : multiset_arrangements(labels)) {
      std::vector<const ComplexVector*> fs = {&v, &u};
      for (int lab : arr) fs.push_back(lab == 0 ? &u : &v);
      sum += tensor_of(fs);
    }
  }

  std::vector<const ComplexVector*> fs(m + 1, &u);
  return (sum - tensor_of(fs)).norm();
}

}  // namespace detail

struct RepeatedExpansion {
  enum class Path { kPairDiag, kEq13Printed, kLeastSquares };
  std::vector<ExpansionTerm> terms;
  Path path;
  double residual;          // of the returned expansion
  double printed_residual;  // of the typeset identity attempt (NaN if skipped)
};

inline std::string to_string(RepeatedExpansion::Path p) {
  switch (p) {
    case RepeatedExpansion::Path::kPairDiag: return "pair-diag";
    case RepeatedExpansion::Path::kEq13Printed: return "printed-identity";
    case RepeatedExpansion::Path::kLeastSquares: return "least-squares";
  }
  throw UsageError("to_string: unknown expansion path");
}

/// Supporting family for expanding |e_i>^{x (m+1)}: every phase-pair and
/// mixed-pattern cover member generated for that direction. All members have
/// mutually orthonormal factors.
inline SpanningFamily repeated_support_family(int i, int j, int m, int d) {
  if (i == j) throw UsageError("repeated_support_family: indices must differ");
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw UsageError("repeated_support_family: index out of range");
  }
  if (m + 1 > d) {
    throw UsageError("repeated_support_family: need m + 1 <= d");
  }
  ComplexMatrix basis = ComplexMatrix::Identity(d, d);
  std::vector<ComplexVector> fillers;
  for (int l = 0; l < d; ++l) {
    if (l != i && l != j) fillers.push_back(basis.col(l));
  }
  detail::MemberPool pool;
  for (detail::RawMember& mem : detail::all_equal_cover(
           basis.col(i), basis.col(j),
           std::span<const ComplexVector>(fillers), m + 1,
           "support(" + std::to_string(i) + "," + std::to_string(j) + ")")) {
    pool.add(std::move(mem));
  }
  return detail::family_from_raw(FamilyClass::kOrthogonal, d, m + 1,
                                 pool.take());
}

/// Expands |e_i>^{x (m+1)} over orthogonal-factor members. m == 1 reduces to
/// the exact two-factor decomposition. Otherwise the typeset identity is
/// evaluated first; since it fails numerically, the expansion falls back to a
/// least-squares projection onto the span of category1_family, which must
/// reach residual 1e-8.
inline RepeatedExpansion expand_repeated(int i, int j, int m, int d,
                                         const SpanningFamily& category1_family) {
  if (i == j) throw UsageError("expand_repeated: indices must differ");
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw UsageError("expand_repeated: index out of range");
  }
  if (m < 1) throw UsageError("expand_repeated: m must be at least 1");
  if (m + 1 > d) throw UsageError("expand_repeated: need m + 1 <= d");

  if (m == 1) {
    std::vector<ExpansionTerm> terms = expand_pair_diag(i, j, d);
    ComplexVector sum =
        ComplexVector::Zero(detail::pow_index(d, 2));
    for (const ExpansionTerm& t : terms) {
      sum += t.coefficient * t.member.expansion();
    }
    ComplexVector target = tensor({basis_ket(d, i).amplitudes(),
                                   basis_ket(d, i).amplitudes()});
    const double residual = (sum - target).norm();
    return {std::move(terms), RepeatedExpansion::Path::kPairDiag, residual,
            std::numeric_limits<double>::quiet_NaN()};
  }

  if (category1_family.d() != d || category1_family.n() != m + 1) {
    throw UsageError("expand_repeated: category1_family shape mismatch");
  }

  const double printed =
      detail::printed_repeated_identity_residual(i, j, m, d);

  ComplexVector u = basis_ket(d, i).amplitudes();
  std::vector<ComplexVector> reps(m + 1, u);
  ComplexVector target = tensor(std::span<const ComplexVector>(reps));

  ComplexMatrix stacked = category1_family.stacked_expansions();
  auto [coeffs, residual] = detail::project_onto_span(stacked, target);

  RepeatedExpansion out;
  out.printed_residual = printed;
  if (printed <= tol::kExpansionResidual) {
    out.path = RepeatedExpansion::Path::kEq13Printed;
  } else {
    out.path = RepeatedExpansion::Path::kLeastSquares;
  }
  out.residual = residual;
  if (residual > tol::kExpansionResidual) {
    throw ConstructionFailure(
        "expand_repeated: no expansion within tolerance on either path "
        "(residual " + std::to_string(residual) + ")");
  }
  const auto& members = category1_family.members();
  out.terms.reserve(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    const Complex c = coeffs[static_cast<Eigen::Index>(k)];
    if (std::abs(c) > 1e-14) {
      out.terms.push_back({c, members[k]});
    }
  }
  return out;
}

/// A finite family of orthogonal-factor product states spanning the whole
/// composite space (C^d)^{x n}, 2 <= n <= d. Products of distinct basis
/// vectors enter directly; repeated-index patterns are resolved on orthogonal
/// subspace blocks and re-arranged; all-equal powers go through the
/// phase-pair covers.
inline SpanningFamily orthogonal_spanning_family(int d, int n) {
  if (n < 2 || n > d) {
    throw UsageError("orthogonal_spanning_family: need 2 <= n <= d");
  }
  ComplexMatrix basis = ComplexMatrix::Identity(d, d);
  detail::MemberPool pool;
  detail::for_each_multiset(d, n, [&](const std::vector<int>& ms) {
    detail::append_multiset_cover(pool, basis, ms);
  });
  SpanningFamily family = detail::family_from_raw(FamilyClass::kOrthogonal, d,
                                                  n, pool.take());

  // The construction must span; certify via the frame spectrum.
  ComplexMatrix stacked = family.stacked_expansions();
  ComplexMatrix frame = stacked * stacked.adjoint();
  frame = Complex(0.5, 0.0) * (frame + frame.adjoint().eval());
  EigResult eig = eig_hermitian(frame);
  const double lmin = eig.eigenvalues[0];
  const double lmax = eig.eigenvalues[eig.eigenvalues.size() - 1];
  if (!(lmin > tol::kCertifyRel * lmax)) {
    throw ConstructionFailure(
        "orthogonal_spanning_family: construction does not span (rank "
        "deficiency detected)");
  }
  return family;
}

}  // namespace orthocert
