#pragma once

#include <algorithm>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "markovgap/linalg.hpp"

namespace markovgap {

using Index = Eigen::Index;

/// Strictly increasing list of mode indices selecting rows/columns of a
/// covariance matrix.
class ModeMask {
 public:
  ModeMask() = default;

  explicit ModeMask(std::vector<Index> indices) : indices_(std::move(indices)) {
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (indices_[k] < 0 || (k > 0 && indices_[k] <= indices_[k - 1])) {
        throw ValidationError("ModeMask: indices must be non-negative and strictly increasing");
      }
    }
  }

  ModeMask(std::initializer_list<Index> indices) : ModeMask(std::vector<Index>(indices)) {}

  /// Sorts and deduplicates arbitrary input.
  static ModeMask from_unsorted(std::vector<Index> indices) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return ModeMask(std::move(indices));
  }

  static ModeMask range(Index begin, Index end) {
    std::vector<Index> idx;
    for (Index i = begin; i < end; ++i) idx.push_back(i);
    return ModeMask(std::move(idx));
  }

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  Index operator[](std::size_t k) const { return indices_[k]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  const std::vector<Index>& indices() const { return indices_; }

  bool contains(Index i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  /// Position of mode i inside the mask.
  std::optional<std::size_t> position_of(Index i) const {
    auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
    if (it == indices_.end() || *it != i) return std::nullopt;
    return static_cast<std::size_t>(it - indices_.begin());
  }

  void check_within(Index dim) const {
    if (!indices_.empty() && indices_.back() >= dim) {
      throw ValidationError("ModeMask: index " + std::to_string(indices_.back()) +
                            " out of range for dimension " + std::to_string(dim));
    }
  }

  /// Re-expresses `sub` (a subset of this mask) in the local coordinates of
  /// this mask.
  ModeMask relabel(const ModeMask& sub) const {
    std::vector<Index> local;
    local.reserve(sub.size());
    for (Index i : sub) {
      auto pos = position_of(i);
      if (!pos) throw ValidationError("ModeMask::relabel: mode not contained in parent mask");
      local.push_back(static_cast<Index>(*pos));
    }
    return ModeMask(std::move(local));
  }

  friend bool operator==(const ModeMask&, const ModeMask&) = default;

 private:
  std::vector<Index> indices_;
};

inline ModeMask mask_union(const ModeMask& a, const ModeMask& b) {
  std::vector<Index> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return ModeMask(std::move(out));
}

inline ModeMask mask_intersection(const ModeMask& a, const ModeMask& b) {
  std::vector<Index> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return ModeMask(std::move(out));
}

inline ModeMask mask_difference(const ModeMask& a, const ModeMask& b) {
  std::vector<Index> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return ModeMask(std::move(out));
}

inline bool disjoint(const ModeMask& a, const ModeMask& b) {
  return mask_intersection(a, b).empty();
}

inline constexpr double kHermitianTolerance = 1e-12;

/// C_ij = <c_i^dagger c_j> of a particle-number conserving Gaussian state.
/// Construction rejects non-Hermitian input and stores the exactly Hermitian
/// part.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;

  explicit CovarianceMatrix(Matrix entries) {
    if (entries.rows() != entries.cols()) {
      throw ValidationError("CovarianceMatrix: matrix is not square");
    }
    const double defect = linalg::hermiticity_defect(entries);
    if (!(defect <= kHermitianTolerance)) {
      throw ValidationError("CovarianceMatrix: not Hermitian (max |C - C^dagger| = " +
                            std::to_string(defect) + ")");
    }
    entries_ = linalg::hermitian_part(entries);
  }

  static CovarianceMatrix diagonal(std::initializer_list<double> occupations) {
    RealVector d(static_cast<Index>(occupations.size()));
    Index k = 0;
    for (double v : occupations) d(k++) = v;
    return CovarianceMatrix(Matrix(d.cast<cplx>().asDiagonal()));
  }

  Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  cplx operator()(Index i, Index j) const { return entries_(i, j); }

  /// max |C^2 - C|; zero for pure states.
  double purity_defect() const { return linalg::max_abs(entries_ * entries_ - entries_); }

 private:
  Matrix entries_;
};

/// Principal submatrix in the order of the mask.
inline Matrix restrict(const Matrix& c, const ModeMask& mask) {
  mask.check_within(c.rows());
  return c(mask.indices(), mask.indices());
}

inline CovarianceMatrix restrict(const CovarianceMatrix& c, const ModeMask& mask) {
  return CovarianceMatrix(restrict(c.entries(), mask));
}

/// Block-diagonal direct sum; modes of `b` follow those of `a`.
inline Matrix direct_sum(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// max |S conj(M) S^-1 - M| for a unitary S; zero when M commutes with the
/// antiunitary S K.
inline double tr_defect(const Matrix& m, const Matrix& s) {
  return linalg::max_abs(s * m.conjugate() * s.adjoint() - m);
}

}  // namespace markovgap
