// Copyright 2026 The ffu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FFU_MATRIX_HPP_
#define FFU_MATRIX_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ffu/errors.hpp"

namespace ffu {

// Dense double matrices, row-major, dynamic size.  Supported scale is
// k <= ~1500; everything in this library is dense by design.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Semantic alias for a square matrix that is symmetric by convention.
// Symmetry is maintained at construction sites (Covariance symmetrizes and
// refuses non-PD input; the optimizer re-symmetrizes after every update).
using SymMatrix = Matrix;

// Relative pivot tolerance of the Cholesky factorization: a pivot
// <= kCholeskyPivotRelTol * (max diagonal entry) counts as failure.  This
// separates "numerically singular" from "positive definite" without an
// eigendecomposition.
inline constexpr double kCholeskyPivotRelTol = 1e-12;

// Relative singular-value cutoff of the Moore-Penrose pseudo-inverse.
inline constexpr double kPinvRelTol = 1e-12;

inline SymMatrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

// Lower-triangular Cholesky factor of an SPD matrix; grants solves and
// inverses without ever forming the inverse unless asked to.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}

  Index order() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  // Solves (L L^T) x = rhs for a vector or matrix right-hand side.
  template <typename Rhs>
  auto solve(const Rhs& rhs) const {
    if (rhs.rows() != lower_.rows()) {
      throw DimensionMismatch("cholesky solve: rhs has " +
                              std::to_string(rhs.rows()) + " rows, factor is " +
                              std::to_string(lower_.rows()));
    }
    return lower_.transpose()
        .template triangularView<Eigen::Upper>()
        .solve(lower_.template triangularView<Eigen::Lower>().solve(rhs))
        .eval();
  }

  // Explicit inverse of the factored matrix, symmetrized.
  SymMatrix inverse() const {
    const Index k = lower_.rows();
    return symmetrized(solve(Matrix::Identity(k, k)));
  }

 private:
  Matrix lower_;  // strictly positive diagonal by construction
};

// Cholesky factorization that reports failure through the return value, for
// call sites (line search) where "not PD" is an expected outcome.
inline std::optional<CholeskyFactor> try_cholesky(const SymMatrix& m) {
  const Index k = m.rows();
  if (k < 1 || m.cols() != k) return std::nullopt;
  const double pivot_floor = kCholeskyPivotRelTol * m.diagonal().maxCoeff();
  Matrix l = Matrix::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    const double pivot = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > pivot_floor)) return std::nullopt;  // also rejects NaN
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    const Index rem = k - j - 1;
    if (rem > 0) {
      l.col(j).tail(rem) =
          (m.col(j).tail(rem) -
           l.bottomRows(rem).leftCols(j) * l.row(j).head(j).transpose()) /
          ljj;
    }
  }
  return CholeskyFactor(std::move(l));
}

// Throwing variant for call sites where non-PD input is a contract violation.
inline CholeskyFactor cholesky(const SymMatrix& m) {
  auto factor = try_cholesky(m);
  if (!factor) {
    throw NotPositiveDefinite("cholesky: matrix of order " +
                              std::to_string(m.rows()) +
                              " is not positive definite");
  }
  return *std::move(factor);
}

template <typename Rhs>
auto solve_spd(const CholeskyFactor& factor, const Rhs& rhs) {
  return factor.solve(rhs);
}

inline SymMatrix inverse_spd(const CholeskyFactor& factor) {
  return factor.inverse();
}

// Moore-Penrose pseudo-inverse via SVD with the standard rank-revealing
// cutoff relative to the largest singular value.
inline Matrix pseudo_inverse(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  const double cutoff = kPinvRelTol * sv(0);
  Vector inv_sv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) inv_sv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

// (A (x) B) vec(C) = vec(B C A^T): applies a Kronecker-product operator to a
// vectorized matrix without materializing A (x) B.  Returns B * C * A^T.
inline Matrix kron_apply(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (c.rows() != b.cols() || c.cols() != a.cols()) {
    throw DimensionMismatch(
        "kron_apply: need C of shape " + std::to_string(b.cols()) + "x" +
        std::to_string(a.cols()) + ", got " + std::to_string(c.rows()) + "x" +
        std::to_string(c.cols()));
  }
  return b * c * a.transpose();
}

// Dense Kronecker product, for composition and for test oracles that
// materialize what kron_apply computes implicitly.
inline Matrix kron_dense(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Numerical rank with the same relative cutoff as pseudo_inverse.
inline Index svd_rank(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = kPinvRelTol * sv(0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

}  // namespace ffu

#endif  // FFU_MATRIX_HPP_
