#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <type_traits>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include "mnqp/error.hpp"
#include "mnqp/problem.hpp"

namespace mnqp {

/// Systems up to this dimension are factorized densely.
inline constexpr Index kDenseFactorizationLimit = 600;
/// Relative pivot threshold for declaring a matrix singular.
inline constexpr double kSingularPivotTolerance = 1e-13;

/// Counts factorizations of freshly assembled Jacobians. Solves are free.
struct FactorizationCounter {
  std::int64_t count = 0;
};

/// Immutable LU factors of a square system. Copies share the factors, so a
/// Factorization may be handed to several threads for concurrent solves.
///
/// Rows and then columns are equilibrated by powers of two before factoring,
/// so the relative pivot test does not depend on how the unknowns and
/// equations are scaled.
template <typename Scalar = double>
class Factorization {
 public:
  using Vec = Vector<Scalar>;
  using DenseLu = Eigen::PartialPivLU<DenseMatrix<Scalar>>;
  using SparseLu = Eigen::SparseLU<SparseMatrix<Scalar>, Eigen::COLAMDOrdering<Index>>;

  Factorization() = default;

  Index dimension() const { return dim_; }
  bool dense() const { return std::holds_alternative<std::shared_ptr<const DenseLu>>(lu_); }
  /// Iteration at which the factored matrix was assembled (-1 if unknown).
  Index creation_iteration() const { return creation_iteration_; }
  bool empty() const { return dim_ == 0; }

  Vec solve(const Vec& rhs) const {
    if (rhs.size() != dim_) throw DimensionError("right-hand side has wrong length");
    const Vec scaled = (row_scale_.array() * rhs.array()).matrix();
    Vec y;
    if (const auto* d = std::get_if<std::shared_ptr<const DenseLu>>(&lu_)) {
      y = (*d)->solve(scaled);
    } else {
      // SparseLU::solve is logically const but not marked so.
      y = std::get<std::shared_ptr<SparseLu>>(lu_)->solve(scaled);
    }
    return (col_scale_.array() * y.array()).matrix();
  }

  static Factorization from_dense(const DenseMatrix<Scalar>& A, Index iteration) {
    check_square(A.rows(), A.cols());
    Factorization f;
    f.row_scale_ = Vec::Zero(A.rows());
    f.col_scale_ = Vec::Zero(A.cols());
    for (Index j = 0; j < A.cols(); ++j) {
      for (Index i = 0; i < A.rows(); ++i) f.row_scale_(i) = std::max(f.row_scale_(i), Scalar(std::abs(A(i, j))));
    }
    f.invert_row_scale();
    for (Index j = 0; j < A.cols(); ++j) {
      for (Index i = 0; i < A.rows(); ++i) {
        f.col_scale_(j) = std::max(f.col_scale_(j), Scalar(std::abs(f.row_scale_(i) * A(i, j))));
      }
    }
    f.invert_col_scale();
    const DenseMatrix<Scalar> S = f.row_scale_.asDiagonal() * A * f.col_scale_.asDiagonal();
    auto lu = std::make_shared<DenseLu>(S);
    const auto& LU = lu->matrixLU();
    const Scalar threshold = Scalar(kSingularPivotTolerance) * S.cwiseAbs().maxCoeff();
    for (Index i = 0; i < LU.rows(); ++i) {
      if (!(std::abs(LU(i, i)) > threshold)) throw singular(i);
    }
    f.dim_ = A.rows();
    f.creation_iteration_ = iteration;
    f.lu_ = std::shared_ptr<const DenseLu>(std::move(lu));
    return f;
  }

  static Factorization from_sparse(const SparseMatrix<Scalar>& A, Index iteration) {
    check_square(A.rows(), A.cols());
    using It = typename SparseMatrix<Scalar>::InnerIterator;
    Factorization f;
    f.row_scale_ = Vec::Zero(A.rows());
    f.col_scale_ = Vec::Zero(A.cols());
    for (Index k = 0; k < A.outerSize(); ++k) {
      for (It it(A, k); it; ++it) f.row_scale_(it.row()) = std::max(f.row_scale_(it.row()), Scalar(std::abs(it.value())));
    }
    f.invert_row_scale();
    for (Index k = 0; k < A.outerSize(); ++k) {
      for (It it(A, k); it; ++it) {
        f.col_scale_(it.col()) = std::max(f.col_scale_(it.col()), Scalar(std::abs(f.row_scale_(it.row()) * it.value())));
      }
    }
    f.invert_col_scale();
    SparseMatrix<Scalar> S = f.row_scale_.asDiagonal() * A * f.col_scale_.asDiagonal();
    Scalar scale(0);
    for (Index k = 0; k < S.outerSize(); ++k) {
      for (It it(S, k); it; ++it) scale = std::max(scale, Scalar(std::abs(it.value())));
    }
    auto lu = std::make_shared<SparseLu>();
    lu->setPivotThreshold(Scalar(1));
    lu->compute(S);
    if (lu->info() != Eigen::Success) throw SingularMatrixError(-1, "singular matrix: " + lu->lastErrorMessage());
    // The diagonal of U sits inside the supernodes of the stored L factor.
    const Scalar threshold = Scalar(kSingularPivotTolerance) * scale;
    const auto& Ls = lu->matrixL().m_mapL;
    for (Index j = 0; j < A.cols(); ++j) {
      Scalar pivot(0);
      for (typename std::decay_t<decltype(Ls)>::InnerIterator it(Ls, j); it; ++it) {
        if (it.row() == j) pivot = it.value();
      }
      if (!(std::abs(pivot) > threshold)) throw singular(j);
    }
    f.dim_ = A.rows();
    f.creation_iteration_ = iteration;
    f.lu_ = std::move(lu);
    return f;
  }

 private:
  static void check_square(Index rows, Index cols) {
    if (rows != cols) throw DimensionError("factorize needs a square matrix");
    if (rows == 0) throw DimensionError("factorize needs a nonempty matrix");
  }

  static SingularMatrixError singular(Index i) {
    return SingularMatrixError(i, "singular matrix: pivot " + std::to_string(i) + " below tolerance");
  }

  // Largest magnitudes become the power of two nearest their reciprocal; a
  // zero row or column is singular outright.
  static Scalar power_of_two_reciprocal(Scalar m) { return std::exp2(-std::round(std::log2(m))); }

  void invert_row_scale() {
    for (Index i = 0; i < row_scale_.size(); ++i) {
      if (!(row_scale_(i) > Scalar(0)) || !std::isfinite(row_scale_(i))) throw singular(i);
      row_scale_(i) = power_of_two_reciprocal(row_scale_(i));
    }
  }

  void invert_col_scale() {
    for (Index j = 0; j < col_scale_.size(); ++j) {
      if (!(col_scale_(j) > Scalar(0)) || !std::isfinite(col_scale_(j))) throw singular(j);
      col_scale_(j) = power_of_two_reciprocal(col_scale_(j));
    }
  }

  Index dim_ = 0;
  Index creation_iteration_ = -1;
  Vec row_scale_;
  Vec col_scale_;
  std::variant<std::shared_ptr<const DenseLu>, std::shared_ptr<SparseLu>> lu_;
};

/// Factorizes without touching any counter (used for patched systems and
/// bookkeeping-free solves).
template <typename Scalar>
Factorization<Scalar> factorize(const SparseMatrix<Scalar>& A, Index iteration = -1) {
  if (A.rows() <= kDenseFactorizationLimit) return Factorization<Scalar>::from_dense(DenseMatrix<Scalar>(A), iteration);
  return Factorization<Scalar>::from_sparse(A, iteration);
}

template <typename Scalar>
Factorization<Scalar> factorize(const DenseMatrix<Scalar>& A, Index iteration = -1) {
  if (A.rows() <= kDenseFactorizationLimit) return Factorization<Scalar>::from_dense(A, iteration);
  return Factorization<Scalar>::from_sparse(A.sparseView(), iteration);
}

/// Counted factorization: the counter moves only when the factors exist.
template <typename Scalar>
Factorization<Scalar> factorize(const SparseMatrix<Scalar>& A, FactorizationCounter& counter, Index iteration = -1) {
  auto f = factorize(A, iteration);
  ++counter.count;
  return f;
}

template <typename Scalar>
Factorization<Scalar> factorize(const DenseMatrix<Scalar>& A, FactorizationCounter& counter, Index iteration = -1) {
  auto f = factorize(A, iteration);
  ++counter.count;
  return f;
}

template <typename Scalar>
Vector<Scalar> solve(const Factorization<Scalar>& f, const Vector<Scalar>& rhs) {
  return f.solve(rhs);
}

}  // namespace mnqp
