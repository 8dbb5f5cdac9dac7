#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mnqp/error.hpp"
#include "mnqp/raw_qp.hpp"

namespace mnqp {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, Index>;

/// Maps the variables of a preprocessed problem back to the raw columns.
struct VariableMap {
  Index raw_columns = 0;
  std::vector<Index> kept;                  // raw column of each reduced variable
  std::vector<std::pair<Index, double>> fixed;  // eliminated raw column, value

  static VariableMap identity(Index n) {
    VariableMap map;
    map.raw_columns = n;
    map.kept.resize(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) map.kept[static_cast<std::size_t>(j)] = j;
    return map;
  }

  template <typename Scalar>
  Vector<Scalar> expand(const Vector<Scalar>& x) const {
    Vector<Scalar> raw = Vector<Scalar>::Zero(raw_columns);
    for (std::size_t k = 0; k < kept.size(); ++k) raw(kept[k]) = x(static_cast<Index>(k));
    for (const auto& [col, value] : fixed) raw(col) = static_cast<Scalar>(value);
    return raw;
  }

  template <typename Scalar>
  Vector<Scalar> reduce(const Vector<Scalar>& raw) const {
    Vector<Scalar> x(static_cast<Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) x(static_cast<Index>(k)) = raw(kept[k]);
    return x;
  }
};

/// min ½xᵀHx + cᵀx  s.t.  A_eq x = b_eq,  A_in x ≥ b_in.
///
/// Immutable once constructed; the constructor checks dimensions and the
/// symmetry of H (relative tolerance 1e-12 in the Frobenius norm).
template <typename Scalar = double>
class QpProblem {
 public:
  using Sparse = SparseMatrix<Scalar>;
  using Vec = Vector<Scalar>;

  QpProblem(std::string name, Sparse H, Vec c, Sparse A_eq, Vec b_eq, Sparse A_in, Vec b_in,
            Scalar objective_offset = Scalar(0), VariableMap variables = {})
      : name_(std::move(name)),
        H_(std::move(H)),
        c_(std::move(c)),
        A_eq_(std::move(A_eq)),
        b_eq_(std::move(b_eq)),
        A_in_(std::move(A_in)),
        b_in_(std::move(b_in)),
        offset_(objective_offset),
        variables_(std::move(variables)) {
    const Index n = c_.size();
    if (n < 1) throw DimensionError("problem needs at least one variable");
    if (H_.rows() != n || H_.cols() != n) throw DimensionError("H must be n x n");
    if (A_eq_.cols() != n || A_eq_.rows() != b_eq_.size()) throw DimensionError("A_eq/b_eq mismatch");
    if (A_in_.cols() != n || A_in_.rows() != b_in_.size()) throw DimensionError("A_in/b_in mismatch");
    H_.makeCompressed();
    A_eq_.makeCompressed();
    A_in_.makeCompressed();
    const Sparse Ht = H_.transpose();
    const Scalar asym = (H_ - Ht).norm();
    if (asym > Scalar(1e-12) * H_.norm()) throw DimensionError("H is not symmetric");
    if (variables_.kept.empty()) variables_ = VariableMap::identity(n);
  }

  static QpProblem from_dense(std::string name, const DenseMatrix<Scalar>& H, const Vec& c,
                              const DenseMatrix<Scalar>& A_eq, const Vec& b_eq,
                              const DenseMatrix<Scalar>& A_in, const Vec& b_in) {
    return QpProblem(std::move(name), H.sparseView(), c, A_eq.sparseView(), b_eq, A_in.sparseView(), b_in);
  }

  const std::string& name() const { return name_; }
  const Sparse& H() const { return H_; }
  const Vec& c() const { return c_; }
  const Sparse& A_eq() const { return A_eq_; }
  const Vec& b_eq() const { return b_eq_; }
  const Sparse& A_in() const { return A_in_; }
  const Vec& b_in() const { return b_in_; }
  Scalar objective_offset() const { return offset_; }
  const VariableMap& variables() const { return variables_; }

  Index n() const { return c_.size(); }
  Index m_eq() const { return b_eq_.size(); }
  Index m_in() const { return b_in_.size(); }
  /// Length of z = (x, λ_eq, λ_in, s).
  Index pd_dimension() const { return n() + m_eq() + 2 * m_in(); }

  Scalar objective(const Vec& x) const {
    return Scalar(0.5) * x.dot(H_ * x) + c_.dot(x) + offset_;
  }

 private:
  std::string name_;
  Sparse H_;
  Vec c_;
  Sparse A_eq_;
  Vec b_eq_;
  Sparse A_in_;
  Vec b_in_;
  Scalar offset_;
  VariableMap variables_;
};

enum class SizeClass { S, M, L };

struct ProblemClass {
  Index total_pd_vars = 0;
  SizeClass size = SizeClass::S;
};

inline ProblemClass classify(Index n, Index m_eq, Index m_in) {
  ProblemClass pc;
  pc.total_pd_vars = n + m_eq + 2 * m_in;
  if (pc.total_pd_vars < 500) {
    pc.size = SizeClass::S;
  } else if (pc.total_pd_vars < 10000) {
    pc.size = SizeClass::M;
  } else {
    pc.size = SizeClass::L;
  }
  return pc;
}

template <typename Scalar>
ProblemClass classify(const QpProblem<Scalar>& p) {
  return classify(p.n(), p.m_eq(), p.m_in());
}

inline const char* to_string(SizeClass c) {
  switch (c) {
    case SizeClass::S: return "S";
    case SizeClass::M: return "M";
    case SizeClass::L: return "L";
  }
  return "?";
}

/// Minimum number of inequality rows for a problem to be accepted.
inline constexpr Index kMinInequalities = 4;
/// Bounds and right-hand sides at or beyond this magnitude are infinite.
inline constexpr double kInfiniteBound = 1e20;

namespace detail {

inline bool finite_bound(double v) { return std::abs(v) < kInfiniteBound; }

inline bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::max(std::abs(a), std::abs(b))); }

}  // namespace detail

/// Rewrites a raw QP into the equality/inequality form used by the solver.
///
/// Variables fixed by an FX bound, or by an equality row with a single
/// nonzero that pins the variable at one of its bounds, are eliminated
/// together with that row (repeated until no such row remains). Ranged rows and finite variable bounds become ≥ rows of A_in:
/// general rows first in file order, then bounds per variable (lower, upper).
/// Free variables get no rows. Throws ProblemError on an inconsistent fixing
/// and FilterError when fewer than four inequality rows remain.
template <typename Scalar = double>
QpProblem<Scalar> preprocess(const RawQp& raw) {
  using detail::close;
  using detail::finite_bound;
  const auto ncol = static_cast<Index>(raw.columns.size());
  const auto nrow = static_cast<Index>(raw.rows.size());
  if (ncol == 0) throw ProblemError(-1, "problem has no columns");

  std::vector<std::vector<std::pair<Index, double>>> row_entries(static_cast<std::size_t>(nrow));
  for (const auto& e : raw.entries) {
    if (e.row < 0 || e.row >= nrow || e.col < 0 || e.col >= ncol) throw ProblemError(e.row, "entry out of range");
    if (e.value != 0.0) row_entries[static_cast<std::size_t>(e.row)].push_back({e.col, e.value});
  }

  std::vector<bool> is_fixed(static_cast<std::size_t>(ncol), false);
  std::vector<double> fixed_value(static_cast<std::size_t>(ncol), 0.0);
  std::vector<bool> row_removed(static_cast<std::size_t>(nrow), false);

  auto fix = [&](Index col, double value, Index origin) {
    const auto& c = raw.columns[static_cast<std::size_t>(col)];
    const double lo = finite_bound(c.lower) ? c.lower : -INFINITY;
    const double up = finite_bound(c.upper) ? c.upper : INFINITY;
    if ((value < lo && !close(value, lo)) || (value > up && !close(value, up))) {
      throw ProblemError(origin, "fixed value of column '" + c.name + "' violates its bounds");
    }
    is_fixed[static_cast<std::size_t>(col)] = true;
    fixed_value[static_cast<std::size_t>(col)] = value;
  };

  for (Index j = 0; j < ncol; ++j) {
    const auto& c = raw.columns[static_cast<std::size_t>(j)];
    if (c.lower > c.upper) throw ProblemError(j, "column '" + c.name + "' has lower > upper");
    if (finite_bound(c.lower) && c.lower == c.upper) fix(j, c.lower, j);
  }

  auto is_equality = [&](Index i) {
    const auto& r = raw.rows[static_cast<std::size_t>(i)];
    return r.sense == RowSense::Equal && (!r.range || *r.range == 0.0);
  };

  // Residual right-hand side of row i once fixed columns are substituted.
  auto shifted_rhs = [&](Index i, double rhs) {
    for (auto [col, a] : row_entries[static_cast<std::size_t>(i)]) {
      if (is_fixed[static_cast<std::size_t>(col)]) rhs -= a * fixed_value[static_cast<std::size_t>(col)];
    }
    return rhs;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (Index i = 0; i < nrow; ++i) {
      if (row_removed[static_cast<std::size_t>(i)] || !is_equality(i)) continue;
      Index live = 0;
      Index col = -1;
      double coef = 0.0;
      for (auto [j, a] : row_entries[static_cast<std::size_t>(i)]) {
        if (!is_fixed[static_cast<std::size_t>(j)]) {
          ++live;
          col = j;
          coef = a;
        }
      }
      if (live != 1) continue;
      const double value = shifted_rhs(i, raw.rows[static_cast<std::size_t>(i)].rhs) / coef;
      const auto& bounds = raw.columns[static_cast<std::size_t>(col)];
      const bool at_bound = (finite_bound(bounds.lower) && close(value, bounds.lower)) ||
                            (finite_bound(bounds.upper) && close(value, bounds.upper));
      if (!at_bound) continue;
      fix(col, value, i);
      row_removed[static_cast<std::size_t>(i)] = true;
      changed = true;
    }
  }

  VariableMap map;
  map.raw_columns = ncol;
  std::vector<Index> reduced(static_cast<std::size_t>(ncol), -1);
  for (Index j = 0; j < ncol; ++j) {
    if (is_fixed[static_cast<std::size_t>(j)]) {
      map.fixed.push_back({j, fixed_value[static_cast<std::size_t>(j)]});
    } else {
      reduced[static_cast<std::size_t>(j)] = static_cast<Index>(map.kept.size());
      map.kept.push_back(j);
    }
  }
  const auto n = static_cast<Index>(map.kept.size());
  if (n == 0) throw FilterError(-1, "every variable is fixed");

  const double sign = raw.maximize ? -1.0 : 1.0;

  // Full symmetric Hessian over raw columns.
  std::map<std::pair<Index, Index>, double> hess;
  for (const auto& q : raw.quadratic) {
    if (q.row < 0 || q.row >= ncol || q.col < 0 || q.col >= ncol) throw ProblemError(q.row, "quadratic entry out of range");
    if (raw.quad_convention == QuadConvention::LowerTriangle) {
      hess[{q.row, q.col}] += q.value;
      if (q.row != q.col) hess[{q.col, q.row}] += q.value;
    } else {
      hess[{q.row, q.col}] += 0.5 * q.value;
      hess[{q.col, q.row}] += 0.5 * q.value;
    }
  }

  double offset = sign * raw.objective_constant;
  std::vector<double> cost(static_cast<std::size_t>(ncol));
  for (Index j = 0; j < ncol; ++j) cost[static_cast<std::size_t>(j)] = sign * raw.columns[static_cast<std::size_t>(j)].cost;

  using Triplet = Eigen::Triplet<Scalar, Index>;
  std::vector<Triplet> h_trip;
  Vector<Scalar> c(n);
  for (Index j = 0; j < ncol; ++j) {
    if (!is_fixed[static_cast<std::size_t>(j)]) c(reduced[static_cast<std::size_t>(j)]) = static_cast<Scalar>(cost[static_cast<std::size_t>(j)]);
  }
  for (const auto& [ij, v0] : hess) {
    const double v = sign * v0;
    auto [i, j] = ij;
    const bool fi = is_fixed[static_cast<std::size_t>(i)];
    const bool fj = is_fixed[static_cast<std::size_t>(j)];
    if (!fi && !fj) {
      h_trip.emplace_back(reduced[static_cast<std::size_t>(i)], reduced[static_cast<std::size_t>(j)], static_cast<Scalar>(v));
    } else if (!fi && fj) {
      c(reduced[static_cast<std::size_t>(i)]) += static_cast<Scalar>(v * fixed_value[static_cast<std::size_t>(j)]);
    } else if (fi && fj) {
      offset += 0.5 * v * fixed_value[static_cast<std::size_t>(i)] * fixed_value[static_cast<std::size_t>(j)];
    }
  }
  for (const auto& [col, value] : map.fixed) offset += cost[static_cast<std::size_t>(col)] * value;

  std::vector<Triplet> eq_trip;
  std::vector<Triplet> in_trip;
  std::vector<Scalar> b_eq;
  std::vector<Scalar> b_in;

  auto emit_in = [&](Index i, double s, double rhs) {
    const auto r = static_cast<Index>(b_in.size());
    for (auto [j, a] : row_entries[static_cast<std::size_t>(i)]) {
      if (!is_fixed[static_cast<std::size_t>(j)]) in_trip.emplace_back(r, reduced[static_cast<std::size_t>(j)], static_cast<Scalar>(s * a));
    }
    b_in.push_back(static_cast<Scalar>(s * rhs));
  };

  for (Index i = 0; i < nrow; ++i) {
    if (row_removed[static_cast<std::size_t>(i)]) continue;
    const auto& row = raw.rows[static_cast<std::size_t>(i)];
    bool empty = true;
    for (auto [j, a] : row_entries[static_cast<std::size_t>(i)]) {
      if (!is_fixed[static_cast<std::size_t>(j)]) empty = false;
    }
    const double shift = shifted_rhs(i, 0.0);  // −Σ a_j x_j over fixed columns

    // Row bounds lo ≤ aᵀx ≤ up before substitution.
    double lo = -INFINITY;
    double up = INFINITY;
    const double b = row.rhs;
    switch (row.sense) {
      case RowSense::Equal:
        lo = up = b;
        if (row.range && *row.range > 0) up = b + std::abs(*row.range);
        if (row.range && *row.range < 0) lo = b - std::abs(*row.range);
        break;
      case RowSense::GreaterEqual:
        lo = b;
        if (row.range) up = b + std::abs(*row.range);
        break;
      case RowSense::LessEqual:
        up = b;
        if (row.range) lo = b - std::abs(*row.range);
        break;
    }
    if (!finite_bound(lo)) lo = -INFINITY;
    if (!finite_bound(up)) up = INFINITY;
    if (empty) {
      const double value = -shift;
      if ((std::isfinite(lo) && value < lo && !close(value, lo)) ||
          (std::isfinite(up) && value > up && !close(value, up))) {
        throw ProblemError(i, "row '" + row.name + "' is infeasible after eliminating fixed variables");
      }
      continue;
    }
    if (std::isfinite(lo)) lo += shift;
    if (std::isfinite(up)) up += shift;
    if (lo == up) {
      const auto r = static_cast<Index>(b_eq.size());
      for (auto [j, a] : row_entries[static_cast<std::size_t>(i)]) {
        if (!is_fixed[static_cast<std::size_t>(j)]) eq_trip.emplace_back(r, reduced[static_cast<std::size_t>(j)], static_cast<Scalar>(a));
      }
      b_eq.push_back(static_cast<Scalar>(lo));
      continue;
    }
    if (std::isfinite(lo)) emit_in(i, 1.0, lo);
    if (std::isfinite(up)) emit_in(i, -1.0, up);
  }

  for (Index j : map.kept) {
    const auto& col = raw.columns[static_cast<std::size_t>(j)];
    const auto r = reduced[static_cast<std::size_t>(j)];
    if (finite_bound(col.lower)) {
      in_trip.emplace_back(static_cast<Index>(b_in.size()), r, Scalar(1));
      b_in.push_back(static_cast<Scalar>(col.lower));
    }
    if (finite_bound(col.upper)) {
      in_trip.emplace_back(static_cast<Index>(b_in.size()), r, Scalar(-1));
      b_in.push_back(static_cast<Scalar>(-col.upper));
    }
  }

  const auto m_in = static_cast<Index>(b_in.size());
  if (m_in < kMinInequalities) {
    throw FilterError(m_in, "problem '" + raw.name + "' has " + std::to_string(m_in) +
                                " inequality rows; at least " + std::to_string(kMinInequalities) + " are required");
  }

  SparseMatrix<Scalar> H(n, n);
  H.setFromTriplets(h_trip.begin(), h_trip.end());
  SparseMatrix<Scalar> A_eq(static_cast<Index>(b_eq.size()), n);
  A_eq.setFromTriplets(eq_trip.begin(), eq_trip.end());
  SparseMatrix<Scalar> A_in(m_in, n);
  A_in.setFromTriplets(in_trip.begin(), in_trip.end());
  Vector<Scalar> beq = Eigen::Map<Vector<Scalar>>(b_eq.data(), static_cast<Index>(b_eq.size()));
  Vector<Scalar> bin = Eigen::Map<Vector<Scalar>>(b_in.data(), m_in);
  return QpProblem<Scalar>(raw.name, std::move(H), std::move(c), std::move(A_eq), std::move(beq), std::move(A_in),
                           std::move(bin), static_cast<Scalar>(offset), std::move(map));
}

}  // namespace mnqp
