#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mnqp/error.hpp"
#include "mnqp/linsolve.hpp"
#include "mnqp/problem.hpp"

namespace mnqp {

/// Primal-dual point z = (x, λ_eq, λ_in, s). λ_in and s stay strictly positive
/// along the iteration.
template <typename Scalar = double>
struct Iterate {
  Vector<Scalar> x;
  Vector<Scalar> lambda_eq;
  Vector<Scalar> lambda_in;
  Vector<Scalar> s;

  Index size() const { return x.size() + lambda_eq.size() + lambda_in.size() + s.size(); }

  /// Stacked as [x; λ_eq; λ_in; s].
  Vector<Scalar> stacked() const {
    Vector<Scalar> z(size());
    z << x, lambda_eq, lambda_in, s;
    return z;
  }

  static Iterate unstack(const Vector<Scalar>& z, Index n, Index m_eq, Index m_in) {
    if (z.size() != n + m_eq + 2 * m_in) throw DimensionError("stacked vector has wrong length");
    return {z.segment(0, n), z.segment(n, m_eq), z.segment(n + m_eq, m_in), z.segment(n + m_eq + m_in, m_in)};
  }

  static Iterate zeros(Index n, Index m_eq, Index m_in) {
    return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(m_eq), Vector<Scalar>::Zero(m_in), Vector<Scalar>::Zero(m_in)};
  }
};

/// A search direction (Δx, Δλ_eq, Δλ_in, Δs) shares the layout of an iterate.
template <typename Scalar = double>
using Direction = Iterate<Scalar>;

template <typename Scalar>
Iterate<Scalar> unstack(const QpProblem<Scalar>& p, const Vector<Scalar>& z) {
  return Iterate<Scalar>::unstack(z, p.n(), p.m_eq(), p.m_in());
}

template <typename Scalar>
void check_dimensions(const QpProblem<Scalar>& p, const Iterate<Scalar>& z) {
  if (z.x.size() != p.n() || z.lambda_eq.size() != p.m_eq() || z.lambda_in.size() != p.m_in() ||
      z.s.size() != p.m_in()) {
    throw DimensionError("iterate does not match problem dimensions");
  }
}

/// F_μ(z) = [Hx + c − A_eqᵀλ_eq − A_inᵀλ_in; A_eq x − b_eq; A_in x − s − b_in; Λ_in S e − μe].
template <typename Scalar>
Vector<Scalar> residual(const QpProblem<Scalar>& p, const Iterate<Scalar>& z, Scalar mu) {
  check_dimensions(p, z);
  const Index n = p.n(), me = p.m_eq(), mi = p.m_in();
  Vector<Scalar> F(n + me + 2 * mi);
  F.segment(0, n) = p.H() * z.x + p.c() - p.A_eq().transpose() * z.lambda_eq - p.A_in().transpose() * z.lambda_in;
  F.segment(n, me) = p.A_eq() * z.x - p.b_eq();
  F.segment(n + me, mi) = p.A_in() * z.x - z.s - p.b_in();
  F.segment(n + me + mi, mi) = (z.lambda_in.array() * z.s.array() - mu).matrix();
  return F;
}

/// φ_μ(z) = ‖F_μ(z)‖₂.
template <typename Scalar>
Scalar merit(const QpProblem<Scalar>& p, const Iterate<Scalar>& z, Scalar mu) {
  return residual(p, z, mu).norm();
}

namespace detail {

template <typename Scalar>
void append_block(std::vector<Eigen::Triplet<Scalar, Index>>& out, const SparseMatrix<Scalar>& M, Index row0,
                  Index col0, Scalar scale = Scalar(1), bool transposed = false) {
  for (Index k = 0; k < M.outerSize(); ++k) {
    for (typename SparseMatrix<Scalar>::InnerIterator it(M, k); it; ++it) {
      if (transposed) {
        out.emplace_back(row0 + it.col(), col0 + it.row(), scale * it.value());
      } else {
        out.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
      }
    }
  }
}

template <typename Scalar>
void check_shadow(const QpProblem<Scalar>& p, const Vector<Scalar>& lambda_bar, const Vector<Scalar>& s_bar) {
  if (lambda_bar.size() != p.m_in() || s_bar.size() != p.m_in()) throw DimensionError("shadow values have wrong length");
}

}  // namespace detail

/// Unreduced Jacobian with the complementarity rows evaluated at (λ̄, s̄):
///
///   [ H     −A_eqᵀ  −A_inᵀ   0 ]
///   [ A_eq   0       0       0 ]
///   [ A_in   0       0      −I ]
///   [ 0      0       S̄       Λ̄ ]
///
/// The sparsity pattern does not depend on (λ̄, s̄); the diagonal blocks are
/// stored even where a value is zero.
template <typename Scalar>
SparseMatrix<Scalar> assemble_jacobian(const QpProblem<Scalar>& p, const Vector<Scalar>& lambda_bar,
                                       const Vector<Scalar>& s_bar) {
  detail::check_shadow(p, lambda_bar, s_bar);
  const Index n = p.n(), me = p.m_eq(), mi = p.m_in();
  const Index N = n + me + 2 * mi;
  std::vector<Eigen::Triplet<Scalar, Index>> t;
  t.reserve(static_cast<std::size_t>(p.H().nonZeros() + 2 * p.A_eq().nonZeros() + 2 * p.A_in().nonZeros() + 3 * mi));
  detail::append_block(t, p.H(), 0, 0);
  detail::append_block(t, p.A_eq(), 0, n, Scalar(-1), true);
  detail::append_block(t, p.A_in(), 0, n + me, Scalar(-1), true);
  detail::append_block(t, p.A_eq(), n, 0);
  detail::append_block(t, p.A_in(), n + me, 0);
  for (Index i = 0; i < mi; ++i) {
    t.emplace_back(n + me + i, n + me + mi + i, Scalar(-1));
    t.emplace_back(n + me + mi + i, n + me + i, s_bar(i));
    t.emplace_back(n + me + mi + i, n + me + mi + i, lambda_bar(i));
  }
  SparseMatrix<Scalar> J(N, N);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

/// Exact Jacobian F′(z).
template <typename Scalar>
SparseMatrix<Scalar> jacobian(const QpProblem<Scalar>& p, const Iterate<Scalar>& z) {
  return assemble_jacobian(p, z.lambda_in, z.s);
}

/// ΔF′ = F′(z) − F′(z̄): nonzero only in the (S, Λ) blocks.
template <typename Scalar = double>
struct DeltaJacobian {
  Vector<Scalar> delta_lambda;
  Vector<Scalar> delta_s;
};

template <typename Scalar>
DeltaJacobian<Scalar> delta_jacobian(const Iterate<Scalar>& z, const Vector<Scalar>& lambda_bar,
                                     const Vector<Scalar>& s_bar) {
  return {z.lambda_in - lambda_bar, z.s - s_bar};
}

/// ΔF′ as an explicit (n + m_eq + 2 m_in)-square matrix.
template <typename Scalar>
SparseMatrix<Scalar> delta_jacobian_matrix(const QpProblem<Scalar>& p, const DeltaJacobian<Scalar>& d) {
  const Index n = p.n(), me = p.m_eq(), mi = p.m_in();
  if (d.delta_lambda.size() != mi || d.delta_s.size() != mi) throw DimensionError("delta has wrong length");
  std::vector<Eigen::Triplet<Scalar, Index>> t;
  for (Index i = 0; i < mi; ++i) {
    t.emplace_back(n + me + mi + i, n + me + i, d.delta_s(i));
    t.emplace_back(n + me + mi + i, n + me + mi + i, d.delta_lambda(i));
  }
  SparseMatrix<Scalar> M(n + me + 2 * mi, n + me + 2 * mi);
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

template <typename Scalar = double>
struct SingularPair {
  Scalar value;
  Index index;
};

/// Singular values √(Δλᵢ² + Δsᵢ²) of ΔF′ paired with their constraint index,
/// sorted descending; equal values keep ascending index order.
template <typename Scalar>
std::vector<SingularPair<Scalar>> delta_svd(const DeltaJacobian<Scalar>& d) {
  const Index m = d.delta_lambda.size();
  std::vector<SingularPair<Scalar>> out(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = {std::hypot(d.delta_lambda(i), d.delta_s(i)), i};
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
  return out;
}

enum class KktFormulation { Unreduced, Reduced, Condensed };

inline const char* to_string(KktFormulation f) {
  switch (f) {
    case KktFormulation::Unreduced: return "unreduced";
    case KktFormulation::Reduced: return "reduced";
    case KktFormulation::Condensed: return "condensed";
  }
  return "?";
}

/// Largest n for which the condensed system is assembled.
inline constexpr Index kCondensedLimit = 2000;

/// Matrix of the chosen formulation at the shadow point (λ̄, s̄).
///
/// Reduced, in unknowns (Δx, −Δλ_eq, −Δλ_in):
///   [ H     A_eqᵀ  A_inᵀ    ]
///   [ A_eq  0      0        ]
///   [ A_in  0      −Λ̄⁻¹S̄   ]
/// Condensed, in unknowns (Δx, Δλ_eq):
///   [ H + A_inᵀS̄⁻¹Λ̄A_in   −A_eqᵀ ]
///   [ A_eq                  0     ]
template <typename Scalar>
SparseMatrix<Scalar> assemble_system(const QpProblem<Scalar>& p, KktFormulation form, const Vector<Scalar>& lambda_bar,
                                     const Vector<Scalar>& s_bar) {
  detail::check_shadow(p, lambda_bar, s_bar);
  const Index n = p.n(), me = p.m_eq(), mi = p.m_in();
  switch (form) {
    case KktFormulation::Unreduced:
      return assemble_jacobian(p, lambda_bar, s_bar);
    case KktFormulation::Reduced: {
      std::vector<Eigen::Triplet<Scalar, Index>> t;
      detail::append_block(t, p.H(), 0, 0);
      detail::append_block(t, p.A_eq(), 0, n, Scalar(1), true);
      detail::append_block(t, p.A_in(), 0, n + me, Scalar(1), true);
      detail::append_block(t, p.A_eq(), n, 0);
      detail::append_block(t, p.A_in(), n + me, 0);
      for (Index i = 0; i < mi; ++i) t.emplace_back(n + me + i, n + me + i, -s_bar(i) / lambda_bar(i));
      SparseMatrix<Scalar> K(n + me + mi, n + me + mi);
      K.setFromTriplets(t.begin(), t.end());
      return K;
    }
    case KktFormulation::Condensed: {
      if (n > kCondensedLimit) throw DimensionError("condensed system refused for n > 2000");
      const Vector<Scalar> w = (lambda_bar.array() / s_bar.array()).matrix();
      const DenseMatrix<Scalar> Ain = DenseMatrix<Scalar>(p.A_in());
      DenseMatrix<Scalar> K = DenseMatrix<Scalar>::Zero(n + me, n + me);
      K.topLeftCorner(n, n) = DenseMatrix<Scalar>(p.H()) + Ain.transpose() * w.asDiagonal() * Ain;
      K.topRightCorner(n, me) = -DenseMatrix<Scalar>(p.A_eq().transpose());
      K.bottomLeftCorner(me, n) = DenseMatrix<Scalar>(p.A_eq());
      return K.sparseView(Scalar(1), Scalar(0));
    }
  }
  throw DimensionError("unknown formulation");
}

/// Factors of one formulation together with the shadow values they were
/// assembled at, which the recovery formulas need.
template <typename Scalar = double>
struct KktFactorization {
  KktFormulation formulation = KktFormulation::Unreduced;
  Factorization<Scalar> factors;
  Vector<Scalar> lambda_bar;
  Vector<Scalar> s_bar;
};

template <typename Scalar>
KktFactorization<Scalar> factorize_kkt(const QpProblem<Scalar>& p, KktFormulation form, const Vector<Scalar>& lambda_bar,
                                       const Vector<Scalar>& s_bar, Index iteration = -1) {
  return {form, factorize(assemble_system(p, form, lambda_bar, s_bar), iteration), lambda_bar, s_bar};
}

template <typename Scalar>
KktFactorization<Scalar> factorize_kkt(const QpProblem<Scalar>& p, KktFormulation form, const Vector<Scalar>& lambda_bar,
                                       const Vector<Scalar>& s_bar, FactorizationCounter& counter,
                                       Index iteration = -1) {
  return {form, factorize(assemble_system(p, form, lambda_bar, s_bar), counter, iteration), lambda_bar, s_bar};
}

/// Solves F′(z̄)Δz = −F for a given residual F.
template <typename Scalar>
Direction<Scalar> solve_direction(const KktFactorization<Scalar>& kf, const QpProblem<Scalar>& p,
                                  const Vector<Scalar>& F) {
  const Index n = p.n(), me = p.m_eq(), mi = p.m_in();
  if (F.size() != n + me + 2 * mi) throw DimensionError("residual has wrong length");
  const auto r1 = F.segment(0, n);
  const auto r2 = F.segment(n, me);
  const auto r3 = F.segment(n + me, mi);
  const auto r4 = F.segment(n + me + mi, mi);
  const auto& lb = kf.lambda_bar;
  const auto& sb = kf.s_bar;

  Direction<Scalar> d;
  switch (kf.formulation) {
    case KktFormulation::Unreduced:
      return unstack(p, kf.factors.solve(-F));
    case KktFormulation::Reduced: {
      Vector<Scalar> rhs(n + me + mi);
      rhs << -r1, -r2, -r3 - (r4.array() / lb.array()).matrix();
      const Vector<Scalar> u = kf.factors.solve(rhs);
      d.x = u.segment(0, n);
      d.lambda_eq = -u.segment(n, me);
      d.lambda_in = -u.segment(n + me, mi);
      break;
    }
    case KktFormulation::Condensed: {
      const Vector<Scalar> t = ((lb.array() * r3.array() + r4.array()) / sb.array()).matrix();
      Vector<Scalar> rhs(n + me);
      rhs << -r1 - p.A_in().transpose() * t, -r2;
      const Vector<Scalar> u = kf.factors.solve(rhs);
      d.x = u.segment(0, n);
      d.lambda_eq = u.segment(n, me);
      const Vector<Scalar> Ax = p.A_in() * d.x;
      d.lambda_in = -t - ((lb.array() / sb.array()) * Ax.array()).matrix();
      break;
    }
  }
  d.s = (-(r4.array() + sb.array() * d.lambda_in.array()) / lb.array()).matrix();
  return d;
}

/// Direction toward F_μ(z) = 0 with the factored (possibly modified) Jacobian.
template <typename Scalar>
Direction<Scalar> solve_direction(const KktFactorization<Scalar>& kf, const QpProblem<Scalar>& p,
                                  const Iterate<Scalar>& z, Scalar mu) {
  return solve_direction(kf, p, residual(p, z, mu));
}

}  // namespace mnqp
