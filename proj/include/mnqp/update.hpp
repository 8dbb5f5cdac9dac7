#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mnqp/kkt.hpp"
#include "mnqp/problem.hpp"

namespace mnqp {

/// The point z̄ whose exact Jacobian is the current modified Jacobian. Only
/// the (λ_in, s) part is stored; x̄ always equals the current x.
template <typename Scalar = double>
struct ShadowPoint {
  Vector<Scalar> lambda_bar;
  Vector<Scalar> s_bar;

  static ShadowPoint at(const Iterate<Scalar>& z) { return {z.lambda_in, z.s}; }
};

/// Indices patched by a rank-r update, in decreasing order of magnitude.
/// `magnitudes` holds √((λᵢ − λ̄ᵢ)² + (sᵢ − s̄ᵢ)²) for every constraint.
template <typename Scalar = double>
struct UpdatePlan {
  std::vector<Index> indices;
  Vector<Scalar> magnitudes;

  bool contains(Index i) const { return std::find(indices.begin(), indices.end(), i) != indices.end(); }
  Index rank() const { return static_cast<Index>(indices.size()); }
};

template <typename Scalar>
Vector<Scalar> update_magnitudes(const Iterate<Scalar>& z, const ShadowPoint<Scalar>& zbar) {
  if (z.lambda_in.size() != zbar.lambda_bar.size() || z.s.size() != zbar.s_bar.size()) {
    throw DimensionError("shadow point does not match iterate");
  }
  Vector<Scalar> m(z.lambda_in.size());
  for (Index i = 0; i < m.size(); ++i) m(i) = std::hypot(z.lambda_in(i) - zbar.lambda_bar(i), z.s(i) - zbar.s_bar(i));
  return m;
}

/// Positions of `values` sorted by decreasing value, ties by lowest index.
template <typename Scalar>
std::vector<Index> descending_order(const Vector<Scalar>& values) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values(a) > values(b); });
  return order;
}

/// The r constraints with the largest (λ, s) disagreement between z and z̄.
template <typename Scalar>
UpdatePlan<Scalar> select_indices(const Iterate<Scalar>& z, const ShadowPoint<Scalar>& zbar, Index r) {
  const Index m = z.lambda_in.size();
  if (r < 0 || r > m) throw std::out_of_range("update rank must lie in [0, m_in]");
  UpdatePlan<Scalar> plan;
  plan.magnitudes = update_magnitudes(z, zbar);
  auto order = descending_order(plan.magnitudes);
  order.resize(static_cast<std::size_t>(r));
  plan.indices = std::move(order);
  return plan;
}

/// Copies (λᵢ, sᵢ) into the shadow for every i in the plan.
template <typename Scalar>
ShadowPoint<Scalar> apply_update(ShadowPoint<Scalar> zbar, const Iterate<Scalar>& z, const UpdatePlan<Scalar>& plan) {
  for (Index i : plan.indices) {
    zbar.lambda_bar(i) = z.lambda_in(i);
    zbar.s_bar(i) = z.s(i);
  }
  return zbar;
}

/// ‖F′(z) − F′(z̄)‖_F, which equals ‖(λ − λ̄, s − s̄)‖₂.
template <typename Scalar>
Scalar jacobian_error(const Iterate<Scalar>& z, const ShadowPoint<Scalar>& zbar) {
  return update_magnitudes(z, zbar).norm();
}

/// ‖E‖_F left after the best rank-r update of `zbar_old` toward z: the norm
/// of the magnitudes outside the selected set.
template <typename Scalar>
Scalar optimal_rank_r_error(const Iterate<Scalar>& z, const ShadowPoint<Scalar>& zbar_old, Index r) {
  const auto plan = select_indices(z, zbar_old, r);
  Scalar sum(0);
  for (Index i = 0; i < plan.magnitudes.size(); ++i) {
    if (!plan.contains(i)) sum += plan.magnitudes(i) * plan.magnitudes(i);
  }
  return std::sqrt(sum);
}

/// M_est times the (r+1)-th largest magnitude; zero once r covers every index.
template <typename Scalar>
Scalar spectral_bound(const std::vector<Scalar>& sorted_magnitudes, Index r, Scalar m_est = Scalar(1)) {
  if (r < 0) throw std::out_of_range("negative rank");
  if (r >= static_cast<Index>(sorted_magnitudes.size())) return Scalar(0);
  return m_est * sorted_magnitudes[static_cast<std::size_t>(r)];
}

template <typename Scalar = double>
struct DescentCheck {
  bool is_descent = false;
  Scalar directional_derivative = Scalar(0);
};

/// ∇φ_μ(z)ᵀΔz = ΔzᵀF′(z)ᵀF_μ(z) / ‖F_μ(z)‖ with the exact Jacobian at z.
/// A zero residual reports derivative 0 and no descent.
template <typename Scalar>
DescentCheck<Scalar> descent_check(const QpProblem<Scalar>& p, const Iterate<Scalar>& z, Scalar mu,
                                   const Direction<Scalar>& d) {
  const Vector<Scalar> F = residual(p, z, mu);
  const Scalar norm = F.norm();
  if (norm == Scalar(0)) return {};
  const Vector<Scalar> Jd = jacobian(p, z) * d.stacked();
  const Scalar dd = Jd.dot(F) / norm;
  return {dd < Scalar(0), dd};
}

template <typename Scalar = double>
struct DescentCriterion {
  Scalar lhs;  // ‖F‖²
  Scalar rhs;  // −Fᵀ E F′(z̄)⁻¹ F
  bool holds;
};

/// Evaluates the descent criterion ‖F‖² > −Fᵀ E F′(z̄)⁻¹ F with E = F′(z) − F′(z̄),
/// using an explicit dense inverse. Meant for small instances.
///
/// F′(z)F′(z̄)⁻¹ = I + E F′(z̄)⁻¹, so the directional derivative of ‖F‖ along
/// −F′(z̄)⁻¹F is (−‖F‖² − Fᵀ E F′(z̄)⁻¹ F)/‖F‖.
template <typename Scalar>
DescentCriterion<Scalar> exact_descent_criterion(const QpProblem<Scalar>& p, const Iterate<Scalar>& z,
                                                 const ShadowPoint<Scalar>& zbar, Scalar mu) {
  const Vector<Scalar> F = residual(p, z, mu);
  const DenseMatrix<Scalar> Jbar = assemble_jacobian(p, zbar.lambda_bar, zbar.s_bar);
  const DenseMatrix<Scalar> E = DenseMatrix<Scalar>(jacobian(p, z)) - Jbar;
  const DenseMatrix<Scalar> inv = Jbar.inverse();
  const Scalar lhs = F.squaredNorm();
  const Scalar rhs = -F.dot(E * (inv * F));
  return {lhs, rhs, lhs > rhs};
}

template <typename Scalar = double>
struct InexactResidual {
  Vector<Scalar> q;
  Scalar eta = Scalar(0);
};

/// q = F′(z)Δz + F_μ(z) and η = ‖q‖/‖F_μ(z)‖ (η = 0 when F_μ(z) = 0).
template <typename Scalar>
InexactResidual<Scalar> inexact_residual(const QpProblem<Scalar>& p, const Iterate<Scalar>& z, Scalar mu,
                                         const Direction<Scalar>& d) {
  const Vector<Scalar> F = residual(p, z, mu);
  InexactResidual<Scalar> out;
  out.q = jacobian(p, z) * d.stacked() + F;
  const Scalar norm = F.norm();
  out.eta = norm == Scalar(0) ? Scalar(0) : out.q.norm() / norm;
  return out;
}

}  // namespace mnqp
