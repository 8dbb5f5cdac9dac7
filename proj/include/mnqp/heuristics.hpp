#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mnqp/kkt.hpp"
#include "mnqp/problem.hpp"
#include "mnqp/update.hpp"

namespace mnqp {

enum class HeuristicMode { None, H1, H2 };

inline const char* to_string(HeuristicMode h) {
  switch (h) {
    case HeuristicMode::None: return "none";
    case HeuristicMode::H1: return "h1";
    case HeuristicMode::H2: return "h2";
  }
  return "?";
}

/// Exact Jacobians are factorized at k = 0, l+1, 2(l+1), ...; an empty `l`
/// means only at k = 0.
struct RefactorSchedule {
  std::optional<Index> l;

  static RefactorSchedule never() { return {}; }
  static RefactorSchedule every(Index l) {
    if (l < 1) throw std::invalid_argument("refactorization parameter must be positive");
    return {l};
  }
};

inline bool refactor_due(Index k, const RefactorSchedule& schedule) {
  if (k < 0) throw std::out_of_range("negative iteration index");
  if (!schedule.l) return k == 0;
  return k % (*schedule.l + 1) == 0;
}

/// round(r·m_in/d) with d = 2, 10, 100 for classes S, M, L; at least 1.
inline Index l_for_problem(const ProblemClass& pc, Index r, Index m_in) {
  double divisor = 2.0;
  if (pc.size == SizeClass::M) divisor = 10.0;
  if (pc.size == SizeClass::L) divisor = 100.0;
  const auto l = static_cast<Index>(std::lround(static_cast<double>(r) * static_cast<double>(m_in) / divisor));
  return std::max<Index>(l, 1);
}

/// argmin over {i : dv_i < 0} of v_i / (−dv_i), with the minimum; ties go to
/// the lowest index. Empty when no component decreases.
template <typename Scalar>
std::optional<std::pair<Index, Scalar>> blocking_ratio(const Vector<Scalar>& v, const Vector<Scalar>& dv) {
  std::optional<std::pair<Index, Scalar>> best;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < Scalar(0)) {
      const Scalar ratio = v(i) / -dv(i);
      if (!best || ratio < best->second) best = std::pair{i, ratio};
    }
  }
  return best;
}

namespace detail {

/// Replaces the smallest-magnitude member of the plan that is not protected.
/// Returns false when every member is protected.
template <typename Scalar>
bool substitute(UpdatePlan<Scalar>& plan, std::vector<bool>& is_protected, Index incoming) {
  Index victim = -1;
  for (Index pos = 0; pos < plan.rank(); ++pos) {
    if (is_protected[static_cast<std::size_t>(pos)]) continue;
    const Index i = plan.indices[static_cast<std::size_t>(pos)];
    // Members are ordered by decreasing magnitude, so the last eligible one
    // is the smallest; compare anyway so hand-built plans behave too.
    if (victim < 0 || plan.magnitudes(i) <= plan.magnitudes(plan.indices[static_cast<std::size_t>(victim)])) victim = pos;
  }
  if (victim < 0) return false;
  plan.indices[static_cast<std::size_t>(victim)] = incoming;
  is_protected[static_cast<std::size_t>(victim)] = true;
  return true;
}

/// Marks member i as exempt from later eviction.
template <typename Scalar>
void protect(const UpdatePlan<Scalar>& plan, std::vector<bool>& is_protected, Index i) {
  for (std::size_t pos = 0; pos < plan.indices.size(); ++pos) {
    if (plan.indices[pos] == i) is_protected[pos] = true;
  }
}

}  // namespace detail

/// H1: bring the λ- and s-components that blocked the previous step into U_r.
///
/// For the λ_in part, î₁ = argmin λᵢ/(−Δλᵢ) over Δλᵢ < 0 at the previous
/// iterate. If that ratio is below 1 and î₁ ∉ U_r, î₁ replaces the smallest
/// magnitude member. The s part follows against the updated set. Neither
/// the index brought in for λ nor a blocking index already in U_r is evicted.
template <typename Scalar>
UpdatePlan<Scalar> h1_substitute(UpdatePlan<Scalar> plan, const Direction<Scalar>& prev_direction,
                                 const Iterate<Scalar>& prev_z) {
  std::vector<bool> is_protected(plan.indices.size(), false);
  for (const auto& [v, dv] : {std::pair{&prev_z.lambda_in, &prev_direction.lambda_in},
                              std::pair{&prev_z.s, &prev_direction.s}}) {
    const auto hit = blocking_ratio(*v, *dv);
    if (!hit || !(hit->second < Scalar(1))) continue;
    if (plan.contains(hit->first)) {
      detail::protect(plan, is_protected, hit->first);
    } else {
      detail::substitute(plan, is_protected, hit->first);
    }
  }
  return plan;
}

/// Indices whose λ- or s-ratio limited the previous step below 1.
template <typename Scalar>
std::vector<Index> step_limiting_set(const Direction<Scalar>& prev_direction, const Iterate<Scalar>& prev_z) {
  std::vector<Index> out;
  for (Index i = 0; i < prev_z.lambda_in.size(); ++i) {
    const Scalar dl = prev_direction.lambda_in(i);
    const Scalar ds = prev_direction.s(i);
    const bool by_lambda = dl < Scalar(0) && prev_z.lambda_in(i) / -dl < Scalar(1);
    const bool by_s = ds < Scalar(0) && prev_z.s(i) / -ds < Scalar(1);
    if (by_lambda || by_s) out.push_back(i);
  }
  return out;
}

/// H2: among the step-limiting indices of the previous iteration, take the
/// min(r, |H|) with the largest |λᵢ/sᵢ − λ̄ᵢ/s̄ᵢ| / (λᵢ/sᵢ) (current z against
/// the shadow before this iteration's update). Each candidate outside U_r
/// replaces the smallest-magnitude member that is not itself a candidate.
template <typename Scalar>
UpdatePlan<Scalar> h2_substitute(UpdatePlan<Scalar> plan, const Iterate<Scalar>& z, const ShadowPoint<Scalar>& zbar,
                                 const Direction<Scalar>& prev_direction, const Iterate<Scalar>& prev_z, Index r) {
  const auto H = step_limiting_set(prev_direction, prev_z);
  if (H.empty() || r <= 0) return plan;
  Vector<Scalar> err(static_cast<Index>(H.size()));
  for (std::size_t k = 0; k < H.size(); ++k) {
    const Index i = H[k];
    const Scalar ratio = z.lambda_in(i) / z.s(i);
    const Scalar ratio_bar = zbar.lambda_bar(i) / zbar.s_bar(i);
    err(static_cast<Index>(k)) = std::abs(ratio - ratio_bar) / ratio;
  }
  auto order = descending_order(err);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(r)));
  std::vector<bool> is_protected(plan.indices.size(), false);
  for (Index k : order) {
    const Index i = H[static_cast<std::size_t>(k)];
    if (plan.contains(i)) {
      detail::protect(plan, is_protected, i);
      continue;
    }
    if (!detail::substitute(plan, is_protected, i)) break;
  }
  return plan;
}

}  // namespace mnqp
