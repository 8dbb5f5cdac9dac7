#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "mnqp/error.hpp"
#include "mnqp/heuristics.hpp"
#include "mnqp/kkt.hpp"
#include "mnqp/linsolve.hpp"
#include "mnqp/problem.hpp"
#include "mnqp/update.hpp"

namespace mnqp {

enum class Method { Newton, ModifiedNewton };

enum class RunStatus { Converged, MaxIterations, Singular };

inline const char* to_string(Method m) { return m == Method::Newton ? "newton" : "mn"; }

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIterations: return "max_iterations";
    case RunStatus::Singular: return "singular";
  }
  return "?";
}

/// What the observer sees once per iteration, after the direction is known
/// and before the step is taken.
template <typename Scalar>
struct IterationView {
  Index k;
  Scalar mu;
  const Iterate<Scalar>& z;
  const ShadowPoint<Scalar>& shadow;
  const Direction<Scalar>& direction;
  const Vector<Scalar>& residual;
  bool refactorized;
};

template <typename Scalar = double>
struct SolverConfig {
  Scalar mu0 = Scalar(1);
  Scalar sigma = Scalar(0.1);
  Scalar eps_tol = Scalar(1e-6);
  Method method = Method::Newton;
  /// Rank of each update (modified Newton only).
  Index rank = 2;
  HeuristicMode heuristic = HeuristicMode::None;
  KktFormulation formulation = KktFormulation::Unreduced;
  /// Empty: pick l from the problem class.
  std::optional<RefactorSchedule> schedule;
  Index max_total_iterations = 5000;
  Scalar step_fraction = Scalar(0.98);
  /// Damped Newton steps allowed for reaching the starting point.
  Index bootstrap_budget = 100;
  /// Compute η and the descent test every iteration (one extra Jacobian product each).
  bool diagnostics = true;
  std::function<void(const IterationView<Scalar>&)> observer;

  void validate() const {
    if (!(mu0 > Scalar(0))) throw std::invalid_argument("mu0 must be positive");
    if (!(sigma > Scalar(0) && sigma < Scalar(1))) throw std::invalid_argument("sigma must lie in (0, 1)");
    if (!(eps_tol > Scalar(0))) throw std::invalid_argument("eps_tol must be positive");
    if (rank < 0) throw std::invalid_argument("rank must be nonnegative");
    if (!(step_fraction > Scalar(0) && step_fraction < Scalar(1))) throw std::invalid_argument("step fraction must lie in (0, 1)");
    if (max_total_iterations < 0 || bootstrap_budget < 0) throw std::invalid_argument("iteration limits must be nonnegative");
  }
};

template <typename Scalar = double>
struct StepSizes {
  Scalar alpha_P = Scalar(1);
  Scalar alpha_D = Scalar(1);
};

struct TraceRecord {
  Index k = 0;
  double mu = 0;
  double merit_mu = 0;
  double merit_0 = 0;
  double alpha_P = 0;
  double alpha_D = 0;
  double jacobian_error = 0;
  double eta = 0;
  bool refactorized = false;
  /// Refactorization forced by a singular patched system.
  bool forced_refactorization = false;
  bool descent = false;
  double directional_derivative = 0;
};

template <typename Scalar = double>
struct RunReport {
  RunStatus status = RunStatus::MaxIterations;
  /// Main-loop iterations k.
  Index iterations = 0;
  /// Counted main-loop factorizations; the first one at k = 0 counts as one.
  Index factorizations = 0;
  Index bootstrap_iterations = 0;
  Index bootstrap_factorizations = 0;
  std::optional<Index> l;
  std::vector<TraceRecord> trace;
  Iterate<Scalar> z;
  Scalar mu = Scalar(0);
  std::string message;

  bool converged() const { return status == RunStatus::Converged; }

  /// Mean of (α_P + α_D)/2 over main-loop iterations.
  double mean_step_size() const {
    if (trace.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : trace) sum += 0.5 * (t.alpha_P + t.alpha_D);
    return sum / static_cast<double>(trace.size());
  }
};

/// Largest α with s + αΔs ≥ 0 (primal) and λ_in + αΔλ_in ≥ 0 (dual); +∞ when
/// no component decreases.
template <typename Scalar>
StepSizes<Scalar> max_feasible_steps(const Iterate<Scalar>& z, const Direction<Scalar>& d) {
  auto limit = [](const Vector<Scalar>& v, const Vector<Scalar>& dv) {
    const auto hit = blocking_ratio(v, dv);
    return hit ? hit->second : std::numeric_limits<Scalar>::infinity();
  };
  return {limit(z.s, d.s), limit(z.lambda_in, d.lambda_in)};
}

/// min{1, fraction·α^max} componentwise.
template <typename Scalar>
StepSizes<Scalar> truncate_steps(const StepSizes<Scalar>& max_steps, Scalar fraction = Scalar(0.98)) {
  return {std::min(Scalar(1), fraction * max_steps.alpha_P), std::min(Scalar(1), fraction * max_steps.alpha_D)};
}

/// x and s move with α_P; λ_eq and λ_in move with α_D.
template <typename Scalar>
Iterate<Scalar> take_step(const Iterate<Scalar>& z, const Direction<Scalar>& d, const StepSizes<Scalar>& a) {
  return {z.x + a.alpha_P * d.x, z.lambda_eq + a.alpha_D * d.lambda_eq, z.lambda_in + a.alpha_D * d.lambda_in,
          z.s + a.alpha_P * d.s};
}

template <typename Scalar = double>
struct InitialPoint {
  RunStatus status = RunStatus::Converged;
  Iterate<Scalar> z;
  Index iterations = 0;
  Index factorizations = 0;
  std::string message;

  bool ok() const { return status == RunStatus::Converged; }
};

namespace detail {

/// Solves (MᵀM + δI)y = Mᵀb with a sparse LDLᵀ factorization.
template <typename Scalar>
Vector<Scalar> regularized_least_squares(const SparseMatrix<Scalar>& M, const Vector<Scalar>& b) {
  const Index n = M.cols();
  if (M.rows() == 0 || n == 0) return Vector<Scalar>::Zero(n);
  SparseMatrix<Scalar> N = SparseMatrix<Scalar>(M.transpose()) * M;
  Scalar diag_max(0);
  for (Index i = 0; i < n; ++i) diag_max = std::max(diag_max, N.coeff(i, i));
  const Scalar delta = Scalar(1e-8) * (Scalar(1) + diag_max);
  SparseMatrix<Scalar> I(n, n);
  I.setIdentity();
  N += delta * I;
  Eigen::SimplicialLDLT<SparseMatrix<Scalar>> ldlt(N);
  if (ldlt.info() != Eigen::Success) throw SingularMatrixError(-1, "least-squares system could not be factorized");
  return ldlt.solve(SparseMatrix<Scalar>(M.transpose()) * b);
}

template <typename Scalar>
SparseMatrix<Scalar> vstack(const SparseMatrix<Scalar>& top, const SparseMatrix<Scalar>& bottom) {
  std::vector<Eigen::Triplet<Scalar, Index>> t;
  append_block(t, top, 0, 0);
  append_block(t, bottom, top.rows(), 0);
  SparseMatrix<Scalar> M(top.rows() + bottom.rows(), top.cols());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

}  // namespace detail

/// Starting point with λ_in, s > 0 and ‖F_{μ0/σ}(z)‖ < μ0/σ.
///
/// x solves a regularized least-squares fit of all constraints, λ fits
/// stationarity in the least-squares sense, and λ_in, s are lifted to at least
/// 1. Damped Newton steps on F_{μ0/σ} (same fraction-to-boundary rule) follow
/// until the condition holds or the bootstrap budget runs out.
template <typename Scalar>
InitialPoint<Scalar> find_initial_point(const QpProblem<Scalar>& p, const SolverConfig<Scalar>& config) {
  config.validate();
  InitialPoint<Scalar> out;
  const Index mi = p.m_in();
  try {
    const SparseMatrix<Scalar> A = detail::vstack(p.A_eq(), p.A_in());
    Vector<Scalar> b(p.m_eq() + mi);
    b << p.b_eq(), p.b_in();
    Iterate<Scalar> z;
    z.x = detail::regularized_least_squares(A, b);
    const Vector<Scalar> g = p.H() * z.x + p.c();
    const Vector<Scalar> lambda = detail::regularized_least_squares(SparseMatrix<Scalar>(A.transpose()), g);
    z.lambda_eq = lambda.head(p.m_eq());
    z.lambda_in = lambda.tail(mi).cwiseMax(Scalar(1));
    z.s = (p.A_in() * z.x - p.b_in()).cwiseMax(Scalar(1));

    const Scalar mu = config.mu0 / config.sigma;
    FactorizationCounter counter;
    for (;;) {
      const Vector<Scalar> F = residual(p, z, mu);
      if (F.norm() < mu) break;
      if (out.iterations >= config.bootstrap_budget) {
        out.status = RunStatus::MaxIterations;
        out.message = "starting point not reached within the bootstrap budget";
        break;
      }
      const auto kf = factorize_kkt(p, KktFormulation::Unreduced, z.lambda_in, z.s, counter, out.iterations);
      const auto d = solve_direction(kf, p, F);
      z = take_step(z, d, truncate_steps(max_feasible_steps(z, d), config.step_fraction));
      ++out.iterations;
    }
    out.factorizations = counter.count;
    out.z = std::move(z);
  } catch (const SingularMatrixError& e) {
    out.status = RunStatus::Singular;
    out.message = e.what();
  }
  return out;
}

/// Basic primal-dual interior-point method.
///
/// Outer loop while ‖F_0(z)‖ > ε; inner loop while ‖F_μ(z)‖ > μ with μ fixed,
/// after which μ ← σμ. Newton factorizes F′(z) every iteration. Modified
/// Newton factorizes F′(z) on schedule hits and otherwise patches the r
/// (λ_in, s) pairs of the shadow point that differ most from z, optionally
/// adjusted by H1/H2; the patched system is solved without counting a
/// factorization.
template <typename Scalar>
RunReport<Scalar> solve(const QpProblem<Scalar>& p, const SolverConfig<Scalar>& config) {
  config.validate();
  RunReport<Scalar> report;
  const bool modified = config.method == Method::ModifiedNewton;
  if (modified && config.rank > p.m_in()) throw std::out_of_range("update rank exceeds the number of inequalities");

  RefactorSchedule schedule;
  if (modified) {
    schedule = config.schedule ? *config.schedule
                               : RefactorSchedule::every(l_for_problem(classify(p), config.rank, p.m_in()));
    report.l = schedule.l;
  }

  auto init = find_initial_point(p, config);
  report.bootstrap_iterations = init.iterations;
  report.bootstrap_factorizations = init.factorizations;
  report.z = init.z;
  if (!init.ok()) {
    report.status = init.status;
    report.message = "bootstrap: " + init.message;
    return report;
  }

  Iterate<Scalar> z = std::move(init.z);
  Scalar mu = config.mu0;
  Index k = 0;
  FactorizationCounter counter;
  ShadowPoint<Scalar> shadow = ShadowPoint<Scalar>::at(z);
  KktFactorization<Scalar> kf;
  std::optional<Iterate<Scalar>> prev_z;
  std::optional<Direction<Scalar>> prev_d;

  auto finish = [&](RunStatus status, std::string message = {}) {
    report.status = status;
    report.iterations = k;
    report.factorizations = static_cast<Index>(counter.count);
    report.z = z;
    report.mu = mu;
    report.message = std::move(message);
    return report;
  };

  try {
    while (merit(p, z, Scalar(0)) > config.eps_tol) {
      for (;;) {
        const Vector<Scalar> F = residual(p, z, mu);
        const Scalar merit_mu = F.norm();
        if (merit_mu <= mu) break;
        if (k >= config.max_total_iterations) return finish(RunStatus::MaxIterations, "iteration limit reached");

        TraceRecord rec;
        if (!modified || refactor_due(k, schedule)) {
          shadow = ShadowPoint<Scalar>::at(z);
          kf = factorize_kkt(p, config.formulation, shadow.lambda_bar, shadow.s_bar, counter, k);
          rec.refactorized = true;
        } else {
          auto plan = select_indices(z, shadow, config.rank);
          if (prev_z && prev_d) {
            if (config.heuristic == HeuristicMode::H1) plan = h1_substitute(std::move(plan), *prev_d, *prev_z);
            if (config.heuristic == HeuristicMode::H2) {
              plan = h2_substitute(std::move(plan), z, shadow, *prev_d, *prev_z, config.rank);
            }
          }
          shadow = apply_update(std::move(shadow), z, plan);
          try {
            kf = factorize_kkt(p, config.formulation, shadow.lambda_bar, shadow.s_bar, k);
          } catch (const SingularMatrixError&) {
            shadow = ShadowPoint<Scalar>::at(z);
            kf = factorize_kkt(p, config.formulation, shadow.lambda_bar, shadow.s_bar, counter, k);
            rec.refactorized = true;
            rec.forced_refactorization = true;
          }
        }

        const Direction<Scalar> d = solve_direction(kf, p, F);
        rec.k = k;
        rec.mu = static_cast<double>(mu);
        rec.merit_mu = static_cast<double>(merit_mu);
        rec.merit_0 = static_cast<double>(merit(p, z, Scalar(0)));
        rec.jacobian_error = static_cast<double>(jacobian_error(z, shadow));
        if (config.diagnostics) {
          rec.eta = static_cast<double>(inexact_residual(p, z, mu, d).eta);
          const auto dc = descent_check(p, z, mu, d);
          rec.descent = dc.is_descent;
          rec.directional_derivative = static_cast<double>(dc.directional_derivative);
        }
        if (config.observer) config.observer(IterationView<Scalar>{k, mu, z, shadow, d, F, rec.refactorized});

        const auto steps = truncate_steps(max_feasible_steps(z, d), config.step_fraction);
        rec.alpha_P = static_cast<double>(steps.alpha_P);
        rec.alpha_D = static_cast<double>(steps.alpha_D);
        report.trace.push_back(rec);

        prev_z = z;
        prev_d = d;
        z = take_step(z, d, steps);
        ++k;
      }
      mu *= config.sigma;
    }
  } catch (const SingularMatrixError& e) {
    return finish(RunStatus::Singular, e.what());
  }
  return finish(RunStatus::Converged);
}

}  // namespace mnqp
