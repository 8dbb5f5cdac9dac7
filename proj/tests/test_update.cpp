#include <doctest.h>

#include <set>

#include "mnqp/update.hpp"
#include "oracles.hpp"

using namespace mnqp;
using oracle::Dense;
using oracle::Vec;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// z and z̄ with λ − λ̄ = [1, −3, 2] and s − s̄ = [0, 4, −2].
std::pair<Iterate<double>, ShadowPoint<double>> worked_example() {
  const Iterate<double> z{Vec::Zero(1), Vec(0), v3(2, 1, 5), v3(3, 6, 1)};
  const ShadowPoint<double> zbar{v3(1, 4, 3), v3(3, 2, 3)};
  return {z, zbar};
}

Direction<double> newton_direction(const QpProblem<double>& p, const Iterate<double>& z, double mu) {
  return solve_direction(factorize_kkt(p, KktFormulation::Unreduced, z.lambda_in, z.s), p, z, mu);
}

}  // namespace

TEST_CASE("select_indices worked example") {
  const auto [z, zbar] = worked_example();
  const auto plan = select_indices(z, zbar, 2);
  CHECK(plan.indices == std::vector<Index>{1, 2});
  CHECK(plan.magnitudes(0) == doctest::Approx(1.0));
  CHECK(plan.magnitudes(1) == doctest::Approx(5.0));
  CHECK(plan.magnitudes(2) == doctest::Approx(std::sqrt(8.0)));
  CHECK(select_indices(z, zbar, 0).indices.empty());
  CHECK(select_indices(z, zbar, 3).indices == std::vector<Index>{1, 2, 0});
  CHECK_THROWS_AS((void)select_indices(z, zbar, 4), std::out_of_range);
  CHECK_THROWS_AS((void)select_indices(z, zbar, -1), std::out_of_range);
}

TEST_CASE("optimal_rank_r_error worked example") {
  const auto [z, zbar] = worked_example();
  CHECK(optimal_rank_r_error(z, zbar, 2) == doctest::Approx(1.0));
  CHECK(optimal_rank_r_error(z, zbar, 3) == 0.0);
}

TEST_CASE("apply_update examples") {
  const Iterate<double> z{Vec::Zero(1), Vec(0), v3(5, 7, 9), v3(1, 2, 3)};
  const ShadowPoint<double> zbar{v3(1, 1, 1), v3(4, 4, 4)};
  UpdatePlan<double> plan{{1}, Vec::Zero(3)};
  const auto updated = apply_update(zbar, z, plan);
  CHECK(updated.lambda_bar == v3(1, 7, 1));
  CHECK(updated.s_bar == v3(4, 2, 4));
  const auto same = apply_update(zbar, z, UpdatePlan<double>{{}, Vec::Zero(3)});
  CHECK(same.lambda_bar == zbar.lambda_bar);
  CHECK(same.s_bar == zbar.s_bar);
  const auto full = apply_update(zbar, z, select_indices(z, zbar, 3));
  CHECK(full.lambda_bar == z.lambda_in);
  CHECK(full.s_bar == z.s);
}

TEST_CASE("structured update attains the truncated-SVD optimum") {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mi = oracle::integer(rng, 1, 8), n = oracle::integer(rng, 1, 5);
    const auto p = oracle::random_problem(rng, n, 0, mi);
    const auto z = oracle::random_iterate_for(rng, p);
    const ShadowPoint<double> zbar{oracle::random_vector(rng, mi, 0.1, 3.0), oracle::random_vector(rng, mi, 0.1, 3.0)};
    const Dense diff = Dense(jacobian(p, z)) - Dense(assemble_jacobian(p, zbar.lambda_bar, zbar.s_bar));
    const Vec sv = oracle::singular_values(diff);
    double previous = std::numeric_limits<double>::infinity();
    for (Index r = 0; r <= mi; ++r) {
      const auto updated = apply_update(zbar, z, select_indices(z, zbar, r));
      const Dense B(assemble_jacobian(p, updated.lambda_bar, updated.s_bar));
      const double err = (Dense(jacobian(p, z)) - B).norm();
      CHECK(std::abs(err - oracle::truncation_error_frobenius(sv, r)) <= 1e-10);
      CHECK(optimal_rank_r_error(z, zbar, r) == doctest::Approx(err).epsilon(1e-12));
      CHECK(err <= previous + 1e-15);
      previous = err;
    }
  }
}

TEST_CASE("patched shadow factors equal a fresh assembly at the shadow") {
  oracle::Rng rng(32);
  const auto p = oracle::random_problem(rng, 4, 1, 6);
  const auto z = oracle::random_iterate_for(rng, p);
  const ShadowPoint<double> zbar{oracle::random_vector(rng, 6, 0.1, 3.0), oracle::random_vector(rng, 6, 0.1, 3.0)};
  const auto updated = apply_update(zbar, z, select_indices(z, zbar, 3));
  const Vec F = residual(p, z, 0.5);
  const auto d = solve_direction(factorize_kkt(p, KktFormulation::Unreduced, updated.lambda_bar, updated.s_bar), p, F);
  const Vec expected = oracle::dense_solve(oracle::dense_jacobian(p, updated.lambda_bar, updated.s_bar), -F);
  CHECK(oracle::relative_difference(d.stacked(), expected) < 1e-10);
}

TEST_CASE("updates keep the shadow positive and the plan duplicate-free") {
  oracle::Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = oracle::integer(rng, 1, 10);
    const Iterate<double> z{Vec::Zero(1), Vec(0), oracle::random_vector(rng, m, 1e-6, 5.0),
                            oracle::random_vector(rng, m, 1e-6, 5.0)};
    const ShadowPoint<double> zbar{oracle::random_vector(rng, m, 1e-6, 5.0), oracle::random_vector(rng, m, 1e-6, 5.0)};
    const auto r = oracle::integer(rng, 0, m);
    const auto plan = select_indices(z, zbar, r);
    CHECK(plan.rank() == r);
    CHECK(std::set<Index>(plan.indices.begin(), plan.indices.end()).size() == plan.indices.size());
    for (std::size_t k = 1; k < plan.indices.size(); ++k) {
      CHECK(plan.magnitudes(plan.indices[k - 1]) >= plan.magnitudes(plan.indices[k]));
    }
    const auto updated = apply_update(zbar, z, plan);
    CHECK(updated.lambda_bar.minCoeff() > 0.0);
    CHECK(updated.s_bar.minCoeff() > 0.0);
  }
}

TEST_CASE("spectral_bound examples") {
  const std::vector<double> mags{5.0, 2.83, 1.0};
  CHECK(spectral_bound(mags, 1, 2.0) == doctest::Approx(5.66));
  CHECK(spectral_bound(mags, 0) == 5.0);
  CHECK(spectral_bound(mags, 3) == 0.0);
  CHECK_THROWS_AS((void)spectral_bound(mags, -1), std::out_of_range);
}

TEST_CASE("descent_check examples") {
  oracle::Rng rng(34);
  const auto p = oracle::random_problem(rng, 3, 1, 4);
  const auto z = oracle::random_iterate_for(rng, p);
  const double mu = 0.2;
  const auto newton = descent_check(p, z, mu, newton_direction(p, z, mu));
  CHECK(newton.is_descent);
  CHECK(newton.directional_derivative == doctest::Approx(-merit(p, z, mu)).epsilon(1e-10));
  const auto zero = descent_check(p, z, mu, Direction<double>::zeros(3, 1, 4));
  CHECK_FALSE(zero.is_descent);
  CHECK(zero.directional_derivative == 0.0);
}

TEST_CASE("descent_check agrees with a finite difference") {
  oracle::Rng rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = oracle::random_problem(rng, 3, 1, 5);
    const auto z = oracle::random_iterate_for(rng, p);
    const ShadowPoint<double> zbar{oracle::random_vector(rng, 5, 0.1, 3.0), oracle::random_vector(rng, 5, 0.1, 3.0)};
    const double mu = 0.3;
    const auto d = solve_direction(factorize_kkt(p, KktFormulation::Unreduced, zbar.lambda_bar, zbar.s_bar), p, z, mu);
    const double fd = oracle::fd_directional_derivative(p, z, mu, d, 1e-6);
    const auto dc = descent_check(p, z, mu, d);
    CHECK(std::abs(dc.directional_derivative - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    const auto crit = exact_descent_criterion(p, z, zbar, mu);
    // The criterion is exactly the sign of the derivative.
    CHECK(crit.holds == dc.is_descent);
  }
}

TEST_CASE("inexact_residual examples") {
  oracle::Rng rng(36);
  const auto p = oracle::random_problem(rng, 3, 1, 4);
  const auto z = oracle::random_iterate_for(rng, p);
  const auto zero = inexact_residual(p, z, 0.4, Direction<double>::zeros(3, 1, 4));
  CHECK(zero.eta == 1.0);
  CHECK(zero.q == residual(p, z, 0.4));
  CHECK(inexact_residual(p, z, 0.4, newton_direction(p, z, 0.4)).eta <= 1e-10);
  const ShadowPoint<double> zbar{Vec::Ones(4), Vec::Ones(4)};
  const auto full = apply_update(zbar, z, select_indices(z, zbar, 4));
  const auto d = solve_direction(factorize_kkt(p, KktFormulation::Unreduced, full.lambda_bar, full.s_bar), p, z, 0.4);
  CHECK(inexact_residual(p, z, 0.4, d).eta <= 1e-10);
}
