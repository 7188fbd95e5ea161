#include "doctest.h"

#include <random>

#include "gopo/dynamics.hpp"
#include "test_support.hpp"

using namespace gopo;
using gopo::test::max_abs_diff;
using gopo::test::vec;

TEST_CASE("ratio descent trajectory")
{
  const auto t = ratio_gd_trajectory(3.0, 0.5, 0.5, 1.0, 4);
  CHECK(t.rho_star == 2.0);
  CHECK(t.contraction == 0.5);
  CHECK_FALSE(t.divergent);
  REQUIRE(t.rho_steps.size() == 5);
  CHECK(t.rho_steps[0] == 3.0);
  CHECK(t.rho_steps[1] == 2.5);
  CHECK(t.rho_steps[2] == 2.25);
  CHECK(t.rho_steps[3] == 2.125);
}

TEST_CASE("one step at the inverse stiffness")
{
  const auto t = ratio_gd_trajectory(3.0, 0.5, 0.5, 2.0, 3);
  CHECK(t.contraction == 0.0);
  CHECK(t.rho_steps[1] == 2.0);
  CHECK(t.rho_steps[3] == 2.0);
  CHECK(std::isnan(fit_contraction_rate(t)));
}

TEST_CASE("fixed point stays put")
{
  const auto t = ratio_gd_trajectory(2.0, 0.5, 0.5, 0.3, 10);
  for (double r : t.rho_steps) { CHECK(r == 2.0); }
}

TEST_CASE("divergent step is flagged")
{
  const auto t = ratio_gd_trajectory(3.0, 0.5, 0.5, 5.0, 5);
  CHECK(t.divergent);
  CHECK(t.contraction == 1.5);
  CHECK(fit_contraction_rate(t) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("trajectory input errors")
{
  CHECK_THROWS_AS(ratio_gd_trajectory(1.0, 0.0, 0.0, 1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(ratio_gd_trajectory(1.0, 0.0, 1.0, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(ratio_gd_trajectory(1.0, 0.0, 1.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("fitted rate matches the contraction factor")
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const double a = -5 + 10 * u(rng);
    const double mu = 0.1 + 2.9 * u(rng);
    const double step = (0.01 + 1.98 * u(rng)) / mu;
    const double rho_star = 1 + a / mu;
    const double factor = std::abs(1 - step * mu);
    const int n = std::clamp(static_cast<int>(std::log(1e-6) / std::log(factor)), 1, 60) + 1;
    const auto traj = ratio_gd_trajectory(rho_star + 0.5 + 1.5 * u(rng), a, mu, step, n);
    CHECK(std::abs(fit_contraction_rate(traj) - factor) / factor < 1e-6);
  }
}

TEST_CASE("divergences")
{
  const auto half = ReferenceMeasureXd::uniform(2);
  CHECK(chi2_divergence(vec({0.5, 0.5}), half) == 0.0);
  CHECK(chi2_divergence(vec({0.75, 0.25}), half) == 0.125);
  CHECK(chi2_divergence(vec({1, 0}), half) == 0.5);

  CHECK(tv_distance(vec({0.5, 0.5}), half) == 0.0);
  CHECK(tv_distance(vec({0.75, 0.25}), half) == 0.25);
  CHECK(0.5 * std::sqrt(2 * chi2_divergence(vec({0.75, 0.25}), half)) == 0.25);
  CHECK(tv_distance(vec({1, 0}), half) == 0.5);

  CHECK_THROWS_AS(tv_distance(vec({1, 0, 0}), half), DimensionMismatch);
}

TEST_CASE("log-ratio bounds")
{
  const auto zero = log_ratio_error_check(vec({0.0}));
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].v == 0.0);
  CHECK(zero[0].linear_error == 0.0);
  CHECK(zero[0].linear_bound == 0.0);
  CHECK(zero[0].square_bound == 0.0);
  CHECK(zero[0].holds);

  const auto small = log_ratio_error_check(vec({0.1}))[0];
  CHECK(small.linear_error == doctest::Approx(std::exp(0.1) - 1.1).epsilon(1e-12));
  CHECK(small.linear_error == doctest::Approx(0.00517).epsilon(1e-3));
  CHECK(small.linear_bound == doctest::Approx(0.005526).epsilon(1e-3));
  CHECK(small.holds);

  const auto negative = log_ratio_error_check(vec({-0.5}))[0];
  CHECK(negative.linear_bound == doctest::Approx(0.2061).epsilon(1e-3));
  CHECK(negative.linear_error == doctest::Approx(0.5 - (1 - std::exp(-0.5))).epsilon(1e-12));
  CHECK(negative.holds);

  CHECK(log_ratio_error_check(FieldXd(0)).empty());
  CHECK_THROWS_AS(log_ratio_error_check(vec({0.2, 1.0})), std::domain_error);
}

TEST_CASE("log-ratio bounds on the whole grid")
{
  for (int k = 0; k < 199; ++k) {
    const double d = -0.99 + 0.01 * k;
    for (const auto& e : log_ratio_error_check(vec({d}))) { CHECK(e.holds); }
  }
}

TEST_CASE("chi2-constrained maximizer")
{
  const auto half = ReferenceMeasureXd::uniform(2);

  const auto unit = chi2_constrained_argmax(vec({1, -1}), half, 1.0);
  CHECK(unit.v == vec({1, -1}));
  CHECK(unit.implied_mu == 1.0);

  const auto r1 = chi2_constrained_argmax(vec({2, -2}), half, 1.0);
  CHECK(max_abs_diff(r1.v, vec({1, -1})) < 1e-15);
  CHECK(r1.implied_mu == 2.0);

  const auto r4 = chi2_constrained_argmax(vec({2, -2}), half, 4.0);
  CHECK(max_abs_diff(r4.v, vec({2, -2})) < 1e-15);
  CHECK(r4.implied_mu == 1.0);

  const auto flat = chi2_constrained_argmax(vec({0, 0}), half, 1.0);
  CHECK_FALSE(flat.mu_defined);
  CHECK(std::isnan(flat.implied_mu));
  CHECK(flat.v.isZero(0));

  CHECK_THROWS_AS(chi2_constrained_argmax(vec({1, -1}), half, 0.0), std::invalid_argument);
}
