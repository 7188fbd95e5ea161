#pragma once

/**
 * @file
 * @brief Ratio-space convergence, divergence diagnostics and the log-ratio /
 * chi-squared duality checks.
 */

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "gopo/hilbert.hpp"
#include "gopo/objectives.hpp"
#include "gopo/tolerances.hpp"

namespace gopo {

template<typename Scalar>
struct RatioTrajectory
{
  /// rho_0, rho_1, ..., rho_n. Overshooting step sizes may leave (0, inf).
  std::vector<Scalar> rho_steps;
  /// Equilibrium 1 + A / mu.
  Scalar rho_star{};
  /// Per-step error multiplier |1 - step mu|.
  Scalar contraction{};
  /// step >= 2 / mu: errors do not shrink.
  bool divergent = false;
};

/// Gradient descent rho <- rho - step (-A + mu (rho - 1)) on one sample.
template<typename Scalar>
RatioTrajectory<Scalar> ratio_gd_trajectory(Scalar rho0, Scalar advantage, Scalar mu, Scalar step, int n_steps)
{
  if (!(mu > 0)) { throw std::invalid_argument("ratio_gd_trajectory: mu must be > 0"); }
  if (!(step > 0)) { throw std::invalid_argument("ratio_gd_trajectory: step must be > 0"); }
  if (n_steps < 1) { throw std::invalid_argument("ratio_gd_trajectory: n_steps must be >= 1"); }

  RatioTrajectory<Scalar> t;
  t.rho_star = Scalar(1) + advantage / mu;
  t.contraction = std::abs(Scalar(1) - step * mu);
  t.divergent = !(step * mu < Scalar(2));
  t.rho_steps.reserve(static_cast<std::size_t>(n_steps) + 1);
  Scalar rho = rho0;
  t.rho_steps.push_back(rho);
  for (int k = 0; k < n_steps; ++k) {
    rho -= step * gopo_sample_grad(advantage, rho, mu);
    t.rho_steps.push_back(rho);
  }
  return t;
}

/**
 * Least-squares slope of log|rho_k - rho*| against k, returned as a rate
 * exp(slope). Errors below tol::kRateFitFloor are skipped. NaN when fewer than
 * two usable points remain.
 */
template<typename Scalar>
Scalar fit_contraction_rate(const RatioTrajectory<Scalar>& t)
{
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < t.rho_steps.size(); ++k) {
    const double err = std::abs(static_cast<double>(t.rho_steps[k] - t.rho_star));
    if (err < tol::kRateFitFloor) { continue; }
    const double x = static_cast<double>(k);
    const double y = std::log(err);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n < 2) { return std::numeric_limits<Scalar>::quiet_NaN(); }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return static_cast<Scalar>(std::exp(slope));
}

/// (1/2) E_{pi_k}[v^2] with v = pi / pi_k - 1 (this convention keeps the 1/2).
template<typename Derived>
typename Derived::Scalar chi2_divergence(const Eigen::MatrixBase<Derived>& pi,
                                         const ReferenceMeasure<typename Derived::Scalar>& ref)
{
  const auto v = fluctuation_from_policy(pi, ref);
  return inner_product(v, v, ref) / 2;
}

/// (1/2) E_{pi_k}[|v|]
template<typename Derived>
typename Derived::Scalar tv_distance(const Eigen::MatrixBase<Derived>& pi,
                                     const ReferenceMeasure<typename Derived::Scalar>& ref)
{
  const auto v = fluctuation_from_policy(pi, ref);
  return ref.weights().dot(v.cwiseAbs()) / 2;
}

template<typename Scalar>
struct LogRatioEntry
{
  Scalar delta{};
  Scalar v{};
  Scalar linear_error{};   ///< |v - delta|
  Scalar linear_bound{};   ///< (1/2) d^2 e^d
  Scalar square_error{};   ///< |v^2 - delta^2|
  Scalar square_bound{};   ///< d^3 e^{2d}
  bool holds = false;
};

/**
 * Compares v = exp(delta) - 1 with its first-order surrogate delta, using the
 * sup-norm d = max |delta| of the whole list in both bounds. Throws
 * std::domain_error when d >= 1.
 */
template<typename Derived>
std::vector<LogRatioEntry<typename Derived::Scalar>> log_ratio_error_check(const Eigen::MatrixBase<Derived>& deltas)
{
  using Scalar = typename Derived::Scalar;
  if (deltas.size() == 0) { return {}; }
  detail::require_finite(deltas, "log_ratio_error_check");
  const Scalar d = deltas.cwiseAbs().maxCoeff();
  if (!(d < Scalar(1))) { throw std::domain_error("log_ratio_error_check: sup-norm of delta must be < 1"); }

  const Scalar linear_bound = d * d * std::exp(d) / 2;
  const Scalar square_bound = d * d * d * std::exp(2 * d);
  std::vector<LogRatioEntry<Scalar>> out;
  out.reserve(static_cast<std::size_t>(deltas.size()));
  for (Eigen::Index i = 0; i < deltas.size(); ++i) {
    LogRatioEntry<Scalar> e;
    e.delta = deltas[i];
    e.v = std::expm1(e.delta);
    e.linear_error = std::abs(e.v - e.delta);
    e.linear_bound = linear_bound;
    e.square_error = std::abs((e.v - e.delta) * (e.v + e.delta));
    e.square_bound = square_bound;
    e.holds = e.linear_error <= e.linear_bound && e.square_error <= e.square_bound;
    out.push_back(e);
  }
  return out;
}

template<typename Scalar>
struct Chi2Argmax
{
  Field<Scalar> v;
  /// Dual variable of the radius constraint; NaN when g = 0.
  Scalar implied_mu{};
  bool mu_defined = false;
};

/**
 * @brief argmax E[g v] subject to E[v^2] <= radius, over all of L2(pi_k).
 *
 * v = g sqrt(radius) / ||g|| and the implied stiffness is ||g|| / sqrt(radius),
 * so v = g / implied_mu. For g = 0 every feasible v is optimal; the zero vector
 * is returned with mu_defined = false.
 */
template<typename Derived>
Chi2Argmax<typename Derived::Scalar> chi2_constrained_argmax(const Eigen::MatrixBase<Derived>& g,
                                                            const ReferenceMeasure<typename Derived::Scalar>& ref,
                                                            typename Derived::Scalar radius)
{
  using Scalar = typename Derived::Scalar;
  if (!(radius > 0)) { throw std::invalid_argument("chi2_constrained_argmax: radius must be > 0"); }
  detail::require_finite(g, "chi2_constrained_argmax");
  const Scalar norm = ref.norm(g);
  Chi2Argmax<Scalar> out;
  if (norm == 0) {
    out.v = Field<Scalar>::Zero(g.size());
    out.implied_mu = std::numeric_limits<Scalar>::quiet_NaN();
    return out;
  }
  out.implied_mu = norm / std::sqrt(radius);
  out.mu_defined = true;
  out.v = g * (std::sqrt(radius) / norm);
  return out;
}

}  // namespace gopo
