#pragma once

/**
 * @file
 * @brief The weighted space L2(pi_k) over a finite support.
 *
 * A reference policy pi_k with strictly positive weights defines the inner
 * product <f, g> = sum_y pi_k(y) f(y) g(y). Policies are expressed through the
 * fluctuation coordinate v = pi / pi_k - 1, in which normalization becomes the
 * single linear condition <v, 1> = 0. This header provides the orthogonal
 * projection onto that zero-mean subspace and the bounded projection that
 * additionally enforces v >= -1 (non-negative probabilities).
 */

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "gopo/errors.hpp"
#include "gopo/tolerances.hpp"

namespace gopo {

/// Real-valued function on a finite support.
template<typename Scalar>
using Field = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-atom boolean flags.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

using FieldXd = Field<double>;

namespace detail {

template<typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& f, const char* what)
{
  if (!f.allFinite()) { throw std::invalid_argument(std::string(what) + ": non-finite entry"); }
}

inline void require_same_size(Eigen::Index lhs, Eigen::Index rhs, const char* what)
{
  if (lhs != rhs) {
    throw DimensionMismatch(what, static_cast<std::size_t>(lhs), static_cast<std::size_t>(rhs));
  }
}

}  // namespace detail

/**
 * @brief Reference measure pi_k: strictly positive weights summing to one.
 *
 * Zero-weight atoms are rejected, since the fluctuation coordinate divides by
 * pi_k(y).
 */
template<typename Scalar>
class ReferenceMeasure
{
public:
  template<typename Derived>
  explicit ReferenceMeasure(const Eigen::MatrixBase<Derived>& weights) : weights_(weights)
  {
    if (weights_.size() == 0) { throw std::invalid_argument("reference measure: empty support"); }
    detail::require_finite(weights_, "reference measure");
    if ((weights_.array() <= Scalar(0)).any()) {
      throw std::invalid_argument("reference measure: every weight must be > 0");
    }
    const double slack = std::max(tol::kMeasureSum,
                                  4.0 * static_cast<double>(weights_.size())
                                      * static_cast<double>(std::numeric_limits<Scalar>::epsilon()));
    if (std::abs(static_cast<double>(weights_.sum()) - 1.0) > slack) {
      throw std::invalid_argument("reference measure: weights must sum to 1");
    }
  }

  static ReferenceMeasure uniform(Eigen::Index n)
  {
    return ReferenceMeasure(Field<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
  }

  Eigen::Index size() const noexcept { return weights_.size(); }
  const Field<Scalar>& weights() const noexcept { return weights_; }
  Scalar operator[](Eigen::Index i) const { return weights_[i]; }

  /// E_{pi_k}[f]
  template<typename Derived>
  Scalar expectation(const Eigen::MatrixBase<Derived>& f) const
  {
    detail::require_same_size(f.size(), size(), "expectation");
    return weights_.dot(f);
  }

  /// <f, f>^{1/2}
  template<typename Derived>
  Scalar norm(const Eigen::MatrixBase<Derived>& f) const
  {
    detail::require_same_size(f.size(), size(), "norm");
    return std::sqrt((weights_.array() * f.array().square()).sum());
  }

private:
  Field<Scalar> weights_;
};

using ReferenceMeasureXd = ReferenceMeasure<double>;

/// <f, g>_{pi_k} = sum_y pi_k(y) f(y) g(y)
template<typename DerivedF, typename DerivedG>
typename DerivedF::Scalar inner_product(const Eigen::MatrixBase<DerivedF>& f,
                                        const Eigen::MatrixBase<DerivedG>& g,
                                        const ReferenceMeasure<typename DerivedF::Scalar>& ref)
{
  detail::require_same_size(f.size(), ref.size(), "inner_product: f vs measure");
  detail::require_same_size(g.size(), ref.size(), "inner_product: g vs measure");
  return (ref.weights().array() * f.array() * g.array()).sum();
}

/// v = pi / pi_k - 1. `pi` is a raw vector and may contain zeros.
template<typename Derived>
Field<typename Derived::Scalar> fluctuation_from_policy(
    const Eigen::MatrixBase<Derived>& pi, const ReferenceMeasure<typename Derived::Scalar>& ref)
{
  using Scalar = typename Derived::Scalar;
  detail::require_same_size(pi.size(), ref.size(), "fluctuation_from_policy");
  return (pi.array() / ref.weights().array() - Scalar(1)).matrix();
}

/// pi = pi_k (1 + v). Validity is not enforced; see is_distribution().
template<typename Derived>
Field<typename Derived::Scalar> policy_from_fluctuation(
    const Eigen::MatrixBase<Derived>& v, const ReferenceMeasure<typename Derived::Scalar>& ref)
{
  using Scalar = typename Derived::Scalar;
  detail::require_same_size(v.size(), ref.size(), "policy_from_fluctuation");
  return (ref.weights().array() * (Scalar(1) + v.array())).matrix();
}

/// Non-negative entries summing to one within `tolerance`.
template<typename Derived>
bool is_distribution(const Eigen::MatrixBase<Derived>& pi, double tolerance = tol::kMeasureSum)
{
  return pi.allFinite() && (pi.array() >= 0).all()
         && std::abs(static_cast<double>(pi.sum()) - 1.0) <= tolerance;
}

/// Orthogonal projection onto H0 = {f : <f, 1> = 0}: f - (<f,1>/<1,1>) 1.
template<typename Derived>
Field<typename Derived::Scalar> project_zero_mean(
    const Eigen::MatrixBase<Derived>& f, const ReferenceMeasure<typename Derived::Scalar>& ref)
{
  detail::require_same_size(f.size(), ref.size(), "project_zero_mean");
  const auto shift = ref.weights().dot(f) / ref.weights().sum();
  return (f.array() - shift).matrix();
}

/// Output of the bounded projection onto H0 intersected with {v >= -1}.
template<typename Scalar>
struct BhpSolution
{
  Field<Scalar> v_star;
  /// Chemical potential enforcing E[v*] = 0.
  Scalar lambda_star{};
  /// True where v*(y) = -1 exactly.
  Mask active_mask;
  /// KKT multipliers of the floor constraint.
  Field<Scalar> eta;
};

using BhpSolutionXd = BhpSolution<double>;

/// h(lambda) = E[max(-1, (g - lambda)/mu)]. Non-increasing in lambda.
template<typename Derived>
typename Derived::Scalar bhp_residual(const Eigen::MatrixBase<Derived>& g,
                                      const ReferenceMeasure<typename Derived::Scalar>& ref,
                                      typename Derived::Scalar mu,
                                      typename Derived::Scalar lambda)
{
  using Scalar = typename Derived::Scalar;
  detail::require_same_size(g.size(), ref.size(), "bhp_residual");
  return ref.weights().dot(((g.array() - lambda) / mu).max(Scalar(-1)).matrix());
}

/// The bounded solution for a given chemical potential.
template<typename Derived>
BhpSolution<typename Derived::Scalar> bhp_solution_at(const Eigen::MatrixBase<Derived>& g,
                                                      typename Derived::Scalar mu,
                                                      typename Derived::Scalar lambda)
{
  using Scalar = typename Derived::Scalar;
  BhpSolution<Scalar> out;
  out.lambda_star = lambda;
  // Atoms below the threshold are pinned by comparison, not by rounding of (g - lambda)/mu.
  const auto below = g.array() < lambda - mu;
  out.v_star = below.select(Scalar(-1), ((g.array() - lambda) / mu).max(Scalar(-1))).matrix();
  out.active_mask = out.v_star.array() == Scalar(-1);
  out.eta = (lambda - mu - g.array()).max(Scalar(0)).matrix();
  return out;
}

namespace detail {

template<typename Derived>
void validate_bhp_inputs(const Eigen::MatrixBase<Derived>& g,
                         const ReferenceMeasure<typename Derived::Scalar>& ref,
                         typename Derived::Scalar mu)
{
  if (!(mu > 0) || !std::isfinite(static_cast<double>(mu))) {
    throw std::invalid_argument("bhp: mu must be a positive finite number");
  }
  require_same_size(g.size(), ref.size(), "bhp: g vs measure");
  require_finite(g, "bhp: g");
}

}  // namespace detail

/**
 * @brief Bounded Hilbert projection of g/mu onto {v : E[v] = 0, v >= -1}.
 *
 * v*(y) = max(-1, (g(y) - lambda*)/mu) where lambda* is the root of the
 * piecewise-linear, non-increasing h(lambda). Atom i reaches the floor at the
 * breakpoint lambda_i = g_i + mu. Breakpoints are scanned in ascending order;
 * on the segment with the first k atoms pinned at -1,
 *
 *   h(lambda) = -W_active + (S_free - lambda W_free) / mu
 *
 * and the first segment whose linear root does not exceed the next breakpoint
 * holds lambda*. At least one atom is always free at the root since
 * h -> -1 < 0 only once every atom is pinned.
 */
template<typename Derived>
BhpSolution<typename Derived::Scalar> bhp_solve(const Eigen::MatrixBase<Derived>& g,
                                                const ReferenceMeasure<typename Derived::Scalar>& ref,
                                                typename Derived::Scalar mu)
{
  using Scalar = typename Derived::Scalar;
  detail::validate_bhp_inputs(g, ref, mu);

  const Eigen::Index n = g.size();
  const auto& w = ref.weights();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return g[a] < g[b]; });

  // Suffix sums over the sorted order: the free set for k pinned atoms is order[k..n).
  std::vector<Scalar> free_weight(static_cast<std::size_t>(n) + 1, Scalar(0));
  std::vector<Scalar> free_work(static_cast<std::size_t>(n) + 1, Scalar(0));
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const auto i = order[static_cast<std::size_t>(k)];
    free_weight[static_cast<std::size_t>(k)] = free_weight[static_cast<std::size_t>(k) + 1] + w[i];
    free_work[static_cast<std::size_t>(k)] = free_work[static_cast<std::size_t>(k) + 1] + w[i] * g[i];
  }

  Scalar pinned_weight(0);
  Scalar lambda = std::numeric_limits<Scalar>::quiet_NaN();
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    lambda = (free_work[uk] - mu * pinned_weight) / free_weight[uk];
    const Scalar next_breakpoint = g[order[uk]] + mu;
    if (lambda <= next_breakpoint) { break; }
    pinned_weight += w[order[uk]];
  }
  assert(std::isfinite(static_cast<double>(lambda)) && "bounded projection pinned every atom");

  return bhp_solution_at(g, mu, lambda);
}

/// Bisection on h(lambda); kept as an independent cross-check of bhp_solve.
template<typename Derived>
typename Derived::Scalar bhp_lambda_bisect(const Eigen::MatrixBase<Derived>& g,
                                           const ReferenceMeasure<typename Derived::Scalar>& ref,
                                           typename Derived::Scalar mu,
                                           int max_iterations = 400)
{
  using Scalar = typename Derived::Scalar;
  detail::validate_bhp_inputs(g, ref, mu);

  // h(min g) >= 0 (no atom can be pinned there) and h(max g + mu) = -1.
  Scalar lo = g.minCoeff();
  Scalar hi = g.maxCoeff() + mu;
  for (int it = 0; it < max_iterations; ++it) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) { break; }
    if (bhp_residual(g, ref, mu, mid) > 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo + (hi - lo) / 2;
}

/**
 * @brief Atoms strictly below the sparsity threshold, g(y) < lambda* - mu.
 *
 * These receive target probability exactly zero. Throws if `solution` was not
 * produced from (g, mu).
 */
template<typename Derived>
Mask sparsity_threshold(const BhpSolution<typename Derived::Scalar>& solution,
                        const Eigen::MatrixBase<Derived>& g,
                        typename Derived::Scalar mu)
{
  using Scalar = typename Derived::Scalar;
  detail::require_same_size(g.size(), solution.v_star.size(), "sparsity_threshold");
  if (!(mu > 0)) { throw std::invalid_argument("sparsity_threshold: mu must be > 0"); }
  const Field<Scalar> expected = ((g.array() - solution.lambda_star) / mu).max(Scalar(-1)).matrix();
  if (!expected.isApprox(solution.v_star, Scalar(1e-9))
      && (expected - solution.v_star).cwiseAbs().maxCoeff() > Scalar(1e-9)) {
    throw std::invalid_argument("sparsity_threshold: solution is inconsistent with (g, mu)");
  }
  Mask mask = g.array() < solution.lambda_star - mu;
  assert(((!mask) || solution.active_mask).all());
  return mask;
}

}  // namespace gopo
