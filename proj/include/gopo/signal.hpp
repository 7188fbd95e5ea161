#pragma once

/**
 * @file
 * @brief Driving force for a sampled group: centered advantages, escort
 * modulation, and the empirical zero-mean projection.
 */

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "gopo/errors.hpp"
#include "gopo/hilbert.hpp"
#include "gopo/tolerances.hpp"

namespace gopo {

/// A_i = r_i - mean(r)
template<typename Derived>
Field<typename Derived::Scalar> normalize_advantages(const Eigen::MatrixBase<Derived>& rewards)
{
  if (rewards.size() == 0) { throw std::invalid_argument("normalize_advantages: empty reward list"); }
  detail::require_finite(rewards, "normalize_advantages");
  return (rewards.array() - rewards.mean()).matrix();
}

/// (r_i - mean(r)) / (std(r) + floor), population standard deviation.
/// Used by the clipped baseline only.
template<typename Derived>
Field<typename Derived::Scalar> standardize_advantages(const Eigen::MatrixBase<Derived>& rewards)
{
  using Scalar = typename Derived::Scalar;
  Field<Scalar> centered = normalize_advantages(rewards);
  const Scalar sd = std::sqrt(centered.squaredNorm() / static_cast<Scalar>(centered.size()));
  return centered / (sd + Scalar(tol::kStdFloor));
}

/// g_i = rho_i^alpha A_i. The escort weight is a constant input to the loss.
template<typename DerivedA, typename DerivedR>
Field<typename DerivedA::Scalar> escort_modulate(const Eigen::MatrixBase<DerivedA>& advantages,
                                                 const Eigen::MatrixBase<DerivedR>& ratios,
                                                 typename DerivedA::Scalar alpha)
{
  detail::require_same_size(advantages.size(), ratios.size(), "escort_modulate");
  if ((ratios.array() <= 0).any()) { throw std::invalid_argument("escort_modulate: non-positive ratio"); }
  if (alpha == 0) { return advantages; }
  return (ratios.array().pow(alpha) * advantages.array()).matrix();
}

/// Projection onto the empirical zero-mean subspace (uniform 1/G measure).
/// Identity on centered advantages.
template<typename Derived>
Field<typename Derived::Scalar> empirical_project(const Eigen::MatrixBase<Derived>& values)
{
  if (values.size() == 0) { throw std::invalid_argument("empirical_project: empty list"); }
  return (values.array() - values.mean()).matrix();
}

/// One prompt's G sampled responses.
template<typename Scalar>
struct GroupBatch
{
  Field<Scalar> rewards;
  Field<Scalar> advantages;
  Field<Scalar> log_prob_ref;
  Field<Scalar> log_prob_cur;
  Field<Scalar> ratios;

  Eigen::Index size() const noexcept { return advantages.size(); }

  /// Batch at sampling time: rho = 1, advantages centered from `rewards`.
  template<typename DerivedR, typename DerivedL>
  static GroupBatch sampled(const Eigen::MatrixBase<DerivedR>& rewards,
                            const Eigen::MatrixBase<DerivedL>& log_prob_ref,
                            bool standardize = false)
  {
    detail::require_same_size(rewards.size(), log_prob_ref.size(), "GroupBatch::sampled");
    GroupBatch b;
    b.rewards = rewards;
    b.advantages = standardize ? standardize_advantages(rewards) : normalize_advantages(rewards);
    b.log_prob_ref = log_prob_ref;
    b.log_prob_cur = log_prob_ref;
    b.ratios = Field<Scalar>::Ones(rewards.size());
    return b;
  }

  /// Batch given directly in ratio space; log_prob_ref = 0, log_prob_cur = log rho.
  template<typename DerivedA, typename DerivedR>
  static GroupBatch from_ratios(const Eigen::MatrixBase<DerivedA>& advantages,
                                const Eigen::MatrixBase<DerivedR>& ratios)
  {
    detail::require_same_size(advantages.size(), ratios.size(), "GroupBatch::from_ratios");
    if ((ratios.array() <= 0).any()) { throw std::invalid_argument("GroupBatch: ratios must be > 0"); }
    GroupBatch b;
    b.rewards = advantages;
    b.advantages = advantages;
    b.log_prob_ref = Field<Scalar>::Zero(advantages.size());
    b.log_prob_cur = ratios.array().log().matrix();
    b.ratios = ratios;
    return b;
  }

  /// Recompute rho from new current log-probabilities.
  template<typename Derived>
  void set_current(const Eigen::MatrixBase<Derived>& log_prob_current)
  {
    detail::require_same_size(log_prob_current.size(), log_prob_ref.size(), "GroupBatch::set_current");
    log_prob_cur = log_prob_current;
    ratios = (log_prob_cur - log_prob_ref).array().exp().matrix();
  }

  /// Throws std::invalid_argument on a violated invariant. Centering is only
  /// required of batches built from sampled rewards.
  void validate(bool require_centered) const
  {
    const auto g = advantages.size();
    if (g == 0) { throw std::invalid_argument("GroupBatch: empty group"); }
    detail::require_same_size(rewards.size(), g, "GroupBatch: rewards");
    detail::require_same_size(log_prob_ref.size(), g, "GroupBatch: log_prob_ref");
    detail::require_same_size(log_prob_cur.size(), g, "GroupBatch: log_prob_cur");
    detail::require_same_size(ratios.size(), g, "GroupBatch: ratios");
    detail::require_finite(advantages, "GroupBatch: advantages");
    detail::require_finite(ratios, "GroupBatch: ratios");
    if ((ratios.array() <= 0).any()) { throw std::invalid_argument("GroupBatch: ratios must be > 0"); }
    for (Eigen::Index i = 0; i < g; ++i) {
      const Scalar expected = std::exp(log_prob_cur[i] - log_prob_ref[i]);
      if (std::abs(ratios[i] - expected) > Scalar(tol::kRatioConsistency) * std::max(Scalar(1), expected)) {
        throw std::invalid_argument("GroupBatch: ratio " + std::to_string(i) + " inconsistent with log-probabilities");
      }
    }
    if (require_centered && std::abs(advantages.sum()) > Scalar(tol::kAdvantageSum)) {
      throw std::invalid_argument("GroupBatch: advantages do not sum to zero");
    }
  }
};

using GroupBatchXd = GroupBatch<double>;

}  // namespace gopo
