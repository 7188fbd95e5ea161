#pragma once

/**
 * @file
 * @brief Group losses in ratio space with analytic first and second
 * derivatives in rho.
 *
 * All losses here are functions of the per-sample ratios rho_i. `value` and
 * `grad_rho` refer to the group-averaged loss; `curvature_rho` is the
 * un-averaged per-sample second derivative d2 l_i / d rho_i^2 (the averaged
 * loss has curvature curvature_rho / G).
 */

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "gopo/errors.hpp"
#include "gopo/hilbert.hpp"
#include "gopo/signal.hpp"
#include "gopo/tolerances.hpp"

namespace gopo {

enum class LossKind { Gopo, GopoBhp, Grpo };

inline std::string_view to_string(LossKind kind)
{
  switch (kind) {
    case LossKind::Gopo: return "gopo";
    case LossKind::GopoBhp: return "gopo-bhp";
    case LossKind::Grpo: return "grpo";
  }
  return "?";
}

/// Parses "gopo", "gopo-bhp" or "grpo"; throws ConfigError naming `field`.
inline LossKind parse_loss_kind(std::string_view text, const std::string& field = "loss_kind")
{
  if (text == "gopo") { return LossKind::Gopo; }
  if (text == "gopo-bhp") { return LossKind::GopoBhp; }
  if (text == "grpo") { return LossKind::Grpo; }
  throw ConfigError(field, "unknown loss kind '" + std::string(text) + "' (expected gopo, gopo-bhp or grpo)");
}

template<typename Scalar>
struct LossReport
{
  Scalar value{};
  Field<Scalar> grad_rho;
  Field<Scalar> curvature_rho;
  /// True where gradient flows (outside dead zone, floor and clip regions).
  Mask gate;
};

using LossReportXd = LossReport<double>;

/// Scalars shared by the loss family.
struct LossParams
{
  double mu = 0.5;
  double alpha = 0.0;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
};

// Per-sample pieces -----------------------------------------------------------

/// l(rho) = -g rho + (mu/2)(rho - 1)^2
template<typename Scalar>
Scalar gopo_sample_loss(Scalar g, Scalar rho, Scalar mu)
{
  const Scalar d = rho - Scalar(1);
  return -g * rho + mu / 2 * d * d;
}

/// dl/drho = -g + mu (rho - 1) = mu (rho - rho*) with rho* = 1 + g/mu
template<typename Scalar>
Scalar gopo_sample_grad(Scalar g, Scalar rho, Scalar mu)
{
  return -g + mu * (rho - Scalar(1));
}

template<typename Scalar>
Scalar bounded_gopo_sample_loss(Scalar g, Scalar rho, Scalar mu)
{
  return std::max(Scalar(0), gopo_sample_loss(g, rho, mu));
}

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A)
template<typename Scalar>
Scalar grpo_sample_surrogate(Scalar advantage, Scalar rho, Scalar eps)
{
  const Scalar clipped = std::clamp(rho, Scalar(1) - eps, Scalar(1) + eps);
  return std::min(rho * advantage, clipped * advantage);
}

/// The clipped branch is selected and flat in rho.
template<typename Scalar>
bool grpo_sample_clipped(Scalar advantage, Scalar rho, Scalar eps)
{
  return (advantage > 0 && rho > Scalar(1) + eps) || (advantage < 0 && rho < Scalar(1) - eps);
}

/// Non-negative KL estimator rho - 1 - log rho.
template<typename Scalar>
Scalar kl_estimate(Scalar rho)
{
  return rho - Scalar(1) - std::log(rho);
}

/// Central second difference (f(x+h) - 2 f(x) + f(x-h)) / h^2.
template<typename Fn, typename Scalar>
Scalar second_difference(Fn&& f, Scalar x, Scalar h = Scalar(tol::kCurvatureStep))
{
  return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

// Losses on a fixed driving field ---------------------------------------------

/// GOPO loss for an explicit driving field g (held constant in rho).
template<typename DerivedG, typename DerivedR>
LossReport<typename DerivedG::Scalar> gopo_loss_on_field(const Eigen::MatrixBase<DerivedG>& g,
                                                        const Eigen::MatrixBase<DerivedR>& rho,
                                                        typename DerivedG::Scalar mu)
{
  using Scalar = typename DerivedG::Scalar;
  detail::require_same_size(g.size(), rho.size(), "gopo_loss");
  const auto n = g.size();
  const Scalar inv_g = Scalar(1) / static_cast<Scalar>(n);
  LossReport<Scalar> r;
  r.grad_rho.resize(n);
  r.curvature_rho = Field<Scalar>::Constant(n, mu);
  r.gate = Mask::Constant(n, true);
  Scalar total(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    total += gopo_sample_loss(g[i], rho[i], mu);
    r.grad_rho[i] = inv_g * gopo_sample_grad(g[i], rho[i], mu);
  }
  r.value = inv_g * total;
  return r;
}

/// Bounded GOPO loss: mean of max(0, -g rho + (mu/2)(rho-1)^2). Gradient flows
/// only where the floor is inactive and rho exceeds the dead-zone floor.
template<typename DerivedG, typename DerivedR>
LossReport<typename DerivedG::Scalar> bounded_gopo_loss_on_field(const Eigen::MatrixBase<DerivedG>& g,
                                                                const Eigen::MatrixBase<DerivedR>& rho,
                                                                typename DerivedG::Scalar mu)
{
  using Scalar = typename DerivedG::Scalar;
  detail::require_same_size(g.size(), rho.size(), "bounded_gopo_loss");
  const auto n = g.size();
  const Scalar inv_g = Scalar(1) / static_cast<Scalar>(n);
  LossReport<Scalar> r;
  r.grad_rho.resize(n);
  r.curvature_rho.resize(n);
  r.gate.resize(n);
  Scalar total(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar inner = gopo_sample_loss(g[i], rho[i], mu);
    const bool floor_open = inner > 0;
    const bool outside_dead_zone = rho[i] > Scalar(tol::kRatioFloor);
    const bool open = floor_open && outside_dead_zone;
    total += std::max(Scalar(0), inner);
    r.gate[i] = open;
    r.grad_rho[i] = open ? inv_g * gopo_sample_grad(g[i], rho[i], mu) : Scalar(0);
    r.curvature_rho[i] = open ? mu : Scalar(0);
  }
  r.value = inv_g * total;
  return r;
}

// Losses on a batch -----------------------------------------------------------

template<typename Scalar>
LossReport<Scalar> gopo_loss(const GroupBatch<Scalar>& batch, Scalar mu, Scalar alpha)
{
  if (!(mu > 0)) { throw std::invalid_argument("gopo_loss: mu must be > 0"); }
  batch.validate(false);
  return gopo_loss_on_field(escort_modulate(batch.advantages, batch.ratios, alpha), batch.ratios, mu);
}

template<typename Scalar>
LossReport<Scalar> bounded_gopo_loss(const GroupBatch<Scalar>& batch, Scalar mu, Scalar alpha)
{
  if (!(mu > 0)) { throw std::invalid_argument("bounded_gopo_loss: mu must be > 0"); }
  batch.validate(false);
  return bounded_gopo_loss_on_field(escort_modulate(batch.advantages, batch.ratios, alpha), batch.ratios, mu);
}

/**
 * @brief Clipped group surrogate at sequence level, as a loss.
 *
 * value = -(1/G) sum min(rho A, clip(rho) A) + beta (1/G) sum (rho - 1 - log rho).
 * The advantages are taken from the batch as-is (standardize at sampling time
 * if desired).
 */
template<typename Scalar>
LossReport<Scalar> grpo_loss(const GroupBatch<Scalar>& batch, Scalar clip_eps, Scalar beta)
{
  if (!(clip_eps > 0 && clip_eps < 1)) { throw std::invalid_argument("grpo_loss: clip_eps must lie in (0, 1)"); }
  if (!(beta >= 0)) { throw std::invalid_argument("grpo_loss: beta must be >= 0"); }
  batch.validate(false);
  const auto n = batch.size();
  const Scalar inv_g = Scalar(1) / static_cast<Scalar>(n);
  LossReport<Scalar> r;
  r.grad_rho.resize(n);
  r.curvature_rho.resize(n);
  r.gate.resize(n);
  Scalar total(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar a = batch.advantages[i];
    const Scalar rho = batch.ratios[i];
    const bool clipped = grpo_sample_clipped(a, rho, clip_eps);
    Scalar sample = -grpo_sample_surrogate(a, rho, clip_eps);
    Scalar grad = clipped ? Scalar(0) : -a;
    if (beta > 0) {
      sample += beta * kl_estimate(rho);
      grad += beta * (Scalar(1) - Scalar(1) / rho);
    }
    total += sample;
    r.grad_rho[i] = inv_g * grad;
    r.curvature_rho[i] = beta > 0 ? beta / (rho * rho) : Scalar(0);
    r.gate[i] = !clipped;
  }
  r.value = inv_g * total;
  return r;
}

template<typename Scalar>
LossReport<Scalar> evaluate_loss(LossKind kind, const GroupBatch<Scalar>& batch, const LossParams& p)
{
  switch (kind) {
    case LossKind::Gopo: return gopo_loss(batch, Scalar(p.mu), Scalar(p.alpha));
    case LossKind::GopoBhp: return bounded_gopo_loss(batch, Scalar(p.mu), Scalar(p.alpha));
    case LossKind::Grpo: return grpo_loss(batch, Scalar(p.clip_eps), Scalar(p.kl_beta));
  }
  throw std::logic_error("evaluate_loss: unhandled loss kind");
}

/// |d l_DPO / d m| = beta sigma(m) (1 - sigma(m)) <= beta / 4
template<typename Scalar>
Scalar dpo_grad_magnitude(Scalar margin, Scalar beta)
{
  if (!(beta > 0)) { throw std::invalid_argument("dpo_grad_magnitude: beta must be > 0"); }
  const Scalar e = std::exp(-std::abs(margin));
  return beta * e / ((Scalar(1) + e) * (Scalar(1) + e));
}

/**
 * @brief Max |analytic grad_rho - central finite difference| for a batch.
 *
 * The driving field is frozen at the batch's ratios so that only the loss
 * geometry is differentiated. Throws NonSmoothPoint if a sample sits within
 * the margin of a floor, dead-zone or clip kink.
 */
template<typename Scalar>
Scalar finite_diff_check(LossKind kind, const GroupBatch<Scalar>& batch, const LossParams& p,
                         Scalar step = Scalar(tol::kFdStep))
{
  batch.validate(false);
  const Scalar mu(p.mu);
  const Scalar eps(p.clip_eps);
  const Scalar margin = Scalar(tol::kFdBoundaryMargin) * step;
  const Field<Scalar> g = escort_modulate(batch.advantages, batch.ratios, Scalar(p.alpha));
  const auto n = batch.size();

  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar rho = batch.ratios[i];
    bool kink = false;
    if (kind == LossKind::GopoBhp) {
      const auto s = [&](Scalar x) { return gopo_sample_loss(g[i], x, mu); };
      const bool lo = s(rho - margin) > 0;
      const bool mid = s(rho) > 0;
      const bool hi = s(rho + margin) > 0;
      kink = lo != mid || mid != hi || s(rho) == 0 || std::abs(rho - Scalar(tol::kRatioFloor)) <= margin;
    } else if (kind == LossKind::Grpo) {
      kink = std::abs(rho - (Scalar(1) + eps)) <= margin || std::abs(rho - (Scalar(1) - eps)) <= margin;
    }
    if (kink) {
      throw NonSmoothPoint("finite_diff_check: sample " + std::to_string(i) + " (rho = " + std::to_string(rho)
                           + ") lies on a non-smooth boundary of " + std::string(to_string(kind)));
    }
  }

  const auto value_at = [&](const Field<Scalar>& rho) -> Scalar {
    switch (kind) {
      case LossKind::Gopo: return gopo_loss_on_field(g, rho, mu).value;
      case LossKind::GopoBhp: return bounded_gopo_loss_on_field(g, rho, mu).value;
      case LossKind::Grpo: {
        GroupBatch<Scalar> shifted = GroupBatch<Scalar>::from_ratios(batch.advantages, rho);
        return grpo_loss(shifted, eps, Scalar(p.kl_beta)).value;
      }
    }
    return Scalar(0);
  };

  LossReport<Scalar> analytic;
  switch (kind) {
    case LossKind::Gopo: analytic = gopo_loss_on_field(g, batch.ratios, mu); break;
    case LossKind::GopoBhp: analytic = bounded_gopo_loss_on_field(g, batch.ratios, mu); break;
    case LossKind::Grpo: analytic = grpo_loss(batch, eps, Scalar(p.kl_beta)); break;
  }

  Scalar worst(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Field<Scalar> up = batch.ratios;
    Field<Scalar> down = batch.ratios;
    up[i] += step;
    down[i] -= step;
    const Scalar numeric = (value_at(up) - value_at(down)) / (2 * step);
    worst = std::max(worst, std::abs(numeric - analytic.grad_rho[i]));
  }
  return worst;
}

}  // namespace gopo
