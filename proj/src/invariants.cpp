#include "gopo/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>

#include "gopo/dynamics.hpp"
#include "gopo/hilbert.hpp"
#include "gopo/objectives.hpp"
#include "gopo/oracles.hpp"
#include "gopo/signal.hpp"
#include "gopo/tolerances.hpp"
#include "gopo/trainer.hpp"

namespace gopo {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Index uniform_index(Rng& rng, Eigen::Index lo, Eigen::Index hi)
{
  return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng);
}

FieldXd random_field(Rng& rng, Eigen::Index n, double lo, double hi)
{
  FieldXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) { f[i] = uniform(rng, lo, hi); }
  return f;
}

ReferenceMeasureXd random_measure(Rng& rng, Eigen::Index n)
{
  FieldXd w = random_field(rng, n, 0.05, 1.0);
  return ReferenceMeasureXd(w / w.sum());
}

/// Weights k_i / sum k with small integer k_i.
ReferenceMeasureXd rational_measure(Rng& rng, Eigen::Index n)
{
  FieldXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) { w[i] = static_cast<double>(uniform_index(rng, 1, 9)); }
  return ReferenceMeasureXd(w / w.sum());
}

std::string sci(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

class Recorder
{
public:
  Recorder(std::string suite, std::vector<CheckResult>& out) : suite_(std::move(suite)), out_(out) {}

  void add(const std::string& name, bool passed, const std::string& detail)
  {
    out_.push_back(CheckResult{suite_, name, passed, detail});
  }

  /// Records a check whose body may throw; an exception is a failure.
  void guarded(const std::string& name, const std::function<std::pair<bool, std::string>()>& body)
  {
    try {
      const auto [ok, detail] = body();
      add(name, ok, detail);
    } catch (const std::exception& e) {
      add(name, false, std::string("threw: ") + e.what());
    }
  }

private:
  std::string suite_;
  std::vector<CheckResult>& out_;
};

// hilbert ---------------------------------------------------------------------

void hilbert_suite(Recorder& rec, Fault fault)
{
  Rng rng(0x5eed0001);

  rec.guarded("projection idempotence", [&] {
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd f = random_field(rng, n, -5, 5);
      const FieldXd p = project_zero_mean(f, ref);
      worst = std::max(worst, (project_zero_mean(p, ref) - p).cwiseAbs().maxCoeff());
    }
    return std::pair{worst <= tol::kProjectionMean, "max |PPf - Pf| = " + sci(worst)};
  });

  rec.guarded("orthogonality to constants", [&] {
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd p = project_zero_mean(random_field(rng, n, -5, 5), ref);
      worst = std::max(worst, std::abs(inner_product(p, FieldXd::Ones(n), ref)));
    }
    return std::pair{worst <= tol::kProjectionMean, "max |<Pf, 1>| = " + sci(worst)};
  });

  rec.guarded("minimum-distance optimality", [&] {
    int violations = 0;
    for (int t = 0; t < 20; ++t) {
      const auto n = uniform_index(rng, 2, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd f = random_field(rng, n, -5, 5);
      const FieldXd p = project_zero_mean(f, ref);
      const double base = ref.norm(p - f);
      for (int k = 0; k < 1000; ++k) {
        const FieldXd w = project_zero_mean(random_field(rng, n, -1, 1), ref);
        const double step = uniform(rng, -1e-2, 1e-2);
        if (ref.norm(p + step * w - f) < base * (1 - 1e-14)) { ++violations; }
      }
    }
    return std::pair{violations == 0, std::to_string(violations) + " closer feasible points found"};
  });

  rec.guarded("work-dissipation equivalence", [&] {
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd g = random_field(rng, n, -3, 3);
      const double mu = uniform(rng, 0.1, 3);
      const FieldXd v = project_zero_mean(random_field(rng, n, -2, 2), ref);
      const FieldXd gap = v - g / mu;
      const double distance = mu / 2 * inner_product(gap, gap, ref);
      const double functional = mu / 2 * inner_product(v, v, ref) - inner_product(g, v, ref);
      const double constant = inner_product(g, g, ref) / (2 * mu);
      worst = std::max(worst, std::abs(distance - functional - constant));
    }
    return std::pair{worst <= tol::kBhpKkt, "max deviation from ||g||^2/(2 mu) = " + sci(worst)};
  });

  double oracle_err = 0, mean_err = 0, slack_err = 0, stationarity_err = 0, lambda_err = 0;
  bool feasible = true, eta_nonneg = true, monotone = true, sparsity_exact = true;
  int sparse_atoms = 0;
  std::string failure;
  try {
    for (int t = 0; t < 200; ++t) {
      const auto n = uniform_index(rng, 1, 6);
      const auto ref = rational_measure(rng, n);
      const double spread = t % 2 == 0 ? 3.0 : 20.0;
      const FieldXd g = random_field(rng, n, -spread, spread);
      const double mu = uniform(rng, 0.1, 3);

      auto sol = bhp_solve(g, ref, mu);
      if (fault == Fault::FlipBhpLambda) { sol = bhp_solution_at(g, mu, -sol.lambda_star); }

      oracle_err = std::max(oracle_err, (sol.v_star - oracle::bhp_brute_force(g, ref.weights(), mu)).cwiseAbs().maxCoeff());
      mean_err = std::max(mean_err, std::abs(ref.expectation(sol.v_star)));
      feasible = feasible && (sol.v_star.array() >= -1).all();
      eta_nonneg = eta_nonneg && (sol.eta.array() >= 0).all();
      slack_err = std::max(slack_err, (sol.eta.array() * (sol.v_star.array() + 1)).abs().maxCoeff());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!sol.active_mask[i]) {
          stationarity_err = std::max(stationarity_err,
                                      std::abs(g[i] - mu * sol.v_star[i] - sol.lambda_star + sol.eta[i]));
        }
      }
      lambda_err = std::max(lambda_err, std::abs(sol.lambda_star - bhp_lambda_bisect(g, ref, mu)));

      double previous = std::numeric_limits<double>::infinity();
      const double lo = g.minCoeff() - mu - 1;
      const double hi = g.maxCoeff() + mu + 1;
      for (int k = 0; k <= 64; ++k) {
        const double h = bhp_residual(g, ref, mu, lo + (hi - lo) * k / 64.0);
        monotone = monotone && h <= previous;
        previous = h;
      }

      const Mask sparse = sparsity_threshold(sol, g, mu);
      const FieldXd pi = policy_from_fluctuation(sol.v_star, ref);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (sparse[i]) {
          ++sparse_atoms;
          sparsity_exact = sparsity_exact && pi[i] == 0.0;
        }
      }
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const std::string fault_note = fault == Fault::FlipBhpLambda ? " [fault: lambda* sign flipped]" : "";
  if (!failure.empty()) {
    rec.add("BHP oracle equivalence", false, "threw: " + failure + fault_note);
    return;
  }
  rec.add("BHP oracle equivalence", oracle_err <= tol::kBhpOracle,
          "max |v* - brute force| = " + sci(oracle_err) + fault_note);
  rec.add("BHP KKT feasibility and mean zero", feasible && mean_err <= tol::kBhpKkt,
          "max |E[v*]| = " + sci(mean_err) + (feasible ? "" : ", v* < -1 found") + fault_note);
  rec.add("BHP complementary slackness", eta_nonneg && slack_err <= tol::kBhpKkt,
          "max |eta (v* + 1)| = " + sci(slack_err) + (eta_nonneg ? "" : ", negative eta") + fault_note);
  rec.add("BHP stationarity on free atoms", stationarity_err <= tol::kBhpKkt,
          "max |g - mu v* - lambda* + eta| = " + sci(stationarity_err) + fault_note);
  rec.add("h(lambda) monotone, bisection agrees", monotone && lambda_err <= tol::kLambdaCrossCheck,
          "max |lambda* - bisection| = " + sci(lambda_err) + (monotone ? "" : ", h increased") + fault_note);
  rec.add("exact sparsity", sparsity_exact && sparse_atoms > 0,
          std::to_string(sparse_atoms) + " thresholded atoms, all with pi = 0 exactly: "
              + (sparsity_exact ? "yes" : "no"));
}

// signal ----------------------------------------------------------------------

void signal_suite(Recorder& rec)
{
  Rng rng(0x5eed0002);

  rec.guarded("vanishing chemical potential", [&] {
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto g = uniform_index(rng, 1, 16);
      const FieldXd r = random_field(rng, g, 0, 1);
      const FieldXd a = normalize_advantages(r);
      worst = std::max(worst, (empirical_project(a) - a).cwiseAbs().maxCoeff());
    }
    return std::pair{worst <= tol::kVanishingPotential, "max |P(A) - A| = " + sci(worst)};
  });

  rec.guarded("normalize_advantages idempotent and centered", [&] {
    double worst = 0, worst_sum = 0;
    for (int t = 0; t < 1000; ++t) {
      const FieldXd r = random_field(rng, uniform_index(rng, 1, 16), 0, 1);
      const FieldXd a = normalize_advantages(r);
      worst = std::max(worst, (normalize_advantages(a) - a).cwiseAbs().maxCoeff());
      worst_sum = std::max(worst_sum, std::abs(a.sum()));
    }
    return std::pair{worst <= tol::kVanishingPotential && worst_sum <= tol::kAdvantageSum,
                     "max |N(N(r)) - N(r)| = " + sci(worst) + ", max |sum A| = " + sci(worst_sum)};
  });

  rec.guarded("escort with alpha = 0 is the identity", [&] {
    bool same = true;
    for (int t = 0; t < 200; ++t) {
      const auto g = uniform_index(rng, 1, 16);
      const FieldXd a = random_field(rng, g, -2, 2);
      const FieldXd rho = random_field(rng, g, 0.01, 5);
      same = same && escort_modulate(a, rho, 0.0) == a;
    }
    return std::pair{same, same ? "bitwise identical" : "differs"};
  });

  rec.guarded("shift invariance", [&] {
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
      const FieldXd r = random_field(rng, uniform_index(rng, 1, 16), 0, 1);
      const double c = uniform(rng, -10, 10);
      worst = std::max(worst, (normalize_advantages(FieldXd(r.array() + c)) - normalize_advantages(r)).cwiseAbs().maxCoeff());
    }
    return std::pair{worst <= 1e-12, "max |N(r + c) - N(r)| = " + sci(worst)};
  });
}

// objectives ------------------------------------------------------------------

void objectives_suite(Recorder& rec)
{
  Rng rng(0x5eed0003);

  rec.guarded("constant curvature", [&] {
    double worst = 0;
    for (double mu : {0.1, 0.5, 2.0}) {
      for (int ia = 0; ia <= 20; ++ia) {
        const double a = -5 + 0.5 * ia;
        for (int ir = 0; ir <= 49; ++ir) {
          const double rho = 0.1 + 0.1 * ir;
          const double c = second_difference([&](double x) { return gopo_sample_loss(a, x, mu); }, rho);
          worst = std::max(worst, std::abs(c - mu));
        }
      }
    }
    return std::pair{worst < tol::kCurvatureSpread, "max |curvature - mu| = " + sci(worst)};
  });

  rec.guarded("structural decoupling", [&] {
    bool same = true;
    for (int t = 0; t < 200; ++t) {
      const auto g = uniform_index(rng, 1, 12);
      const FieldXd rho = random_field(rng, g, 0.1, 4);
      const double mu = uniform(rng, 0.05, 3);
      const auto r1 = gopo_loss(GroupBatchXd::from_ratios(random_field(rng, g, -5, 5), rho), mu, 0.0);
      const auto r2 = gopo_loss(GroupBatchXd::from_ratios(random_field(rng, g, -5, 5), rho), mu, 0.0);
      same = same && r1.curvature_rho == r2.curvature_rho && (r1.curvature_rho.array() == mu).all();
    }
    return std::pair{same, same ? "curvature bitwise independent of A" : "curvature moved with A"};
  });

  rec.guarded("non-saturating gradient", [&] {
    double worst = 0;
    bool bounded_below = true;
    for (int t = 0; t < 1000; ++t) {
      const double a = uniform(rng, -5, 5);
      const double mu = uniform(rng, 0.05, 3);
      const double rho = uniform(rng, 0.01, 6);
      const double rho_star = 1 + a / mu;
      const double grad = std::abs(gopo_sample_grad(a, rho, mu));
      const double expected = mu * std::abs(rho - rho_star);
      worst = std::max(worst, std::abs(grad - expected) / std::max(1.0, expected));
      const double delta = std::abs(rho - rho_star) * 0.999;
      bounded_below = bounded_below && grad >= mu * delta;
    }
    return std::pair{worst <= 1e-12 && bounded_below, "max rel |grad - mu |rho - rho*|| = " + sci(worst)};
  });

  rec.guarded("dead-zone gate", [&] {
    const auto report = bounded_gopo_loss(GroupBatchXd::from_ratios(FieldXd::Constant(1, -5.0), FieldXd::Constant(1, 1e-9)),
                                          0.5, 0.0);
    const bool ok = !report.gate[0] && report.grad_rho[0] == 0.0;
    return std::pair{ok, "rho = 1e-9, A = -5: gate " + std::string(report.gate[0] ? "open" : "closed")};
  });

  rec.guarded("clip plateaus vs GOPO restoring force", [&] {
    bool ok = true;
    for (int k = 0; k <= 70; ++k) {
      const double rho = 1.5 + 0.05 * k;
      const auto batch = GroupBatchXd::from_ratios(FieldXd::Ones(1), FieldXd::Constant(1, rho));
      const auto grpo = grpo_loss(batch, 0.2, 0.0);
      const auto gopo = gopo_loss(batch, 0.5, 0.0);
      const double rho_star = 1 + 1 / 0.5;
      ok = ok && grpo.grad_rho[0] == 0.0
           && (rho == rho_star || std::abs(gopo.grad_rho[0]) >= 0.5 * std::abs(rho - rho_star) * (1 - 1e-12));
    }
    return std::pair{ok, "GRPO flat on rho in [1.5, 5], GOPO proportional to distance"};
  });

  rec.guarded("DPO saturation bound", [&] {
    bool bounded = true, decreasing = true;
    double worst_oracle = 0;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 100; ++k) {
      const double m = 0.5 * k;
      const double pos = dpo_grad_magnitude(m, 1.0);
      const double neg = dpo_grad_magnitude(-m, 1.0);
      bounded = bounded && pos <= 0.25 && neg <= 0.25;
      decreasing = decreasing && pos <= previous && pos == neg;
      previous = pos;
      // Evaluated on the negative side, where 1 - sigma does not cancel.
      const double slope = oracle::logistic_slope(-m);
      worst_oracle = std::max(worst_oracle, std::abs(neg - slope) / slope);
    }
    return std::pair{bounded && decreasing && worst_oracle < 1e-9,
                     "<= beta/4, decreasing in |m|, rel err vs logistic " + sci(worst_oracle)};
  });

  rec.guarded("finite-difference gradients", [&] {
    double worst = 0;
    int checked = 0;
    for (int t = 0; t < 300; ++t) {
      const auto g = uniform_index(rng, 1, 8);
      const LossKind kind = t % 3 == 0 ? LossKind::Gopo : (t % 3 == 1 ? LossKind::GopoBhp : LossKind::Grpo);
      LossParams params{uniform(rng, 0.1, 2), t % 2 == 0 ? 0.0 : 0.5, 0.2, t % 4 == 0 ? 0.1 : 0.0};
      const auto batch = GroupBatchXd::from_ratios(random_field(rng, g, -2, 2), random_field(rng, g, 0.3, 2.5));
      try {
        worst = std::max(worst, finite_diff_check(kind, batch, params));
        ++checked;
      } catch (const NonSmoothPoint&) {
        // Reported by design; the next instance is drawn instead.
      }
    }
    return std::pair{worst < tol::kFdGradient && checked > 200,
                     std::to_string(checked) + " batches, max error " + sci(worst)};
  });

  rec.guarded("non-smooth batches are reported", [&] {
    const auto batch = GroupBatchXd::from_ratios(FieldXd::Ones(1), FieldXd::Constant(1, 1.2));
    try {
      finite_diff_check(LossKind::Grpo, batch, LossParams{0.5, 0, 0.2, 0});
    } catch (const NonSmoothPoint&) {
      return std::pair{true, std::string("rho on the clip edge raised NonSmoothPoint")};
    }
    return std::pair{false, std::string("clip edge was not reported")};
  });
}

// dynamics --------------------------------------------------------------------

void dynamics_suite(Recorder& rec)
{
  Rng rng(0x5eed0004);

  rec.guarded("linear contraction rate", [&] {
    double worst_fit = 0, worst_step = 0;
    for (int t = 0; t < 100; ++t) {
      const double a = uniform(rng, -5, 5);
      const double mu = uniform(rng, 0.1, 3);
      const double step = uniform(rng, 0.01, 1.99) / mu;
      const double rho_star = 1 + a / mu;
      const double rho0 = rho_star + (t % 2 == 0 ? 1 : -1) * uniform(rng, 0.5, 2);
      const double factor = std::abs(1 - step * mu);
      const int n = std::clamp(static_cast<int>(std::log(1e-6) / std::log(factor)), 1, 60) + 1;
      const auto traj = ratio_gd_trajectory(rho0, a, mu, step, n);
      for (std::size_t k = 0; k + 1 < traj.rho_steps.size(); ++k) {
        worst_step = std::max(worst_step, std::abs((traj.rho_steps[k + 1] - rho_star)
                                                   - (1 - step * mu) * (traj.rho_steps[k] - rho_star)));
      }
      worst_fit = std::max(worst_fit, std::abs(fit_contraction_rate(traj) - factor) / factor);
    }
    return std::pair{worst_fit < tol::kRateFit && worst_step <= tol::kContraction,
                     "max rel rate error " + sci(worst_fit) + ", max step identity error " + sci(worst_step)};
  });

  rec.guarded("one-step convergence at step = 1/mu", [&] {
    bool exact = true;
    for (double mu : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      for (double a : {-2.0, -0.5, 0.0, 0.5, 3.0}) {
        const auto traj = ratio_gd_trajectory(3.0, a, mu, 1 / mu, 3);
        exact = exact && traj.rho_steps[1] == traj.rho_star && traj.contraction == 0.0;
      }
    }
    return std::pair{exact, exact ? "rho_1 == rho* exactly" : "residual error after one step"};
  });

  rec.guarded("rate independent of advantage", [&] {
    bool same = true;
    double spread = 0;
    for (int t = 0; t < 20; ++t) {
      const double mu = uniform(rng, 0.1, 3);
      const double step = uniform(rng, 0.05, 0.95) / mu;
      const double reference = ratio_gd_trajectory(1.0, -5.0, mu, step, 5).contraction;
      const int n = std::clamp(static_cast<int>(std::log(1e-6) / std::log(reference)), 1, 60) + 1;
      for (double a : {-5.0, -1.0, 0.0, 1.0, 5.0}) {
        const auto traj = ratio_gd_trajectory(1.0 + a / mu + 1.0, a, mu, step, n);
        same = same && traj.contraction == reference;
        spread = std::max(spread, std::abs(fit_contraction_rate(traj) - reference) / reference);
      }
    }
    return std::pair{same && spread < tol::kRateFit, "max rel spread of fitted rates " + sci(spread)};
  });

  rec.guarded("TV bounded by chi2", [&] {
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 1000; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd raw = random_field(rng, n, 0, 1);
      const FieldXd pi = raw / raw.sum();
      worst = std::max(worst, tv_distance(pi, ref) - 0.5 * std::sqrt(2 * chi2_divergence(pi, ref)));
    }
    const auto ref = ReferenceMeasureXd::uniform(2);
    double equality_gap = 0;
    for (double d : {0.1, 0.25, 0.4}) {
      const FieldXd pi = (FieldXd(2) << 0.5 + d, 0.5 - d).finished();
      equality_gap = std::max(equality_gap, std::abs(tv_distance(pi, ref) - 0.5 * std::sqrt(2 * chi2_divergence(pi, ref))));
    }
    return std::pair{worst <= tol::kTvBound && equality_gap <= 1e-15,
                     "max tv - bound = " + sci(worst) + ", two-point gap " + sci(equality_gap)};
  });

  rec.guarded("chi2 equals half the squared norm", [&] {
    double worst = 0;
    for (int t = 0; t < 500; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd raw = random_field(rng, n, 0, 1);
      const FieldXd pi = raw / raw.sum();
      const FieldXd v = fluctuation_from_policy(pi, ref);
      worst = std::max(worst, std::abs(chi2_divergence(pi, ref) - 0.5 * inner_product(v, v, ref)));
    }
    return std::pair{worst <= tol::kChi2Consistency, "max deviation " + sci(worst)};
  });

  rec.guarded("chi2-constrained duality", [&] {
    double worst_form = 0;
    int beaten = 0;
    for (int t = 0; t < 20; ++t) {
      const auto n = uniform_index(rng, 1, 8);
      const auto ref = random_measure(rng, n);
      const FieldXd g = random_field(rng, n, -3, 3);
      const double radius = uniform(rng, 0.1, 4);
      const auto best = chi2_constrained_argmax(g, ref, radius);
      worst_form = std::max(worst_form, (best.v - g / best.implied_mu).cwiseAbs().maxCoeff());
      const double value = inner_product(g, best.v, ref);
      for (int k = 0; k < 1000; ++k) {
        FieldXd w = random_field(rng, n, -1, 1);
        w *= std::sqrt(radius) / ref.norm(w);
        if (inner_product(g, w, ref) > value + 1e-12) { ++beaten; }
      }
    }
    return std::pair{worst_form <= tol::kDuality && beaten == 0,
                     "max |v* - g/mu| = " + sci(worst_form) + ", " + std::to_string(beaten) + " competitors won"};
  });

  rec.guarded("log-ratio approximation bounds", [&] {
    FieldXd grid(199);
    for (int k = 0; k < 199; ++k) { grid[k] = -0.99 + 0.01 * k; }
    bool ok = true;
    for (const auto& e : log_ratio_error_check(grid)) { ok = ok && e.holds; }
    for (int k = 0; k < 199; ++k) {
      for (const auto& e : log_ratio_error_check(FieldXd::Constant(1, grid[k]))) { ok = ok && e.holds; }
    }
    return std::pair{ok, "grid [-0.99, 0.99] step 0.01, pointwise and sup-norm"};
  });
}

// trainer ---------------------------------------------------------------------

SyntheticTask three_arm_task()
{
  SyntheticTask task;
  task.reward_table = (Eigen::MatrixXd(1, 3) << 1.0, 0.5, 0.0).finished();
  return task;
}

bool same_trace(const std::vector<TraceRecord>& a, const std::vector<TraceRecord>& b)
{
  if (a.size() != b.size()) { return false; }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.step != y.step || x.mean_reward != y.mean_reward || x.loss != y.loss || x.grad_norm != y.grad_norm
        || x.entropy != y.entropy || x.chi2_vs_anchor != y.chi2_vs_anchor || x.tv_vs_anchor != y.tv_vs_anchor
        || x.best_arm_prob != y.best_arm_prob) {
      return false;
    }
  }
  return true;
}

void trainer_suite(Recorder& rec)
{
  Rng rng(0x5eed0005);

  TrainConfig config;
  config.iterations = 40;
  config.inner_epochs = 4;

  rec.guarded("on-policy anchor", [&] {
    double worst = 0;
    const auto result = train_run(three_arm_task(), config, [&](const InnerStep& s) {
      if (s.epoch != 0) { return; }
      for (const auto& g : s.groups) { worst = std::max(worst, (g.batch.ratios.array() - 1).abs().maxCoeff()); }
    });
    return std::pair{worst <= tol::kAnchorRatio, "max |rho - 1| at first inner step " + sci(worst)};
  });

  rec.guarded("TV/chi2 guarantee along training", [&] {
    double worst = -std::numeric_limits<double>::infinity();
    for (LossKind kind : {LossKind::Gopo, LossKind::GopoBhp, LossKind::Grpo}) {
      TrainConfig c = config;
      c.loss_kind = kind;
      for (const auto& r : train_run(three_arm_task(), c).trace) {
        worst = std::max(worst, r.tv_vs_anchor - 0.5 * std::sqrt(2 * r.chi2_vs_anchor));
      }
    }
    return std::pair{worst <= tol::kTvBound, "max tv - sqrt(2 chi2)/2 = " + sci(worst)};
  });

  rec.guarded("determinism", [&] {
    const auto a = train_run(three_arm_task(), config).trace;
    const auto b = train_run(three_arm_task(), config).trace;
    const bool same = same_trace(a, b);
    return std::pair{same, same ? "bitwise identical traces" : "traces differ"};
  });

  rec.guarded("logit gradient vs finite differences", [&] {
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
      SyntheticTask task;
      task.reward_table = Eigen::MatrixXd::Random(2, 4);
      const SoftmaxPolicy anchor(Eigen::MatrixXd(Eigen::MatrixXd::Random(2, 4)));
      SoftmaxPolicy policy(Eigen::MatrixXd(anchor.logits() + 0.2 * Eigen::MatrixXd::Random(2, 4)));
      std::vector<SampledGroup> groups;
      for (Eigen::Index c = 0; c < 2; ++c) {
        RngStream stream(static_cast<std::int64_t>(rng()), c, 0);
        groups.push_back(sample_group(anchor, task, c, 6, stream));
      }
      TrainConfig c = config;
      c.alpha = 0;
      const Eigen::MatrixXd analytic = evaluate_logit_objective(policy, groups, c).gradient;
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < policy.logits().size(); ++i) {
        SoftmaxPolicy up = policy, down = policy;
        up.logits().data()[i] += h;
        down.logits().data()[i] -= h;
        const double numeric =
            (evaluate_logit_objective(up, groups, c).value - evaluate_logit_objective(down, groups, c).value) / (2 * h);
        worst = std::max(worst, std::abs(numeric - analytic.data()[i]));
      }
    }
    return std::pair{worst <= tol::kLogitGradient, "max |analytic - FD| = " + sci(worst)};
  });

  rec.guarded("monotone suppression under the bounded loss", [&] {
    SyntheticTask task;
    task.reward_table = (Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished();
    TrainConfig c = config;
    c.loss_kind = LossKind::GopoBhp;
    c.iterations = 10;
    c.inner_epochs = 30;
    bool monotone = true;
    int observed = 0;
    int last_iteration = -1;
    double previous = 0;
    train_run(task, c, [&](const InnerStep& s) {
      const auto& g = s.groups.front();
      for (std::size_t i = 0; i < g.actions.size(); ++i) {
        if (g.actions[i] != 1 || g.batch.advantages[static_cast<Eigen::Index>(i)] >= 0) { continue; }
        const double rho = g.batch.ratios[static_cast<Eigen::Index>(i)];
        if (s.iteration == last_iteration) { monotone = monotone && rho <= previous; }
        last_iteration = s.iteration;
        previous = rho;
        ++observed;
        break;
      }
    });
    return std::pair{monotone && observed > 0, std::to_string(observed) + " losing-arm ratios observed"};
  });
}

}  // namespace

const std::vector<std::string>& suite_names()
{
  static const std::vector<std::string> names{"hilbert", "signal", "objectives", "dynamics", "trainer"};
  return names;
}

std::vector<CheckResult> run_checks(std::string_view suite, Fault fault)
{
  const auto& names = suite_names();
  if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
    throw std::invalid_argument("unknown suite '" + std::string(suite) + "'");
  }
  std::vector<CheckResult> out;
  const auto wanted = [&](std::string_view name) { return suite == "all" || suite == name; };
  if (wanted("hilbert")) {
    Recorder rec("hilbert", out);
    hilbert_suite(rec, fault);
  }
  if (wanted("signal")) {
    Recorder rec("signal", out);
    signal_suite(rec);
  }
  if (wanted("objectives")) {
    Recorder rec("objectives", out);
    objectives_suite(rec);
  }
  if (wanted("dynamics")) {
    Recorder rec("dynamics", out);
    dynamics_suite(rec);
  }
  if (wanted("trainer")) {
    Recorder rec("trainer", out);
    trainer_suite(rec);
  }
  return out;
}

}  // namespace gopo
