#include "gopo/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/LU>

namespace gopo::oracle {

Eigen::VectorXd bhp_brute_force(const Eigen::VectorXd& g, const Eigen::VectorXd& weights, double mu)
{
  const Eigen::Index n = g.size();
  if (n == 0 || n > 12 || weights.size() != n) { throw std::invalid_argument("bhp_brute_force: bad sizes"); }
  const Eigen::VectorXd target = g / mu;

  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  const unsigned full = (1u << n) - 1u;
  for (unsigned pinned = 0; pinned < full; ++pinned) {
    std::vector<Eigen::Index> free_atoms;
    double pinned_mass = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pinned & (1u << i)) {
        pinned_mass += weights[i];
      } else {
        free_atoms.push_back(i);
      }
    }
    const auto m = static_cast<Eigen::Index>(free_atoms.size());

    // Stationarity 2 w_i (v_i - u_i) + nu w_i = 0 and sum_free w_i v_i = pinned_mass.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double w = weights[free_atoms[static_cast<std::size_t>(k)]];
      kkt(k, k) = 2 * w;
      kkt(k, m) = w;
      kkt(m, k) = w;
      rhs[k] = 2 * w * target[free_atoms[static_cast<std::size_t>(k)]];
    }
    rhs[m] = pinned_mass;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, -1.0);
    bool feasible = true;
    for (Eigen::Index k = 0; k < m; ++k) {
      v[free_atoms[static_cast<std::size_t>(k)]] = sol[k];
      if (sol[k] < -1.0 - 1e-12) { feasible = false; }
    }
    if (!feasible) { continue; }
    const double cost = (weights.array() * (v - target).array().square()).sum();
    if (cost < best_cost) {
      best_cost = cost;
      best = v;
    }
  }
  return best;
}

double logistic_slope(double margin)
{
  const double s = 1.0 / (1.0 + std::exp(-margin));
  return s * (1.0 - s);
}

}  // namespace gopo::oracle
