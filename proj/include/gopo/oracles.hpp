#pragma once

/**
 * @file
 * @brief Brute-force reference solvers used to cross-check the library.
 *
 * Nothing here shares code paths with the solvers it checks.
 */

#include <Eigen/Core>

namespace gopo::oracle {

/**
 * argmin sum_y w(y) (v(y) - g(y)/mu)^2 over {sum w v = 0, v >= -1}, found by
 * enumerating every set of atoms pinned at -1, solving the equality-constrained
 * KKT system of the remaining atoms, and keeping the best feasible candidate.
 * Exponential in the support size; intended for n <= 12.
 */
Eigen::VectorXd bhp_brute_force(const Eigen::VectorXd& g, const Eigen::VectorXd& weights, double mu);

/// sigma(m) (1 - sigma(m)) from the logistic function directly.
double logistic_slope(double margin);

}  // namespace gopo::oracle
