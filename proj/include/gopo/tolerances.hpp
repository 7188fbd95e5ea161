#pragma once

// Every numerical tolerance and threshold used by the library, the check
// suites and the acceptance gate lives here.

namespace gopo::tol {

/// Reference weights must sum to one within this.
inline constexpr double kMeasureSum = 1e-12;
/// Mean of an orthogonal projection under the reference measure.
inline constexpr double kProjectionMean = 1e-12;
/// Mean-zero, slackness and stationarity checks on a bounded projection.
inline constexpr double kBhpKkt = 1e-10;
/// Agreement between the breakpoint scan and bisection on h(lambda).
inline constexpr double kLambdaCrossCheck = 1e-10;
/// Agreement with the brute-force constrained minimizer.
inline constexpr double kBhpOracle = 1e-6;

/// Group advantages sum to zero within this.
inline constexpr double kAdvantageSum = 1e-10;
/// Empirical projection acts as the identity on centered advantages.
inline constexpr double kVanishingPotential = 1e-15;
/// rho = exp(log_cur - log_ref) consistency.
inline constexpr double kRatioConsistency = 1e-12;
/// Added to the group standard deviation when standardizing advantages.
inline constexpr double kStdFloor = 1e-8;

/// Dead-zone gate: gradient flows only where rho > this.
inline constexpr double kRatioFloor = 1e-8;
/// Central finite-difference step for gradients.
inline constexpr double kFdStep = 1e-6;
/// Batches must sit this many FD steps away from a floor or clip kink.
inline constexpr double kFdBoundaryMargin = 10.0;
/// Max |analytic - finite difference| gradient error.
inline constexpr double kFdGradient = 1e-6;
/// Second-difference step used to measure curvature in rho.
inline constexpr double kCurvatureStep = 1e-3;
/// Allowed spread of the measured curvature around mu.
inline constexpr double kCurvatureSpread = 1e-5;

/// Per-step contraction identity of ratio-space gradient descent.
inline constexpr double kContraction = 1e-12;
/// Relative error of the fitted contraction rate.
inline constexpr double kRateFit = 1e-6;
/// Log-errors below this are skipped by the rate fit.
inline constexpr double kRateFitFloor = 1e-13;
/// chi2 constrained maximizer equals g / implied_mu within this.
inline constexpr double kDuality = 1e-12;
/// chi2 vs inner-product consistency.
inline constexpr double kChi2Consistency = 1e-12;
/// TV <= sqrt(2 chi2) / 2 is asserted with this slack.
inline constexpr double kTvBound = 1e-12;

/// Softmax rows sum to one within this.
inline constexpr double kSoftmaxSum = 1e-12;
/// On-policy anchoring: rho at the first inner step.
inline constexpr double kAnchorRatio = 1e-12;
/// Logit-space gradient vs finite differences through the pipeline.
inline constexpr double kLogitGradient = 1e-5;

}  // namespace gopo::tol
