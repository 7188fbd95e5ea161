#pragma once

/**
 * @file
 * @brief On-policy anchored group training of tabular softmax policies on
 * synthetic bandit tasks.
 *
 * Each iteration freezes the current policy as the anchor pi_k, samples one
 * group per context from it, then takes `inner_epochs` plain gradient steps on
 * the selected loss with rho = exp(log pi_theta - log pi_k) recomputed from the
 * live logits.
 */

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gopo/objectives.hpp"
#include "gopo/signal.hpp"

namespace gopo {

/// Row-wise softmax over a (contexts x actions) logit table.
class SoftmaxPolicy
{
public:
  SoftmaxPolicy(Eigen::Index contexts, Eigen::Index actions);
  explicit SoftmaxPolicy(Eigen::MatrixXd logits);

  Eigen::Index contexts() const noexcept { return logits_.rows(); }
  Eigen::Index actions() const noexcept { return logits_.cols(); }

  const Eigen::MatrixXd& logits() const noexcept { return logits_; }
  Eigen::MatrixXd& logits() noexcept { return logits_; }

  Eigen::VectorXd probabilities(Eigen::Index context) const;
  Eigen::VectorXd log_probabilities(Eigen::Index context) const;

private:
  Eigen::MatrixXd logits_;
};

/// Mean over contexts of the row entropy, in nats.
double policy_entropy(const SoftmaxPolicy& policy);

enum class TaskKind { Bandit, NoisyBandit };

struct SyntheticTask
{
  TaskKind kind = TaskKind::Bandit;
  /// contexts x actions expected rewards.
  Eigen::MatrixXd reward_table;
  /// Additive Gaussian reward noise (noisy-bandit only).
  double noise_std = 0.0;

  Eigen::Index contexts() const noexcept { return reward_table.rows(); }
  Eigen::Index actions() const noexcept { return reward_table.cols(); }
  Eigen::Index best_action(Eigen::Index context) const;

  /// Throws ConfigError on an empty or non-finite table or negative noise.
  void validate() const;
};

struct TrainConfig
{
  double mu = 0.5;
  double alpha = 0.0;
  double lr = 0.1;
  int group_size = 6;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  int iterations = 200;
  int inner_epochs = 1;
  std::int64_t seed = 42;
  LossKind loss_kind = LossKind::Gopo;
  /// Standardize advantages by the group std (clipped baseline only).
  bool std_normalize = false;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  LossParams loss_params() const { return {mu, alpha, clip_eps, kl_beta}; }
};

struct TraceRecord
{
  int step = 0;
  double mean_reward = 0;
  double loss = 0;
  double grad_norm = 0;
  double entropy = 0;
  double chi2_vs_anchor = 0;
  double tv_vs_anchor = 0;
  double best_arm_prob = 0;

  // Gate diagnostics at the last inner step; not part of the CSV trace.
  int gate_closed = 0;
  int nonzero_advantages = 0;
};

/// Deterministic stream keyed by (seed, context, iteration).
class RngStream
{
public:
  RngStream(std::int64_t seed, Eigen::Index context, int iteration);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

private:
  std::mt19937_64 engine_;
};

struct SampledGroup
{
  Eigen::Index context = 0;
  std::vector<Eigen::Index> actions;
  GroupBatchXd batch;
};

/// Draws G i.i.d. actions from the policy row, scores them and centers the
/// rewards (standardizes them when `standardize`). rho = 1 at sampling time.
SampledGroup sample_group(const SoftmaxPolicy& policy, const SyntheticTask& task, Eigen::Index context,
                          int group_size, RngStream& rng, bool standardize = false);

/// Objective value and logit gradient for frozen groups.
struct LogitObjective
{
  double value = 0;
  Eigen::MatrixXd gradient;
  std::vector<LossReportXd> reports;
};

/**
 * Mean over the groups of the selected loss, with its gradient in logit
 * space: d rho_i / d z_{c,a} = rho_i (1[a = a_i] - p_c(a)). Each group's
 * batch is refreshed with the current log-probabilities.
 */
LogitObjective evaluate_logit_objective(const SoftmaxPolicy& policy, std::vector<SampledGroup>& groups,
                                        const TrainConfig& config);

/// Observer for each inner step, called before the update of that step.
struct InnerStep
{
  int iteration;
  int epoch;
  const std::vector<SampledGroup>& groups;
  const LogitObjective& objective;
};
using InnerStepObserver = std::function<void(const InnerStep&)>;

struct TrainResult
{
  std::vector<TraceRecord> trace;
  /// Non-finite logits stopped training; the last record is the diagnostic.
  bool halted = false;
  std::string diagnostic;
};

TrainResult train_run(const SyntheticTask& task, const TrainConfig& config, const InnerStepObserver& observer = {});

/// Same, starting from the given logits.
TrainResult train_run(const SyntheticTask& task, const TrainConfig& config, SoftmaxPolicy policy,
                      const InnerStepObserver& observer = {});

}  // namespace gopo
