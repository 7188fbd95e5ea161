#include "gopo/trainer.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gopo/dynamics.hpp"
#include "gopo/errors.hpp"

namespace gopo {

SoftmaxPolicy::SoftmaxPolicy(Eigen::Index contexts, Eigen::Index actions)
    : logits_(Eigen::MatrixXd::Zero(contexts, actions))
{
  if (contexts < 1 || actions < 1) { throw std::invalid_argument("SoftmaxPolicy: empty table"); }
}

SoftmaxPolicy::SoftmaxPolicy(Eigen::MatrixXd logits) : logits_(std::move(logits))
{
  if (logits_.rows() < 1 || logits_.cols() < 1) { throw std::invalid_argument("SoftmaxPolicy: empty table"); }
}

Eigen::VectorXd SoftmaxPolicy::log_probabilities(Eigen::Index context) const
{
  const Eigen::VectorXd row = logits_.row(context).transpose();
  const double top = row.maxCoeff();
  const double log_norm = top + std::log((row.array() - top).exp().sum());
  return (row.array() - log_norm).matrix();
}

Eigen::VectorXd SoftmaxPolicy::probabilities(Eigen::Index context) const
{
  const Eigen::VectorXd row = logits_.row(context).transpose();
  Eigen::VectorXd p = (row.array() - row.maxCoeff()).exp().matrix();
  return p / p.sum();
}

double policy_entropy(const SoftmaxPolicy& policy)
{
  double total = 0;
  for (Eigen::Index c = 0; c < policy.contexts(); ++c) {
    const Eigen::VectorXd p = policy.probabilities(c);
    const Eigen::VectorXd logp = policy.log_probabilities(c);
    double h = 0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
      if (p[a] > 0) { h -= p[a] * logp[a]; }
    }
    total += h;
  }
  return total / static_cast<double>(policy.contexts());
}

Eigen::Index SyntheticTask::best_action(Eigen::Index context) const
{
  Eigen::Index best = 0;
  reward_table.row(context).maxCoeff(&best);
  return best;
}

void SyntheticTask::validate() const
{
  if (reward_table.rows() < 1 || reward_table.cols() < 1) { throw ConfigError("task.reward_table", "must be non-empty"); }
  if (!reward_table.allFinite()) { throw ConfigError("task.reward_table", "entries must be finite"); }
  if (!(noise_std >= 0) || !std::isfinite(noise_std)) { throw ConfigError("task.noise_std", "must be >= 0"); }
}

void TrainConfig::validate() const
{
  const auto positive = [](double x) { return x > 0 && std::isfinite(x); };
  if (!positive(mu)) { throw ConfigError("mu", "must be > 0"); }
  if (!std::isfinite(alpha)) { throw ConfigError("alpha", "must be finite"); }
  if (!positive(lr)) { throw ConfigError("lr", "must be > 0"); }
  if (group_size < 1) { throw ConfigError("group_size", "must be >= 1"); }
  if (!(clip_eps > 0 && clip_eps < 1)) { throw ConfigError("clip_eps", "must lie in (0, 1)"); }
  if (!(kl_beta >= 0) || !std::isfinite(kl_beta)) { throw ConfigError("kl_beta", "must be >= 0"); }
  if (iterations < 0) { throw ConfigError("iterations", "must be >= 0"); }
  if (inner_epochs < 1) { throw ConfigError("inner_epochs", "must be >= 1"); }
}

RngStream::RngStream(std::int64_t seed, Eigen::Index context, int iteration)
{
  const auto s = static_cast<std::uint64_t>(seed);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(context), static_cast<std::uint32_t>(iteration)};
  engine_.seed(seq);
}

double RngStream::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal()
{
  // Box-Muller on our own uniforms keeps streams identical across standard libraries.
  double u1 = uniform();
  while (u1 <= 0) { u1 = uniform(); }
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SampledGroup sample_group(const SoftmaxPolicy& policy, const SyntheticTask& task, Eigen::Index context,
                          int group_size, RngStream& rng, bool standardize)
{
  if (context < 0 || context >= policy.contexts() || context >= task.contexts()) {
    throw std::out_of_range("sample_group: invalid context " + std::to_string(context));
  }
  if (group_size < 1) { throw std::invalid_argument("sample_group: group size must be >= 1"); }
  if (policy.actions() != task.actions()) {
    throw DimensionMismatch("sample_group: policy vs task actions", static_cast<std::size_t>(policy.actions()),
                            static_cast<std::size_t>(task.actions()));
  }

  const Eigen::VectorXd p = policy.probabilities(context);
  const Eigen::VectorXd logp = policy.log_probabilities(context);

  SampledGroup out;
  out.context = context;
  out.actions.reserve(static_cast<std::size_t>(group_size));
  Eigen::VectorXd rewards(group_size);
  Eigen::VectorXd log_ref(group_size);
  for (int i = 0; i < group_size; ++i) {
    const double u = rng.uniform();
    Eigen::Index a = p.size() - 1;
    double cumulative = 0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      cumulative += p[k];
      if (u < cumulative) {
        a = k;
        break;
      }
    }
    out.actions.push_back(a);
    double r = task.reward_table(context, a);
    if (task.kind == TaskKind::NoisyBandit && task.noise_std > 0) { r += task.noise_std * rng.normal(); }
    rewards[i] = r;
    log_ref[i] = logp[a];
  }
  out.batch = GroupBatchXd::sampled(rewards, log_ref, standardize);
  return out;
}

LogitObjective evaluate_logit_objective(const SoftmaxPolicy& policy, std::vector<SampledGroup>& groups,
                                        const TrainConfig& config)
{
  LogitObjective out;
  out.gradient = Eigen::MatrixXd::Zero(policy.contexts(), policy.actions());
  out.reports.reserve(groups.size());
  if (groups.empty()) { return out; }
  const double weight = 1.0 / static_cast<double>(groups.size());
  const LossParams params = config.loss_params();

  for (auto& group : groups) {
    const Eigen::VectorXd logp = policy.log_probabilities(group.context);
    const Eigen::VectorXd p = policy.probabilities(group.context);
    Eigen::VectorXd log_cur(static_cast<Eigen::Index>(group.actions.size()));
    for (std::size_t i = 0; i < group.actions.size(); ++i) {
      log_cur[static_cast<Eigen::Index>(i)] = logp[group.actions[i]];
    }
    group.batch.set_current(log_cur);

    LossReportXd report = evaluate_loss(config.loss_kind, group.batch, params);
    out.value += weight * report.value;
    auto row = out.gradient.row(group.context);
    for (std::size_t i = 0; i < group.actions.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      const double scale = weight * report.grad_rho[idx] * group.batch.ratios[idx];
      if (scale == 0) { continue; }
      row -= scale * p.transpose();
      row[group.actions[i]] += scale;
    }
    out.reports.push_back(std::move(report));
  }
  return out;
}

namespace {

void fill_policy_diagnostics(TraceRecord& rec, const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                             const SyntheticTask& task)
{
  const auto contexts = static_cast<double>(policy.contexts());
  rec.entropy = policy_entropy(policy);
  rec.chi2_vs_anchor = 0;
  rec.tv_vs_anchor = 0;
  rec.best_arm_prob = 0;
  for (Eigen::Index c = 0; c < policy.contexts(); ++c) {
    const Eigen::VectorXd p = policy.probabilities(c);
    const Eigen::VectorXd q = anchor.probabilities(c);
    if (!p.allFinite() || !q.allFinite() || (q.array() <= 0).any()) {
      rec.chi2_vs_anchor = rec.tv_vs_anchor = rec.best_arm_prob = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    // Renormalize against rounding so the measure invariant holds exactly enough.
    const ReferenceMeasureXd ref(q / q.sum());
    rec.chi2_vs_anchor += chi2_divergence(p, ref) / contexts;
    rec.tv_vs_anchor += tv_distance(p, ref) / contexts;
    rec.best_arm_prob += p[task.best_action(c)] / contexts;
  }
}

}  // namespace

TrainResult train_run(const SyntheticTask& task, const TrainConfig& config, const InnerStepObserver& observer)
{
  task.validate();
  return train_run(task, config, SoftmaxPolicy(task.contexts(), task.actions()), observer);
}

TrainResult train_run(const SyntheticTask& task, const TrainConfig& config, SoftmaxPolicy policy,
                      const InnerStepObserver& observer)
{
  task.validate();
  config.validate();
  if (policy.contexts() != task.contexts() || policy.actions() != task.actions()) {
    throw DimensionMismatch("train_run: policy vs task shape", static_cast<std::size_t>(policy.logits().size()),
                            static_cast<std::size_t>(task.reward_table.size()));
  }

  const bool standardize = config.std_normalize && config.loss_kind == LossKind::Grpo;
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(config.iterations));

  for (int it = 0; it < config.iterations; ++it) {
    const SoftmaxPolicy anchor = policy;

    std::vector<SampledGroup> groups;
    groups.reserve(static_cast<std::size_t>(task.contexts()));
    double reward_sum = 0;
    for (Eigen::Index c = 0; c < task.contexts(); ++c) {
      RngStream rng(config.seed, c, it);
      groups.push_back(sample_group(anchor, task, c, config.group_size, rng, standardize));
      reward_sum += groups.back().batch.rewards.sum();
    }

    TraceRecord rec;
    rec.step = it;
    rec.mean_reward = reward_sum / static_cast<double>(task.contexts() * config.group_size);

    for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
      const LogitObjective objective = evaluate_logit_objective(policy, groups, config);
      if (observer) { observer(InnerStep{it, epoch, groups, objective}); }
      policy.logits() -= config.lr * objective.gradient;

      if (epoch + 1 == config.inner_epochs) {
        rec.loss = objective.value;
        rec.grad_norm = objective.gradient.norm();
        rec.gate_closed = 0;
        rec.nonzero_advantages = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
          rec.gate_closed += static_cast<int>((!objective.reports[g].gate).count());
          rec.nonzero_advantages += static_cast<int>((groups[g].batch.advantages.array() != 0).count());
        }
      }
      if (!policy.logits().allFinite()) { break; }
    }

    fill_policy_diagnostics(rec, policy, anchor, task);
    result.trace.push_back(rec);
    if (!policy.logits().allFinite()) {
      result.halted = true;
      result.diagnostic = "non-finite logits after iteration " + std::to_string(it);
      break;
    }
  }
  return result;
}

}  // namespace gopo
