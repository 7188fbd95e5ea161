#include "doctest.h"

#include "gopo/trainer.hpp"
#include "test_support.hpp"

using namespace gopo;

namespace {

SyntheticTask bandit(std::initializer_list<double> rewards)
{
  SyntheticTask task;
  task.reward_table = gopo::test::vec(rewards).transpose();
  return task;
}

}  // namespace

TEST_CASE("softmax policy")
{
  const SoftmaxPolicy uniform(2, 4);
  CHECK(uniform.probabilities(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(policy_entropy(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Eigen::MatrixXd logits(1, 2);
  logits << std::log(3.0), 0.0;
  CHECK(policy_entropy(SoftmaxPolicy(logits)) == doctest::Approx(0.5623).epsilon(1e-4));

  logits << 1000.0, 0.0;
  const SoftmaxPolicy peaked(logits);
  CHECK(peaked.probabilities(0)[0] == 1.0);
  CHECK(peaked.log_probabilities(0).allFinite());
  CHECK(policy_entropy(peaked) == doctest::Approx(0.0));

  CHECK_THROWS(SoftmaxPolicy(0, 3));
}

TEST_CASE("rng streams are keyed by seed, context and iteration")
{
  RngStream a(42, 0, 0), b(42, 0, 0), c(42, 1, 0), d(42, 0, 1);
  const double x = a.uniform();
  CHECK(x == b.uniform());
  CHECK(x != c.uniform());
  CHECK(x != d.uniform());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(std::isfinite(a.normal()));
  }
}

TEST_CASE("group sampling")
{
  const auto task = bandit({1, 0.5, 0});

  SUBCASE("uniform policy is reproducible and centered")
  {
    RngStream r1(42, 0, 0), r2(42, 0, 0);
    const auto g1 = sample_group(SoftmaxPolicy(1, 3), task, 0, 6, r1);
    const auto g2 = sample_group(SoftmaxPolicy(1, 3), task, 0, 6, r2);
    CHECK(g1.actions == g2.actions);
    CHECK(g1.batch.advantages == g2.batch.advantages);
    CHECK(std::abs(g1.batch.advantages.sum()) <= 1e-10);
    CHECK(g1.batch.ratios == FieldXd::Ones(6));
  }
  SUBCASE("deterministic policy")
  {
    Eigen::MatrixXd logits(1, 3);
    logits << 0, 800, 0;
    RngStream rng(1, 0, 0);
    const auto g = sample_group(SoftmaxPolicy(logits), task, 0, 6, rng);
    for (auto a : g.actions) { CHECK(a == 1); }
    CHECK(g.batch.advantages.isZero(0));
  }
  SUBCASE("single sample")
  {
    RngStream rng(1, 0, 0);
    CHECK(sample_group(SoftmaxPolicy(1, 3), task, 0, 1, rng).batch.advantages == gopo::test::vec({0}));
  }
  SUBCASE("errors")
  {
    RngStream rng(1, 0, 0);
    CHECK_THROWS_AS(sample_group(SoftmaxPolicy(1, 3), task, 1, 6, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_group(SoftmaxPolicy(1, 3), task, 0, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_group(SoftmaxPolicy(1, 2), task, 0, 6, rng), DimensionMismatch);
  }
}

TEST_CASE("config validation names the field")
{
  const auto expect_field = [](TrainConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field() == field);
    }
  };
  TrainConfig base;
  CHECK_NOTHROW(base.validate());
  auto c = base;
  c.mu = 0;
  expect_field(c, "mu");
  c = base;
  c.lr = -1;
  expect_field(c, "lr");
  c = base;
  c.group_size = 0;
  expect_field(c, "group_size");
  c = base;
  c.clip_eps = 1.0;
  expect_field(c, "clip_eps");
  c = base;
  c.kl_beta = -0.1;
  expect_field(c, "kl_beta");
  c = base;
  c.inner_epochs = 0;
  expect_field(c, "inner_epochs");
  c = base;
  c.iterations = -1;
  expect_field(c, "iterations");

  SyntheticTask task = bandit({1, 0});
  task.noise_std = -1;
  CHECK_THROWS_AS(task.validate(), ConfigError);
}

TEST_CASE("zero-reward task leaves the logits untouched")
{
  TrainConfig c;
  c.iterations = 20;
  c.inner_epochs = 3;
  const auto result = train_run(bandit({0, 0, 0}), c);
  for (const auto& r : result.trace) {
    CHECK(r.grad_norm == 0.0);
    CHECK(r.entropy == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    CHECK(r.chi2_vs_anchor == 0.0);
  }
}

TEST_CASE("three-arm bandit converges under the quadratic loss")
{
  TrainConfig c;
  c.mu = 0.5;
  c.lr = 0.1;
  c.group_size = 6;
  c.iterations = 200;
  c.seed = 42;
  c.inner_epochs = 16;
  const auto result = train_run(bandit({1, 0.5, 0}), c);
  REQUIRE(result.trace.size() == 200);
  CHECK_FALSE(result.halted);
  CHECK(result.trace.back().best_arm_prob > 0.9);
  for (const auto& r : result.trace) {
    CHECK(r.tv_vs_anchor <= 0.5 * std::sqrt(2 * r.chi2_vs_anchor) + 1e-12);
  }
}

TEST_CASE("clipped baseline converges too")
{
  TrainConfig c;
  c.loss_kind = LossKind::Grpo;
  c.std_normalize = true;
  c.inner_epochs = 16;
  const auto result = train_run(bandit({1, 0.5, 0}), c);
  CHECK(result.trace.back().best_arm_prob > 0.9);
}

TEST_CASE("identical configs give identical traces")
{
  TrainConfig c;
  c.iterations = 50;
  c.inner_epochs = 4;
  SyntheticTask noisy = bandit({1, 0.5, 0});
  noisy.kind = TaskKind::NoisyBandit;
  noisy.noise_std = 0.3;
  const auto a = train_run(noisy, c).trace;
  const auto b = train_run(noisy, c).trace;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].loss == b[i].loss);
    CHECK(a[i].grad_norm == b[i].grad_norm);
    CHECK(a[i].mean_reward == b[i].mean_reward);
    CHECK(a[i].best_arm_prob == b[i].best_arm_prob);
  }
  c.seed = 43;
  CHECK(train_run(noisy, c).trace.back().loss != a.back().loss);
}

TEST_CASE("ratios start at one for every iteration")
{
  TrainConfig c;
  c.iterations = 10;
  c.inner_epochs = 5;
  int first_steps = 0;
  train_run(bandit({1, 0.5, 0}), c, [&](const InnerStep& s) {
    if (s.epoch == 0) {
      ++first_steps;
      for (const auto& g : s.groups) { CHECK(g.batch.ratios == FieldXd::Ones(c.group_size)); }
    }
  });
  CHECK(first_steps == 10);
}

TEST_CASE("empty run")
{
  TrainConfig c;
  c.iterations = 0;
  CHECK(train_run(bandit({1, 0}), c).trace.empty());
}

TEST_CASE("runaway learning rate halts with a diagnostic")
{
  TrainConfig c;
  c.lr = 1e308;
  c.iterations = 10;
  c.inner_epochs = 2;
  const auto result = train_run(bandit({1e10, 0}), c);
  CHECK(result.halted);
  CHECK(result.diagnostic.find("non-finite") != std::string::npos);
  CHECK(result.trace.size() < 10);
}
