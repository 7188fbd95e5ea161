#include "doctest.h"

#include <limits>
#include <sstream>

#include "gopo/io.hpp"
#include "test_support.hpp"

using namespace gopo;
using nlohmann::json;

namespace {

json base_config()
{
  return json::parse(R"({
    "task": {"kind": "bandit", "reward_table": [[1, 0.5, 0]], "noise_std": 0},
    "mu": 0.5, "alpha": 0, "lr": 0.1, "group_size": 6, "clip_eps": 0.2, "kl_beta": 0,
    "iterations": 200, "inner_epochs": 1, "seed": 42, "loss_kind": "gopo"
  })");
}

std::string field_of(const json& j)
{
  try {
    parse_experiment_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing")
{
  const auto cfg = parse_experiment_config(base_config());
  CHECK(cfg.task.actions() == 3);
  CHECK(cfg.task.reward_table(0, 1) == 0.5);
  CHECK(cfg.train.mu == 0.5);
  CHECK(cfg.train.group_size == 6);
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.train.loss_kind == LossKind::Gopo);
  CHECK_FALSE(cfg.train.std_normalize);
  CHECK(cfg.compare.empty());
}

TEST_CASE("every training scalar is required")
{
  for (const char* key : {"mu", "alpha", "lr", "group_size", "clip_eps", "kl_beta", "iterations", "inner_epochs",
                          "seed", "loss_kind", "task"}) {
    json j = base_config();
    j.erase(key);
    CHECK(field_of(j) == key);
  }
  json j = base_config();
  j["task"].erase("noise_std");
  CHECK(field_of(j) == "task.noise_std");
}

TEST_CASE("invalid fields are named")
{
  json j = base_config();
  j["loss_kind"] = "unknown";
  CHECK(field_of(j) == "loss_kind");

  j = base_config();
  j["mu"] = -1;
  CHECK(field_of(j) == "mu");

  j = base_config();
  j["group_size"] = 2.5;
  CHECK(field_of(j) == "group_size");

  j = base_config();
  j["lr"] = "fast";
  CHECK(field_of(j) == "lr");

  j = base_config();
  j["temperature"] = 1;
  CHECK(field_of(j) == "temperature");

  j = base_config();
  j["task"]["kind"] = "maze";
  CHECK(field_of(j) == "task.kind");

  j = base_config();
  j["task"]["reward_table"] = json::parse("[[1, 0], [1]]");
  CHECK(field_of(j) == "task.reward_table");

  j = base_config();
  j["task"]["actions"] = 4;
  CHECK(field_of(j) == "task.actions");

  j = base_config();
  j["compare"] = json::array({"gopo", "ppo"});
  CHECK(field_of(j) == "compare");

  j = base_config();
  j["std_normalize"] = 1;
  CHECK(field_of(j) == "std_normalize");
}

TEST_CASE("malformed json reports the location")
{
  try {
    parse_experiment_text("{\n  \"mu\": 0.5,\n  \"lr\": ,\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("config round trip")
{
  json j = base_config();
  j["std_normalize"] = true;
  j["compare"] = json::array({"gopo", "gopo-bhp", "grpo"});
  j["task"]["kind"] = "noisy-bandit";
  j["task"]["noise_std"] = 0.3;
  const auto cfg = parse_experiment_config(j);
  const auto again = parse_experiment_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(again.compare.size() == 3);
  CHECK(again.train.std_normalize);
  CHECK(again.task.kind == TaskKind::NoisyBandit);
}

TEST_CASE("manifest round trip")
{
  RunManifest m{parse_experiment_config(base_config()), std::string(kVersion), utc_timestamp()};
  const auto back = parse_manifest(json::parse(to_json(m).dump()));
  CHECK(back.version == m.version);
  CHECK(back.timestamp == m.timestamp);
  CHECK(to_json(back.config) == to_json(m.config));
  CHECK(m.timestamp.size() == 20);
  CHECK(m.timestamp.back() == 'Z');
}

TEST_CASE("shipped configs parse")
{
  for (const char* name : {"bandit3_gopo.json", "bandit3_compare.json", "bandit2_bhp.json", "noisy_contexts.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_experiment_config(gopo::test::config_path(name)));
  }
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"), std::runtime_error);
}

TEST_CASE("trace csv is exact")
{
  std::vector<TraceRecord> trace;
  for (int i = 0; i < 5; ++i) {
    TraceRecord r;
    r.step = i;
    r.mean_reward = 1.0 / 3.0 + i;
    r.loss = -0.1 * i;
    r.grad_norm = std::sqrt(2.0) * 1e-300;
    r.entropy = std::log(3.0);
    r.chi2_vs_anchor = 0.1 + 0.2;
    r.tv_vs_anchor = std::nextafter(0.25, 1.0);
    r.best_arm_prob = 0.9999999999999999;
    trace.push_back(r);
  }
  trace[2].loss = std::numeric_limits<double>::quiet_NaN();

  std::stringstream ss;
  write_trace_csv(ss, trace);
  const std::string text = ss.str();
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);

  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(back[i].step == trace[i].step);
    CHECK(back[i].mean_reward == trace[i].mean_reward);
    if (i == 2) {
      CHECK(std::isnan(back[i].loss));
    } else {
      CHECK(back[i].loss == trace[i].loss);
    }
    CHECK(back[i].grad_norm == trace[i].grad_norm);
    CHECK(back[i].entropy == trace[i].entropy);
    CHECK(back[i].chi2_vs_anchor == trace[i].chi2_vs_anchor);
    CHECK(back[i].tv_vs_anchor == trace[i].tv_vs_anchor);
    CHECK(back[i].best_arm_prob == trace[i].best_arm_prob);
  }
}

TEST_CASE("trace csv errors carry the line")
{
  std::stringstream bad_header("step,loss\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), ParseError);

  std::stringstream short_row(std::string(kTraceHeader) + "\n0,1,2,3,4,5,6,7\n1,2,3\n");
  try {
    read_trace_csv(short_row);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::stringstream junk(std::string(kTraceHeader) + "\n0,1,2,x,4,5,6,7\n");
  CHECK_THROWS_AS(read_trace_csv(junk), ParseError);
}

TEST_CASE("gate csv")
{
  TraceRecord r;
  r.step = 3;
  r.gate_closed = 2;
  r.nonzero_advantages = 5;
  std::stringstream ss;
  write_gate_csv(ss, {r});
  CHECK(ss.str() == "step,gate_closed,nonzero_advantages\n3,2,5\n");
}

TEST_CASE("doubles print with full precision")
{
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(9.0) == "9");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
