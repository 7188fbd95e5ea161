#include "doctest.h"

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "gopo/io.hpp"
#include "test_support.hpp"

using gopo::test::config_path;
using gopo::test::ScratchDir;

namespace {

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args)
{
  std::ostringstream out, err;
  const int code = gopo::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p)
{
  return gopo::read_text_file(p);
}

std::vector<gopo::TraceRecord> load_trace(const std::filesystem::path& p)
{
  std::ifstream in(p);
  return gopo::read_trace_csv(in);
}

const char* const kSmallConfig = R"({
  "task": {"kind": "bandit", "reward_table": [[1, 0.5, 0]], "noise_std": 0},
  "mu": 0.5, "alpha": 0, "lr": 0.1, "group_size": 6, "clip_eps": 0.2, "kl_beta": 0,
  "iterations": 30, "inner_epochs": 4, "seed": 42, "loss_kind": "gopo"
})";

}  // namespace

TEST_CASE("usage errors")
{
  CHECK(cli({}).code == gopo::cli::kUsage);
  CHECK(cli({"frobnicate"}).code == gopo::cli::kUsage);
  CHECK(cli({"train"}).code == gopo::cli::kUsage);
  CHECK(cli({"train", "--config", "/nonexistent.json", "--out", "x.csv"}).code == gopo::cli::kUsage);
  CHECK(cli({"--help"}).code == gopo::cli::kOk);
}

TEST_CASE("project in bounded mode")
{
  const auto r = cli({"project", "--config", config_path("project_bhp.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("lambda*: 9\n") != std::string::npos);
  CHECK(r.out.find("v*: [1, -1]\n") != std::string::npos);
  CHECK(r.out.find("active: [1]\n") != std::string::npos);
  CHECK(r.out.find("pi: [1, 0]\n") != std::string::npos);
}

TEST_CASE("project in linear mode")
{
  ScratchDir dir("project");
  const auto input = dir.write("in.json", R"({"weights": [0.25, 0.25, 0.5], "field": [2, 2, 2], "mode": "linear"})");
  const auto r = cli({"project", "--config", input.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("v*: [0, 0, 0]\n") != std::string::npos);

  const auto flag = cli({"project", "--config", input.string(), "--mode", "bhp"});
  CHECK(flag.code == gopo::cli::kUsage);
  CHECK(flag.err.find("'mu'") != std::string::npos);
}

TEST_CASE("project input errors")
{
  ScratchDir dir("project_err");
  const auto no_mu = dir.write("a.json", R"({"weights": [0.5, 0.5], "field": [1, -1], "mode": "bhp"})");
  const auto r1 = cli({"project", "--config", no_mu.string()});
  CHECK(r1.code == gopo::cli::kUsage);
  CHECK(r1.err.find("mu") != std::string::npos);

  const auto broken = dir.write("b.json", "{\n  \"weights\": [0.5, 0.5],\n  \"field\": [1, -1\n}");
  const auto r2 = cli({"project", "--config", broken.string()});
  CHECK(r2.code == gopo::cli::kUsage);
  CHECK(r2.err.find("line 4") != std::string::npos);

  const auto bad_weights = dir.write("c.json", R"({"weights": [0.5, 0.6], "field": [1, -1], "mode": "linear"})");
  CHECK(cli({"project", "--config", bad_weights.string()}).code == gopo::cli::kUsage);

  const auto mismatch = dir.write("d.json", R"({"weights": [0.5, 0.5], "field": [1, -1, 0], "mode": "linear"})");
  CHECK(cli({"project", "--config", mismatch.string()}).code == gopo::cli::kUsage);
}

TEST_CASE("loss subcommand")
{
  const auto r = cli({"loss", "--config", config_path("loss_grpo.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("grad_rho: [0, 0.5]\n") != std::string::npos);
  CHECK(r.out.find("gate: [false, true]\n") != std::string::npos);

  ScratchDir dir("loss");
  const auto gopo_in = dir.write("g.json", R"({"loss_kind": "gopo", "advantages": [0.5, -0.5], "ratios": [1.2, 0.8], "mu": 0.5})");
  const auto g = cli({"loss", "--config", gopo_in.string()});
  CHECK(g.code == 0);
  CHECK(g.out.find("curvature_rho: [0.5, 0.5]\n") != std::string::npos);

  const auto missing = dir.write("m.json", R"({"loss_kind": "gopo", "advantages": [1], "ratios": [1]})");
  CHECK(cli({"loss", "--config", missing.string()}).code == gopo::cli::kUsage);
  CHECK(cli({"loss", "--config", gopo_in.string(), "--mode", "dpo"}).code == gopo::cli::kUsage);
}

TEST_CASE("train writes a trace and a manifest")
{
  ScratchDir dir("train");
  const auto config = dir.write("c.json", kSmallConfig);
  const auto csv = dir / "trace.csv";
  const auto r = cli({"train", "--config", config.string(), "--out", csv.string()});
  REQUIRE(r.code == 0);
  const auto trace = load_trace(csv);
  CHECK(trace.size() == 30);
  CHECK(slurp(csv).rfind(std::string(gopo::kTraceHeader), 0) == 0);

  const auto manifest = gopo::parse_manifest(nlohmann::json::parse(slurp(dir / "trace.manifest.json")));
  CHECK(manifest.version == gopo::kVersion);
  CHECK(manifest.config.train.iterations == 30);

  const auto again = dir / "again.csv";
  REQUIRE(cli({"train", "--config", config.string(), "--out", again.string()}).code == 0);
  CHECK(slurp(csv) == slurp(again));

  const auto reseeded = dir / "reseeded.csv";
  REQUIRE(cli({"train", "--config", config.string(), "--out", reseeded.string(), "--seed", "7"}).code == 0);
  CHECK(slurp(csv) != slurp(reseeded));
  const auto m7 = gopo::parse_manifest(nlohmann::json::parse(slurp(dir / "reseeded.manifest.json")));
  CHECK(m7.config.train.seed == 7);
}

TEST_CASE("train on the shipped three-arm config")
{
  ScratchDir dir("train3");
  const auto csv = dir / "t.csv";
  REQUIRE(cli({"train", "--config", config_path("bandit3_gopo.json"), "--out", csv.string()}).code == 0);
  const auto trace = load_trace(csv);
  REQUIRE(trace.size() == 200);
  CHECK(trace.back().best_arm_prob > 0.9);
}

TEST_CASE("train edge cases")
{
  ScratchDir dir("train_edge");
  auto j = nlohmann::json::parse(kSmallConfig);
  j["iterations"] = 0;
  const auto empty = dir.write("empty.json", j.dump());
  REQUIRE(cli({"train", "--config", empty.string(), "--out", (dir / "e.csv").string()}).code == 0);
  CHECK(slurp(dir / "e.csv") == std::string(gopo::kTraceHeader) + "\n");

  j = nlohmann::json::parse(kSmallConfig);
  j["loss_kind"] = "unknown";
  const auto bad = dir.write("bad.json", j.dump());
  const auto r = cli({"train", "--config", bad.string(), "--out", (dir / "b.csv").string()});
  CHECK(r.code == gopo::cli::kUsage);
  CHECK(r.err.find("loss_kind") != std::string::npos);

  const auto good = dir.write("good.json", kSmallConfig);
  CHECK(cli({"train", "--config", good.string(), "--out", "/nonexistent/dir/t.csv"}).code == gopo::cli::kFailure);

  j = nlohmann::json::parse(kSmallConfig);
  j["task"]["reward_table"] = nlohmann::json::parse("[[1e10, 0]]");
  j["lr"] = 1e308;
  const auto runaway = dir.write("runaway.json", j.dump());
  const auto h = cli({"train", "--config", runaway.string(), "--out", (dir / "h.csv").string()});
  CHECK(h.code == gopo::cli::kNumerical);
  CHECK(h.err.find("non-finite") != std::string::npos);
}

TEST_CASE("compare on the three-arm bandit")
{
  ScratchDir dir("compare");
  const auto r = cli({"compare", "--config", config_path("bandit3_compare.json"), "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("gopo") != std::string::npos);
  CHECK(r.out.find("grpo") != std::string::npos);

  const auto gopo_trace = load_trace(dir / "trace_gopo.csv");
  const auto grpo_trace = load_trace(dir / "trace_grpo.csv");
  REQUIRE(gopo_trace.size() == grpo_trace.size());
  for (std::size_t i = 0; i < gopo_trace.size(); ++i) { CHECK(gopo_trace[i].step == grpo_trace[i].step); }

  // Steps where every sample in the group drew the same arm carry no signal
  // for either loss; everywhere else the quadratic loss keeps a gradient.
  std::ifstream gates(dir / "gates_gopo.csv");
  std::string line;
  std::getline(gates, line);
  for (const auto& rec : gopo_trace) {
    REQUIRE(std::getline(gates, line));
    const int nonzero = std::stoi(line.substr(line.rfind(',') + 1));
    if (rec.best_arm_prob < 0.99 && nonzero > 0) { CHECK(rec.grad_norm > 0); }
  }

  const std::string summary = slurp(dir / "summary.csv");
  CHECK(summary.rfind("method,final_mean_reward,final_grad_norm,final_entropy,final_best_arm_prob\n", 0) == 0);
  CHECK(summary.find("\ngopo,") != std::string::npos);
  CHECK(summary.find("\ngrpo,") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "comparison.csv"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
}

TEST_CASE("compare with a single kind matches train")
{
  ScratchDir dir("compare1");
  auto j = nlohmann::json::parse(kSmallConfig);
  j["compare"] = nlohmann::json::array({"gopo"});
  const auto config = dir.write("c.json", j.dump());
  REQUIRE(cli({"compare", "--config", config.string(), "--out", (dir / "out").string()}).code == 0);
  REQUIRE(cli({"train", "--config", config.string(), "--out", (dir / "t.csv").string()}).code == 0);
  CHECK(slurp(dir / "out" / "trace_gopo.csv") == slurp(dir / "t.csv"));

  j.erase("compare");
  const auto none = dir.write("none.json", j.dump());
  const auto r = cli({"compare", "--config", none.string(), "--out", (dir / "x").string()});
  CHECK(r.code == gopo::cli::kUsage);
  CHECK(r.err.find("compare") != std::string::npos);
}

TEST_CASE("compare logs gate activity of the bounded loss")
{
  ScratchDir dir("compare_bhp");
  REQUIRE(cli({"compare", "--config", config_path("bandit2_bhp.json"), "--out", dir.path().string()}).code == 0);
  std::ifstream gates(dir / "gates_gopo-bhp.csv");
  std::string line;
  std::getline(gates, line);
  CHECK(line == "step,gate_closed,nonzero_advantages");
  int closed_total = 0;
  while (std::getline(gates, line)) {
    const auto first = line.find(',');
    closed_total += std::stoi(line.substr(first + 1, line.rfind(',') - first - 1));
  }
  CHECK(closed_total > 0);
}

TEST_CASE("check subcommand")
{
  const auto all = cli({"check"});
  CHECK(all.code == 0);
  CHECK(all.out.find("FAIL") == std::string::npos);

  const auto dyn = cli({"check", "--suite", "dynamics"});
  CHECK(dyn.code == 0);
  CHECK(dyn.out.find("dynamics") != std::string::npos);
  CHECK(dyn.out.find("hilbert") == std::string::npos);
  CHECK(dyn.out.find("trainer") == std::string::npos);

  const auto faulty = cli({"check", "--inject-fault", "flip-lambda"});
  CHECK(faulty.code == gopo::cli::kInvariant);
  CHECK(faulty.err.find("hilbert: BHP oracle equivalence") != std::string::npos);

  CHECK(cli({"check", "--suite", "nonsense"}).code == gopo::cli::kUsage);
  CHECK(cli({"check", "--inject-fault", "nonsense"}).code == gopo::cli::kUsage);
}
