#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gopo/dynamics.hpp"
#include "gopo/errors.hpp"
#include "gopo/hilbert.hpp"
#include "gopo/invariants.hpp"
#include "gopo/io.hpp"
#include "gopo/objectives.hpp"
#include "gopo/trainer.hpp"

namespace gopo::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options
{
  std::string config;
  std::string out;
  std::string mode;
  std::string suite = "all";
  std::string fault;
  bool std_normalize = false;
  std::optional<std::int64_t> seed;
};

json parse_json_file(const std::string& path)
{
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

FieldXd require_vector(const json& j, const std::string& key)
{
  if (!j.contains(key)) { throw ConfigError(key, "missing"); }
  const json& a = j.at(key);
  if (!a.is_array() || a.empty()) { throw ConfigError(key, "must be a non-empty array of numbers"); }
  FieldXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) { throw ConfigError(key, "entry " + std::to_string(i) + " is not a number"); }
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

std::optional<double> optional_number(const json& j, const std::string& key)
{
  if (!j.contains(key)) { return std::nullopt; }
  if (!j.at(key).is_number()) { throw ConfigError(key, "must be a number"); }
  return j.at(key).get<double>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known)
{
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) { ok = ok || item.key() == k; }
    if (!ok) { throw ConfigError(item.key(), "unknown field"); }
  }
}

std::string vec(const FieldXd& v)
{
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) { s += (i ? ", " : "") + format_double(v[i]); }
  return s + "]";
}

std::string indices(const Mask& m)
{
  std::string s = "[";
  bool first = true;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!m[i]) { continue; }
    s += (first ? "" : ", ") + std::to_string(i);
    first = false;
  }
  return s + "]";
}

std::string bools(const Mask& m)
{
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.size(); ++i) { s += std::string(i ? ", " : "") + (m[i] ? "true" : "false"); }
  return s + "]";
}

std::ofstream open_for_write(const fs::path& path)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw std::runtime_error("cannot write '" + path.string() + "'"); }
  return f;
}

// project ---------------------------------------------------------------------

int cmd_project(const Options& opt, std::ostream& out)
{
  const json j = parse_json_file(opt.config);
  if (!j.is_object()) { throw ConfigError("<root>", "must be a JSON object"); }
  reject_unknown(j, {"weights", "field", "mu", "mode"});

  std::string mode = opt.mode;
  if (mode.empty()) {
    if (!j.contains("mode") || !j.at("mode").is_string()) { throw ConfigError("mode", "missing (linear or bhp)"); }
    mode = j.at("mode").get<std::string>();
  }
  if (mode != "linear" && mode != "bhp") { throw ConfigError("mode", "must be linear or bhp, got '" + mode + "'"); }

  const FieldXd g = require_vector(j, "field");
  const ReferenceMeasureXd ref(require_vector(j, "weights"));
  const auto mu = optional_number(j, "mu");
  if (mu && !(*mu > 0)) { throw ConfigError("mu", "must be > 0"); }

  out << "mode: " << mode << '\n';
  if (mode == "linear") {
    // Unconstrained target: P(g / mu), with mu = 1 when absent.
    const FieldXd v = project_zero_mean(FieldXd(g / mu.value_or(1.0)), ref);
    out << "v*: " << vec(v) << '\n';
    out << "active: []\n";
    out << "pi: " << vec(policy_from_fluctuation(v, ref)) << '\n';
    return kOk;
  }

  if (!mu) { throw ConfigError("mu", "required in bhp mode"); }
  const auto sol = bhp_solve(g, ref, *mu);
  out << "v*: " << vec(sol.v_star) << '\n';
  out << "lambda*: " << format_double(sol.lambda_star) << '\n';
  out << "eta: " << vec(sol.eta) << '\n';
  out << "active: " << indices(sol.active_mask) << '\n';
  out << "pi: " << vec(policy_from_fluctuation(sol.v_star, ref)) << '\n';
  return kOk;
}

// loss ------------------------------------------------------------------------

int cmd_loss(const Options& opt, std::ostream& out)
{
  const json j = parse_json_file(opt.config);
  if (!j.is_object()) { throw ConfigError("<root>", "must be a JSON object"); }
  reject_unknown(j, {"loss_kind", "advantages", "ratios", "mu", "alpha", "clip_eps", "kl_beta"});

  std::string kind_text = opt.mode;
  if (kind_text.empty()) {
    if (!j.contains("loss_kind") || !j.at("loss_kind").is_string()) { throw ConfigError("loss_kind", "missing"); }
    kind_text = j.at("loss_kind").get<std::string>();
  }
  const LossKind kind = parse_loss_kind(kind_text);

  LossParams params;
  if (kind == LossKind::Grpo) {
    const auto eps = optional_number(j, "clip_eps");
    if (!eps) { throw ConfigError("clip_eps", "required for grpo"); }
    params.clip_eps = *eps;
    params.kl_beta = optional_number(j, "kl_beta").value_or(0.0);
  } else {
    const auto mu = optional_number(j, "mu");
    if (!mu) { throw ConfigError("mu", "required for " + kind_text); }
    params.mu = *mu;
    params.alpha = optional_number(j, "alpha").value_or(0.0);
  }

  const auto batch = GroupBatchXd::from_ratios(require_vector(j, "advantages"), require_vector(j, "ratios"));
  const auto report = evaluate_loss(kind, batch, params);
  out << "loss_kind: " << to_string(kind) << '\n';
  out << "value: " << format_double(report.value) << '\n';
  out << "grad_rho: " << vec(report.grad_rho) << '\n';
  out << "curvature_rho: " << vec(report.curvature_rho) << '\n';
  out << "gate: " << bools(report.gate) << '\n';
  return kOk;
}

// train / compare -------------------------------------------------------------

ExperimentConfig load_with_overrides(const Options& opt)
{
  ExperimentConfig cfg = load_experiment_config(opt.config);
  if (opt.seed) { cfg.train.seed = *opt.seed; }
  if (opt.std_normalize) { cfg.train.std_normalize = true; }
  return cfg;
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg)
{
  auto f = open_for_write(path);
  f << to_json(RunManifest{cfg, std::string(kVersion), utc_timestamp()}).dump(2) << '\n';
}

/// trace.csv -> trace.manifest.json
fs::path manifest_path_for(const fs::path& csv)
{
  fs::path p = csv;
  p.replace_extension(".manifest.json");
  return p;
}

int cmd_train(const Options& opt, std::ostream& out, std::ostream& err)
{
  const ExperimentConfig cfg = load_with_overrides(opt);
  const TrainResult result = train_run(cfg.task, cfg.train);

  const fs::path csv = opt.out;
  {
    auto f = open_for_write(csv);
    write_trace_csv(f, result.trace);
  }
  write_manifest(manifest_path_for(csv), cfg);

  out << "wrote " << result.trace.size() << " rows to " << csv.string() << '\n';
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    out << "final best_arm_prob " << format_double(last.best_arm_prob) << ", entropy "
        << format_double(last.entropy) << '\n';
  }
  if (result.halted) {
    err << "error: " << result.diagnostic << '\n';
    return kNumerical;
  }
  return kOk;
}

int cmd_compare(const Options& opt, std::ostream& out, std::ostream& err)
{
  const ExperimentConfig cfg = load_with_overrides(opt);
  if (cfg.compare.empty()) { throw ConfigError("compare", "must list at least one loss kind"); }

  const fs::path dir = opt.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message()); }

  std::vector<std::vector<TraceRecord>> traces;
  bool halted = false;
  for (LossKind kind : cfg.compare) {
    TrainConfig train = cfg.train;
    train.loss_kind = kind;
    TrainResult result = train_run(cfg.task, train);
    const std::string name(to_string(kind));
    {
      auto f = open_for_write(dir / ("trace_" + name + ".csv"));
      write_trace_csv(f, result.trace);
    }
    {
      auto f = open_for_write(dir / ("gates_" + name + ".csv"));
      write_gate_csv(f, result.trace);
    }
    if (result.halted) {
      err << "error: " << name << ": " << result.diagnostic << '\n';
      halted = true;
    }
    traces.push_back(std::move(result.trace));
  }
  write_manifest(dir / "manifest.json", cfg);

  // Aligned per-step view across methods.
  {
    auto f = open_for_write(dir / "comparison.csv");
    f << "step";
    for (LossKind kind : cfg.compare) {
      const std::string n(to_string(kind));
      f << ',' << n << "_grad_norm," << n << "_best_arm_prob," << n << "_gate_closed";
    }
    f << '\n';
    std::size_t rows = 0;
    for (const auto& t : traces) { rows = std::max(rows, t.size()); }
    for (std::size_t s = 0; s < rows; ++s) {
      f << s;
      for (const auto& t : traces) {
        if (s < t.size()) {
          f << ',' << format_double(t[s].grad_norm) << ',' << format_double(t[s].best_arm_prob) << ','
            << t[s].gate_closed;
        } else {
          f << ",,,";
        }
      }
      f << '\n';
    }
  }

  auto summary = open_for_write(dir / "summary.csv");
  summary << "method,final_mean_reward,final_grad_norm,final_entropy,final_best_arm_prob\n";
  out << std::left << std::setw(10) << "method" << std::setw(14) << "mean_reward" << std::setw(14) << "grad_norm"
      << std::setw(14) << "entropy" << "best_arm_prob\n";
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const std::string name(to_string(cfg.compare[k]));
    if (traces[k].empty()) {
      summary << name << ",,,,\n";
      out << std::setw(10) << name << "(no steps)\n";
      continue;
    }
    const auto& last = traces[k].back();
    summary << name << ',' << format_double(last.mean_reward) << ',' << format_double(last.grad_norm) << ','
            << format_double(last.entropy) << ',' << format_double(last.best_arm_prob) << '\n';
    char line[128];
    std::snprintf(line, sizeof line, "%-10s%-14.6g%-14.6g%-14.6g%.6g\n", name.c_str(), last.mean_reward,
                  last.grad_norm, last.entropy, last.best_arm_prob);
    out << line;
  }
  return halted ? kNumerical : kOk;
}

// check -----------------------------------------------------------------------

int cmd_check(const Options& opt, std::ostream& out, std::ostream& err)
{
  Fault fault = Fault::None;
  if (opt.fault == "flip-lambda") {
    fault = Fault::FlipBhpLambda;
  } else if (!opt.fault.empty()) {
    throw ConfigError("--inject-fault", "unknown fault '" + opt.fault + "'");
  }
  std::vector<CheckResult> results;
  try {
    results = run_checks(opt.suite, fault);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--suite", e.what());
  }

  int failed = 0;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-5s %-11s %-46s ", r.passed ? "PASS" : "FAIL", r.suite.c_str(),
                  r.name.c_str());
    out << line << r.detail << '\n';
    failed += r.passed ? 0 : 1;
  }
  out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
  if (failed == 0) { return kOk; }
  err << failed << " failing check(s):\n";
  for (const auto& r : results) {
    if (!r.passed) { err << "  " << r.suite << ": " << r.name << '\n'; }
  }
  return kInvariant;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Group orthogonalized policy optimization on finite supports", "gopo_cli"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Options opt;
  auto* project = app.add_subcommand("project", "Project a field onto the zero-mean subspace (linear) or with v >= -1 (bhp)");
  project->add_option("--config", opt.config, "JSON with weights, field, mu, mode")->required()->check(CLI::ExistingFile);
  project->add_option("--mode", opt.mode, "linear or bhp (overrides the file)");

  auto* loss = app.add_subcommand("loss", "Evaluate a loss on explicit advantages and ratios");
  loss->add_option("--config", opt.config, "JSON with loss_kind, advantages, ratios and parameters")
      ->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--mode", opt.mode, "loss kind (overrides the file)");

  auto* train = app.add_subcommand("train", "Train on a synthetic task and write a CSV trace");
  train->add_option("--config", opt.config, "experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", opt.out, "CSV trace path; the manifest is written next to it")->required();
  train->add_option("--seed", opt.seed, "overrides the config seed");
  train->add_flag("--std-normalize", opt.std_normalize, "standardize advantages for the grpo baseline");

  auto* compare = app.add_subcommand("compare", "Train once per loss kind in the config's compare list");
  compare->add_option("--config", opt.config, "experiment config")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", opt.out, "output directory")->required();
  compare->add_option("--seed", opt.seed, "overrides the config seed");
  compare->add_flag("--std-normalize", opt.std_normalize, "standardize advantages for the grpo baseline");

  auto* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_option("--suite", opt.suite, "all, hilbert, signal, objectives, dynamics or trainer");
  check->add_option("--inject-fault", opt.fault)->group("");

  std::vector<const char*> argv{"gopo_cli"};
  for (const auto& a : args) { argv.push_back(a.c_str()); }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (project->parsed()) { return cmd_project(opt, out); }
    if (loss->parsed()) { return cmd_loss(opt, out); }
    if (train->parsed()) { return cmd_train(opt, out, err); }
    if (compare->parsed()) { return cmd_compare(opt, out, err); }
    if (check->parsed()) { return cmd_check(opt, out, err); }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace gopo::cli
