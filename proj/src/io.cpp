#include "gopo/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "gopo/errors.hpp"

namespace gopo {

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& prefix = "")
{
  const auto it = j.find(key);
  if (it == j.end()) { throw ConfigError(prefix + key, "missing (every field is required)"); }
  return *it;
}

double require_number(const json& j, const std::string& key, const std::string& prefix = "")
{
  const json& v = require(j, key, prefix);
  if (!v.is_number()) { throw ConfigError(prefix + key, "expected a number"); }
  return v.get<double>();
}

std::int64_t require_integer(const json& j, const std::string& key, const std::string& prefix = "")
{
  const json& v = require(j, key, prefix);
  if (!v.is_number_integer()) { throw ConfigError(prefix + key, "expected an integer"); }
  return v.get<std::int64_t>();
}

int require_int(const json& j, const std::string& key)
{
  const auto v = require_integer(j, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "out of range");
  }
  return static_cast<int>(v);
}

std::string require_string(const json& j, const std::string& key, const std::string& prefix = "")
{
  const json& v = require(j, key, prefix);
  if (!v.is_string()) { throw ConfigError(prefix + key, "expected a string"); }
  return v.get<std::string>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& prefix = "")
{
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) { throw ConfigError(prefix + key, "unknown field"); }
  }
}

TaskKind parse_task_kind(const std::string& text)
{
  if (text == "bandit") { return TaskKind::Bandit; }
  if (text == "noisy-bandit") { return TaskKind::NoisyBandit; }
  throw ConfigError("task.kind", "unknown task kind '" + text + "' (expected bandit or noisy-bandit)");
}

std::string task_kind_name(TaskKind kind)
{
  return kind == TaskKind::Bandit ? "bandit" : "noisy-bandit";
}

SyntheticTask parse_task(const json& j)
{
  if (!j.is_object()) { throw ConfigError("task", "expected an object"); }
  reject_unknown(j, {"kind", "reward_table", "noise_std", "contexts", "actions"}, "task.");
  SyntheticTask task;
  task.kind = parse_task_kind(require_string(j, "kind", "task."));
  task.noise_std = require_number(j, "noise_std", "task.");

  const json& table = require(j, "reward_table", "task.");
  if (!table.is_array() || table.empty()) { throw ConfigError("task.reward_table", "expected a non-empty array of rows"); }
  const auto rows = static_cast<Eigen::Index>(table.size());
  if (!table[0].is_array() || table[0].empty()) { throw ConfigError("task.reward_table", "rows must be non-empty arrays"); }
  const auto cols = static_cast<Eigen::Index>(table[0].size());
  task.reward_table.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = table[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("task.reward_table", "row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) { throw ConfigError("task.reward_table", "entries must be numbers"); }
      task.reward_table(r, c) = v.get<double>();
    }
  }
  if (j.contains("contexts") && require_integer(j, "contexts", "task.") != rows) {
    throw ConfigError("task.contexts", "does not match reward_table rows");
  }
  if (j.contains("actions") && require_integer(j, "actions", "task.") != cols) {
    throw ConfigError("task.actions", "does not match reward_table columns");
  }
  task.validate();
  return task;
}

json task_to_json(const SyntheticTask& task)
{
  json table = json::array();
  for (Eigen::Index r = 0; r < task.reward_table.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < task.reward_table.cols(); ++c) { row.push_back(task.reward_table(r, c)); }
    table.push_back(std::move(row));
  }
  return json{{"kind", task_kind_name(task.kind)},
              {"contexts", task.contexts()},
              {"actions", task.actions()},
              {"reward_table", std::move(table)},
              {"noise_std", task.noise_std}};
}

double parse_double_field(const std::string& cell, std::size_t line)
{
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ParseError("trace csv line " + std::to_string(line) + ": not a number: '" + cell + "'");
  }
  return v;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j)
{
  if (!j.is_object()) { throw ConfigError("<root>", "expected a JSON object"); }
  reject_unknown(j, {"task", "mu", "alpha", "lr", "group_size", "clip_eps", "kl_beta", "iterations", "inner_epochs",
                     "seed", "loss_kind", "std_normalize", "compare"});
  ExperimentConfig cfg;
  cfg.task = parse_task(require(j, "task"));

  TrainConfig& t = cfg.train;
  t.mu = require_number(j, "mu");
  t.alpha = require_number(j, "alpha");
  t.lr = require_number(j, "lr");
  t.group_size = require_int(j, "group_size");
  t.clip_eps = require_number(j, "clip_eps");
  t.kl_beta = require_number(j, "kl_beta");
  t.iterations = require_int(j, "iterations");
  t.inner_epochs = require_int(j, "inner_epochs");
  t.seed = require_integer(j, "seed");
  t.loss_kind = parse_loss_kind(require_string(j, "loss_kind"));
  if (j.contains("std_normalize")) {
    if (!j["std_normalize"].is_boolean()) { throw ConfigError("std_normalize", "expected true or false"); }
    t.std_normalize = j["std_normalize"].get<bool>();
  }
  if (j.contains("compare")) {
    const json& list = j["compare"];
    if (!list.is_array()) { throw ConfigError("compare", "expected an array of loss kinds"); }
    for (const auto& item : list) {
      if (!item.is_string()) { throw ConfigError("compare", "entries must be strings"); }
      cfg.compare.push_back(parse_loss_kind(item.get<std::string>(), "compare"));
    }
  }
  t.validate();
  return cfg;
}

ExperimentConfig parse_experiment_text(std::string_view text)
{
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  return parse_experiment_config(j);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
  return parse_experiment_text(read_text_file(path));
}

json to_json(const ExperimentConfig& config)
{
  const TrainConfig& t = config.train;
  json j{{"task", task_to_json(config.task)},
         {"mu", t.mu},
         {"alpha", t.alpha},
         {"lr", t.lr},
         {"group_size", t.group_size},
         {"clip_eps", t.clip_eps},
         {"kl_beta", t.kl_beta},
         {"iterations", t.iterations},
         {"inner_epochs", t.inner_epochs},
         {"seed", t.seed},
         {"loss_kind", std::string(to_string(t.loss_kind))},
         {"std_normalize", t.std_normalize}};
  if (!config.compare.empty()) {
    json list = json::array();
    for (auto kind : config.compare) { list.push_back(std::string(to_string(kind))); }
    j["compare"] = std::move(list);
  }
  return j;
}

json to_json(const RunManifest& manifest)
{
  return json{{"config", to_json(manifest.config)}, {"version", manifest.version}, {"timestamp", manifest.timestamp}};
}

RunManifest parse_manifest(const json& j)
{
  RunManifest m;
  m.config = parse_experiment_config(require(j, "config"));
  m.version = require_string(j, "version");
  m.timestamp = require_string(j, "timestamp");
  return m;
}

std::string utc_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace)
{
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.step << ',' << format_double(r.mean_reward) << ',' << format_double(r.loss) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.entropy) << ',' << format_double(r.chi2_vs_anchor)
        << ',' << format_double(r.tv_vs_anchor) << ',' << format_double(r.best_arm_prob) << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) { throw ParseError("trace csv line 1: unexpected header"); }
  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) { continue; }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { cells.push_back(cell); }
    if (cells.size() != 8) {
      throw ParseError("trace csv line " + std::to_string(line_no) + ": expected 8 columns, got "
                       + std::to_string(cells.size()));
    }
    TraceRecord r;
    r.step = static_cast<int>(parse_double_field(cells[0], line_no));
    r.mean_reward = parse_double_field(cells[1], line_no);
    r.loss = parse_double_field(cells[2], line_no);
    r.grad_norm = parse_double_field(cells[3], line_no);
    r.entropy = parse_double_field(cells[4], line_no);
    r.chi2_vs_anchor = parse_double_field(cells[5], line_no);
    r.tv_vs_anchor = parse_double_field(cells[6], line_no);
    r.best_arm_prob = parse_double_field(cells[7], line_no);
    out.push_back(r);
  }
  return out;
}

void write_gate_csv(std::ostream& out, const std::vector<TraceRecord>& trace)
{
  out << "step,gate_closed,nonzero_advantages\n";
  for (const auto& r : trace) { out << r.step << ',' << r.gate_closed << ',' << r.nonzero_advantages << '\n'; }
}

std::string read_text_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw std::runtime_error("cannot open " + path.string()); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gopo
