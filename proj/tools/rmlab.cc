// rmlab: workload generation, training, evaluation sweeps, curve export and self-tests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmlab/config.h"
#include "rmlab/pipeline.h"
#include "rmlab/selftest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string scale;
  std::string mode;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
};

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file (if any) with command-line flags layered on top.
json base_document(const CommonOptions& o) {
  json j = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot open config " + o.config_path);
    j = json::parse(in);
  }
  if (!o.scale.empty()) j["preset"] = o.scale;
  if (!o.mode.empty()) j["env"]["mode"] = o.mode;
  if (o.seed_set) j["seed"] = o.seed;
  if (!o.out.empty()) j["out"] = o.out;
  if (o.jobs >= 0) j["train"]["workers"] = o.jobs;
  return j;
}

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--scale", o.scale, "Preset: paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  app->add_option("--mode", o.mode, "online or offline")->check(CLI::IsMember({"online", "offline"}));
  app->add_option("--out", o.out, "Output directory");
  app->add_option_function<std::uint64_t>(
      "--seed",
      [&o](std::uint64_t s) {
        o.seed = s;
        o.seed_set = true;
      },
      "Master seed");
  app->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int cmd_gen(const CommonOptions& o, int count, double load) {
  json j = base_document(o);
  if (load > 0) j["load"] = load;
  const auto config = rmlab::run_config_from_json(j);
  const fs::path out = config.out;
  fs::create_directories(out);
  const auto mode = config.env.mode;
  for (int i = 0; i < count; ++i) {
    const auto seed = rmlab::train_jobset_seed(config.seed, static_cast<std::size_t>(i));
    const auto jobset = rmlab::generate_jobset(seed, config.workload, mode);
    std::ostringstream name;
    name << "jobset_" << std::setw(4) << std::setfill('0') << i << ".json";
    rmlab::write_json(out / name.str(), rmlab::jobset_to_json(jobset));
  }
  rmlab::write_json(out / "config.json", rmlab::to_json(config));
  log_line("wrote " + std::to_string(count) + " jobsets to " + out.string());
  return 0;
}

int cmd_train(const CommonOptions& o, const std::string& pipeline, double load, int epochs, bool resume) {
  json j = base_document(o);
  if (!pipeline.empty()) j["pipeline"] = pipeline;
  if (load > 0) j["load"] = load;
  if (epochs >= 0) j["train"]["epochs"] = epochs;
  const auto config = rmlab::run_config_from_json(j);
  rmlab::TrainOptions options;
  options.resume = resume;
  options.log = log_line;
  const auto artifacts = rmlab::train(config, options);
  std::cout << "run directory: " << artifacts.run_dir.string() << "\n"
            << "final policy hash: " << rmlab::nn::hash_hex(artifacts.net.hash()) << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& agents, const std::string& loads, int seeds_per_cell) {
  json j = base_document(o);
  if (!agents.empty()) j["eval"]["agents"] = parse_list(agents);
  if (!loads.empty()) j["eval"]["loads"] = parse_doubles(loads);
  if (seeds_per_cell > 0) j["eval"]["seeds_per_cell"] = seeds_per_cell;
  const auto config = rmlab::run_config_from_json(j);
  const fs::path out = config.out;
  fs::create_directories(out);
  rmlab::write_json(out / "config.json", rmlab::to_json(config));
  const auto result = rmlab::run_sweep(config.eval, rmlab::make_agent_factory(config.env));
  const json sidecar = rmlab::to_json(config);
  for (const auto& [name, writer] :
       std::vector<std::pair<std::string, void (*)(const rmlab::SweepResult&, const std::string&)>>{
           {"episodes.csv", rmlab::write_sweep_csv},
           {"report.csv", rmlab::write_report_csv},
           {"durations.csv", rmlab::write_duration_report_csv}}) {
    const auto path = (out / name).string();
    writer(result, path);
    rmlab::write_sidecar(path, sidecar);
  }
  std::cout << std::left << std::setw(8) << "load" << std::setw(24) << "agent" << std::setw(14) << "slowdown"
            << std::setw(14) << "makespan" << "reward\n";
  for (const auto& c : result.cells) {
    std::cout << std::setw(8) << c.load << std::setw(24) << c.agent << std::setw(14) << c.slowdown.mean
              << std::setw(14) << c.makespan.mean << c.discounted_reward.mean << "\n";
  }
  return 0;
}

int cmd_curves(const CommonOptions& o, const std::string& run) {
  const fs::path metrics = fs::path(run) / "metrics.csv";
  const auto log = rmlab::read_metrics_csv(metrics.string());
  const auto summary = rmlab::summarize_curves(log);
  const fs::path out = o.out.empty() ? fs::path(run) : fs::path(o.out);
  fs::create_directories(out);
  const auto path = (out / "curves.csv").string();
  rmlab::write_curves_csv(log, path);
  rmlab::write_sidecar(path, {{"metrics", metrics.string()}, {"epochs", summary.epochs}});
  std::cout << "epochs " << summary.epochs << ", quartile length " << summary.quartile_len << "\n";
  for (const auto& [series, first] : summary.first_quartile_mean) {
    std::cout << std::left << std::setw(26) << series << " first " << std::setw(14) << first << " last "
              << std::setw(14) << summary.last_quartile_mean.at(series) << " trend " << summary.trend.at(series)
              << "\n";
  }
  return 0;
}

int cmd_selftest(const CommonOptions& o, int fault_layer) {
  const auto seed = o.seed_set ? o.seed : 1;
  std::optional<int> fault;
  if (fault_layer >= 0) fault = fault_layer;
  bool ok = true;
  for (const auto& r : rmlab::run_selftest(seed, fault)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(10) << r.name << " " << r.detail << " ["
              << std::fixed << std::setprecision(1) << r.seconds << "s]" << std::defaultfloat << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster scheduling with deep reinforcement learning"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("gen", "Write jobset JSON files");
  add_common(gen, common);
  int count = 10;
  double gen_load = 0.0;
  gen->add_option("--count", count, "Number of jobsets")->check(CLI::PositiveNumber);
  gen->add_option("--load", gen_load, "Target cluster load (sets the arrival rate)");

  auto* train = app.add_subcommand("train", "Train a policy (bc, pg or bc-then-pg)");
  add_common(train, common);
  std::string pipeline;
  double train_load = 0.0;
  int epochs = -1;
  bool resume = false;
  train->add_option("--pipeline", pipeline, "bc, pg or bc-then-pg")->check(CLI::IsMember({"bc", "pg", "bc-then-pg"}));
  train->add_option("--load", train_load, "Training load");
  train->add_option("--epochs", epochs, "Policy-gradient epochs")->check(CLI::NonNegativeNumber);
  train->add_flag("--resume", resume, "Continue from the latest checkpoint in --out");

  auto* eval = app.add_subcommand("eval", "Run an evaluation sweep");
  add_common(eval, common);
  std::string agents, loads;
  int seeds_per_cell = 0;
  eval->add_option("--agents", agents, "Comma-separated: sjf, packer, random, void, policy:<checkpoint>");
  eval->add_option("--loads", loads, "Comma-separated loads (default 0.1..1.9)");
  eval->add_option("--seeds-per-cell", seeds_per_cell, "Held-out jobsets per load")->check(CLI::PositiveNumber);

  auto* curves = app.add_subcommand("curves", "Export and summarize training curves");
  add_common(curves, common);
  std::string run_dir;
  curves->add_option("--run", run_dir, "Run directory holding metrics.csv")->required()->check(CLI::ExistingDirectory);

  auto* selftest = app.add_subcommand("selftest", "Gradient checks, environment fuzz, returns oracle, bandit");
  add_common(selftest, common);
  int fault_layer = -1;
  selftest
      ->add_option("--inject-fault", fault_layer,
                   "Flip the weight-gradient sign of this layer (0, 2 conv; 4, 5 dense)")
      ->check(CLI::IsMember({0, 2, 4, 5}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(common, count, gen_load);
    if (*train) return cmd_train(common, pipeline, train_load, epochs, resume);
    if (*eval) return cmd_eval(common, agents, loads, seeds_per_cell);
    if (*curves) return cmd_curves(common, run_dir);
    if (*selftest) return cmd_selftest(common, fault_layer);
  } catch (const rmlab::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
