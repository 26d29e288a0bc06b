#include "rmlab/pipeline.h"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "rmlab/baselines.h"

namespace fs = std::filesystem;

namespace rmlab {

namespace {

void log_line(const TrainOptions& options, const std::string& msg) {
  if (options.log) options.log(msg);
}

std::vector<Jobset> jobsets_in(const RunConfig& c, std::uint64_t name_space, int count) {
  std::vector<Jobset> sets;
  for (int i = 0; i < count; ++i) {
    const auto seed = name_space == seed_space::kTrain ? train_jobset_seed(c.seed, i)
                                                       : derive_seed(c.seed, name_space, i);
    sets.push_back(generate_jobset(seed, c.workload, c.env.mode));
  }
  return sets;
}

constexpr const char* kMetricsHeader = "epoch,mean_discounted_reward,max_discounted_reward,mean_slowdown,entropy,wallclock_s";

std::string metrics_row(const PgEpochStats& s, double wall) {
  std::ostringstream os;
  os << std::setprecision(17) << s.epoch << ',' << s.mean_discounted_reward << ',' << s.max_discounted_reward << ','
     << s.mean_slowdown << ',' << s.entropy << ',' << std::setprecision(6) << wall;
  return os.str();
}

// Keeps the header and rows with epoch <= last_epoch.
void truncate_metrics(const fs::path& path, int last_epoch) {
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  if (std::getline(in, line)) keep.push_back(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) <= last_epoch) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::optional<int> latest_pg_checkpoint(const fs::path& dir) {
  std::optional<int> best;
  if (!fs::exists(dir)) return best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("pg_epoch_", 0) != 0 || entry.path().extension() != ".json") continue;
    const int epoch = std::stoi(name.substr(9, name.size() - 9 - 5));
    if (!best || epoch > *best) best = epoch;
  }
  return best;
}

}  // namespace

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string pg_checkpoint_name(int epoch) {
  std::ostringstream os;
  os << "pg_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".json";
  return os.str();
}

std::vector<Jobset> training_jobsets(const RunConfig& config) {
  return jobsets_in(config, seed_space::kTrain, config.train.jobsets_per_epoch);
}

std::vector<Jobset> demonstration_jobsets(const RunConfig& config) {
  return jobsets_in(config, seed_space::kBc, config.train.bc_jobsets);
}

TrainArtifacts train(const RunConfig& config, const TrainOptions& options) {
  const fs::path run_dir = config.out;
  const fs::path ckpt_dir = run_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  write_json(run_dir / "config.json", to_json(config));

  TrainArtifacts art;
  art.run_dir = run_dir;
  nn::PolicyNet net(config.net_spec());
  net.initialize(derive_seed(config.seed, seed_space::kInit, 0));
  const nlohmann::json meta_base = {{"env", config.env}, {"policy", to_string(config.policy)}};

  const bool do_bc = config.pipeline != Pipeline::PG;
  const bool do_pg = config.pipeline != Pipeline::BC;
  const fs::path bc_path = ckpt_dir / "bc_final.json";

  if (do_bc) {
    if (options.resume && fs::exists(bc_path)) {
      net = nn::net_from_checkpoint(nn::load_checkpoint_json(bc_path.string()));
      log_line(options, "resumed BC policy from " + bc_path.string());
    } else {
      SjfAgent teacher;
      auto dataset = collect_demonstrations(demonstration_jobsets(config), teacher, config.env,
                                            config.train.bc_validation_fraction);
      art.demonstrations = dataset.size();
      log_line(options, "collected " + std::to_string(dataset.size()) + " demonstration pairs");
      auto bc = train_bc(dataset, net, config.train);
      net = bc.net;
      std::ofstream hist(run_dir / "bc_history.csv");
      hist << std::setprecision(17) << "epoch,train_loss,train_accuracy,validation_accuracy\n";
      for (const auto& h : bc.history) {
        hist << h.epoch << ',' << h.train_loss << ',' << h.train_accuracy << ',' << h.validation_accuracy << '\n';
        log_line(options, "bc epoch " + std::to_string(h.epoch) + " loss " + std::to_string(h.train_loss) +
                              " val_acc " + std::to_string(h.validation_accuracy));
      }
      auto meta = meta_base;
      meta["stage"] = "bc";
      meta["best_epoch"] = bc.best_epoch;
      nn::save_checkpoint(bc_path.string(), net, nullptr, meta);
      art.bc = std::move(bc);
    }
  }

  if (do_pg) {
    const auto jobsets = training_jobsets(config);
    auto optimizer = nn::make_optimizer(net, config.train.pg_optimizer());
    const fs::path metrics_path = run_dir / "metrics.csv";
    int start = 1;
    std::optional<int> resume_from = options.resume ? latest_pg_checkpoint(ckpt_dir) : std::nullopt;
    if (resume_from) {
      auto j = nn::load_checkpoint_json((ckpt_dir / pg_checkpoint_name(*resume_from)).string());
      net = nn::net_from_checkpoint(j);
      optimizer = nn::optimizer_from_checkpoint(j).value_or(optimizer);
      start = *resume_from + 1;
      truncate_metrics(metrics_path, *resume_from);
      log_line(options, "resumed PG from epoch " + std::to_string(*resume_from));
    } else {
      std::ofstream(metrics_path, std::ios::trunc) << kMetricsHeader << '\n';
      auto meta = meta_base;
      meta["stage"] = "pg";
      meta["epoch"] = 0;
      nn::save_checkpoint((ckpt_dir / pg_checkpoint_name(0)).string(), net, &optimizer, meta);
    }
    std::ofstream metrics(metrics_path, std::ios::app);
    const auto t0 = std::chrono::steady_clock::now();
    for (int epoch = start; epoch <= config.train.epochs; ++epoch) {
      auto stats = pg_epoch(jobsets, net, optimizer, config.train, config.env, epoch);
      if (!stats.updated) log_line(options, "epoch " + std::to_string(epoch) + ": " + stats.diagnostic);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics << metrics_row(stats, wall) << '\n' << std::flush;
      log_line(options, "pg epoch " + std::to_string(epoch) + " reward " + std::to_string(stats.mean_discounted_reward) +
                            " slowdown " + std::to_string(stats.mean_slowdown) + " entropy " +
                            std::to_string(stats.entropy));
      art.epochs.push_back(stats);
      const bool last = epoch == config.train.epochs;
      const bool stopping = options.stop_after_epoch && epoch >= *options.stop_after_epoch;
      if (epoch % config.train.checkpoint_every == 0 || last || stopping) {
        auto meta = meta_base;
        meta["stage"] = "pg";
        meta["epoch"] = epoch;
        nn::save_checkpoint((ckpt_dir / pg_checkpoint_name(epoch)).string(), net, &optimizer, meta);
      }
      if (stopping) break;
    }
  }
  nn::save_checkpoint((ckpt_dir / "final.json").string(), net, nullptr, meta_base);
  art.net = std::move(net);
  return art;
}

AgentFactory make_agent_factory(const EnvConfig& env) {
  auto cache = std::make_shared<std::map<std::string, std::shared_ptr<const nn::PolicyNet>>>();
  auto mutex = std::make_shared<std::mutex>();
  return [env, cache, mutex](const std::string& name, std::uint64_t seed) -> std::unique_ptr<Agent> {
    if (name.rfind("policy:", 0) != 0) return make_heuristic_agent(name, seed);
    const std::string path = name.substr(7);
    std::shared_ptr<const nn::PolicyNet> net;
    {
      std::lock_guard lock(*mutex);
      auto it = cache->find(path);
      if (it == cache->end()) {
        auto loaded = std::make_shared<nn::PolicyNet>(nn::net_from_checkpoint(nn::load_checkpoint_json(path)));
        const auto& spec = loaded->spec();
        if (spec.input_rows != env.time_horizon || spec.input_cols != env.image_width() ||
            spec.num_actions != env.num_actions()) {
          throw std::invalid_argument("checkpoint " + path + " does not match the environment shape");
        }
        it = cache->emplace(path, std::move(loaded)).first;
      }
      net = it->second;
    }
    return std::make_unique<PolicyAgent>(net);
  };
}

}  // namespace rmlab
