#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rmlab/config.h"

namespace rmlab {

struct TrainOptions {
  bool resume = false;
  std::optional<int> stop_after_epoch;  // simulate an interrupted run
  std::function<void(const std::string&)> log;
};

struct TrainArtifacts {
  std::filesystem::path run_dir;
  nn::PolicyNet net;
  std::optional<BCResult> bc;
  std::vector<PgEpochStats> epochs;  // epochs run by this call
  std::size_t demonstrations = 0;
};

std::vector<Jobset> training_jobsets(const RunConfig& config);
std::vector<Jobset> demonstration_jobsets(const RunConfig& config);

// Run directory layout:
//   config.json                 resolved configuration
//   bc_history.csv              BC epochs (bc pipelines)
//   metrics.csv                 PG epochs
//   checkpoints/bc_final.json, checkpoints/pg_epoch_NNNN.json
TrainArtifacts train(const RunConfig& config, const TrainOptions& options = {});

std::string pg_checkpoint_name(int epoch);

// Resolves heuristic names and "policy:<checkpoint>" (greedy policy). The
// checkpoint's input/output shape must match `env`.
AgentFactory make_agent_factory(const EnvConfig& env);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace rmlab
