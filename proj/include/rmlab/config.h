#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "rmlab/environment.h"
#include "rmlab/evaluation.h"
#include "rmlab/nn.h"
#include "rmlab/training.h"
#include "rmlab/workload.h"

namespace rmlab {

enum class Pipeline { BC, PG, BCThenPG };
enum class PolicyKind { CNN, FullyConnected };

std::string to_string(Pipeline p);
Pipeline pipeline_from_string(const std::string& s);
std::string to_string(PolicyKind p);
PolicyKind policy_kind_from_string(const std::string& s);

// Everything a run needs. env.r / env.arrival_window must agree with the
// workload; in offline mode num_slots equals workload.num_jobs and there is
// no backlog. The training arrival rate is derived from `load`.
struct RunConfig {
  std::string preset = "paper";
  Pipeline pipeline = Pipeline::BCThenPG;
  PolicyKind policy = PolicyKind::CNN;
  int fc_hidden = 20;
  double load = 1.0;
  std::uint64_t seed = 1;
  std::string out = "runs/default";
  WorkloadConfig workload;
  EnvConfig env;
  TrainConfig train;
  SweepSpec eval;

  // Full-scale defaults (20x20 cluster image, 10 slots, backlog 60, 50-step
  // arrival window, 100 jobsets x 20 rollouts, 500 epochs).
  static RunConfig paper(Mode mode = Mode::Online);
  // Small preset for minute-scale runs.
  static RunConfig desk(Mode mode = Mode::Online);
  static RunConfig preset_named(const std::string& name, Mode mode = Mode::Online);

  // Derives dependent fields and validates every section.
  void resolve();
  nn::NetSpec net_spec() const;
};

nlohmann::json to_json(const RunConfig& c);
// Overlays `j` onto the preset it names (default "paper"); unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace rmlab
