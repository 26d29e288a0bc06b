#include "rmlab/config.h"

#include <fstream>
#include <stdexcept>

#include "rmlab/json_util.h"

namespace rmlab {

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::BC: return "bc";
    case Pipeline::PG: return "pg";
    case Pipeline::BCThenPG: return "bc-then-pg";
  }
  return "?";
}

Pipeline pipeline_from_string(const std::string& s) {
  if (s == "bc") return Pipeline::BC;
  if (s == "pg") return Pipeline::PG;
  if (s == "bc-then-pg") return Pipeline::BCThenPG;
  throw std::invalid_argument("unknown pipeline '" + s + "' (bc, pg, bc-then-pg)");
}

std::string to_string(PolicyKind p) { return p == PolicyKind::CNN ? "cnn" : "fc"; }

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "cnn") return PolicyKind::CNN;
  if (s == "fc") return PolicyKind::FullyConnected;
  throw std::invalid_argument("unknown policy kind '" + s + "' (cnn, fc)");
}

RunConfig RunConfig::paper(Mode mode) {
  RunConfig c;
  c.preset = "paper";
  c.env.mode = mode;
  c.workload.num_jobs = 15;
  c.load = 1.0;
  c.eval.loads = SweepSpec::default_loads();
  c.eval.agents = {"sjf", "packer", "random"};
  c.eval.seeds_per_cell = 100;
  c.resolve();
  return c;
}

RunConfig RunConfig::desk(Mode mode) {
  RunConfig c;
  c.preset = "desk";
  c.env.mode = mode;
  c.workload.r = 10;
  c.workload.arrival_window = 25;
  // Long jobs scaled with the 10-row horizon so every job fits the image.
  c.workload.long_duration = {5, 8};
  c.workload.num_jobs = 15;
  c.env.r = 10;
  c.env.time_horizon = 10;
  c.env.num_slots = 5;
  c.env.backlog_capacity = 30;
  c.env.arrival_window = 25;
  c.train.jobsets_per_epoch = 20;
  c.train.rollouts_per_jobset = 10;
  c.train.epochs = 150;
  c.train.bc_jobsets = 100;
  c.load = 0.9;
  c.eval.loads = SweepSpec::default_loads();
  c.eval.agents = {"sjf", "packer", "random"};
  c.eval.seeds_per_cell = 100;
  c.resolve();
  return c;
}

RunConfig RunConfig::preset_named(const std::string& name, Mode mode) {
  if (name == "paper") return paper(mode);
  if (name == "desk") return desk(mode);
  throw std::invalid_argument("unknown preset '" + name + "' (paper, desk)");
}

void RunConfig::resolve() {
  if (env.r != workload.r) throw std::invalid_argument("env.r must equal workload.r");
  if (env.arrival_window != workload.arrival_window) {
    throw std::invalid_argument("env.arrival_window must equal workload.arrival_window");
  }
  if (env.mode == Mode::Offline) {
    env.num_slots = workload.num_jobs;
    env.backlog_capacity = 0;
  }
  if (!(load >= 0.0)) throw std::invalid_argument("load must be >= 0");
  workload.arrival_rate = rate_for_load(workload, load);
  train.seed = seed;
  eval.seed = seed;
  eval.gamma = train.gamma;
  eval.workers = train.workers;
  eval.workload = workload;
  eval.env = env;
  workload.validate();
  env.validate();
  train.validate();
  if (workload.max_duration() > env.time_horizon) {
    throw std::invalid_argument("longest job duration exceeds time_horizon; such jobs could never be scheduled");
  }
  if (workload.primary_demand().hi > env.r) throw std::invalid_argument("demands exceed capacity");
  if (fc_hidden < 1) throw std::invalid_argument("fc_hidden must be positive");
}

nn::NetSpec RunConfig::net_spec() const {
  return policy == PolicyKind::CNN ? nn::NetSpec::standard_cnn(env) : nn::NetSpec::fully_connected(env, fc_hidden);
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json eval = c.eval;
  return {{"preset", c.preset},
          {"pipeline", to_string(c.pipeline)},
          {"policy", to_string(c.policy)},
          {"fc_hidden", c.fc_hidden},
          {"load", c.load},
          {"seed", c.seed},
          {"out", c.out},
          {"workload", c.workload},
          {"env", c.env},
          {"train", c.train},
          {"eval", eval}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"preset", "pipeline", "policy", "fc_hidden", "load", "seed", "out", "workload", "env",
                         "train", "eval"},
                     "config");
  Mode mode = Mode::Online;
  if (j.contains("env") && j["env"].contains("mode")) mode = mode_from_string(j["env"]["mode"].get<std::string>());
  RunConfig c = RunConfig::preset_named(j.value("preset", std::string("paper")), mode);
  if (j.contains("pipeline")) c.pipeline = pipeline_from_string(j["pipeline"].get<std::string>());
  if (j.contains("policy")) c.policy = policy_kind_from_string(j["policy"].get<std::string>());
  read_opt(j, "fc_hidden", c.fc_hidden);
  read_opt(j, "load", c.load);
  read_opt(j, "seed", c.seed);
  read_opt(j, "out", c.out);
  if (j.contains("workload")) from_json(j["workload"], c.workload);
  if (j.contains("env")) from_json(j["env"], c.env);
  if (j.contains("train")) from_json(j["train"], c.train);
  if (j.contains("eval")) from_json(j["eval"], c.eval);
  c.resolve();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return run_config_from_json(nlohmann::json::parse(in));
}

}  // namespace rmlab
