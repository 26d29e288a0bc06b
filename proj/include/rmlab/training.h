#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmlab/environment.h"
#include "rmlab/nn.h"
#include "rmlab/rng.h"
#include "rmlab/workload.h"

namespace rmlab {

struct TrainConfig {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  bool plain_sgd = false;
  int jobsets_per_epoch = 100;
  int rollouts_per_jobset = 20;
  int epochs = 500;
  int bc_patience = 5;
  int bc_max_epochs = 50;
  int bc_batch_size = 32;
  double bc_learning_rate = 1e-3;
  int bc_jobsets = 100;
  double bc_validation_fraction = 0.1;
  int checkpoint_every = 10;
  bool greedy_rollouts = false;  // argmax instead of sampling (degenerate, for tests)
  int workers = 0;               // 0 = hardware concurrency
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
  void validate() const;
  nn::OptimizerConfig pg_optimizer() const;
  nn::OptimizerConfig bc_optimizer() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// v_t = r_t + gamma * v_{t+1}, v after the last step = 0.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);

struct TrajectoryStep {
  int action = 0;
  double reward = 0.0;
  int image = -1;  // index into Trajectory::images; -1 when the step was not a decision
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<StateImage> images;
  std::vector<nn::ForwardCache> activations;  // parallel to images when kept
  std::vector<double> returns;
  double entropy_sum = 0.0;
  double slowdown_sum = 0.0;
  int slowdown_count = 0;

  std::size_t length() const { return steps.size(); }
  std::vector<double> rewards() const;
};

// Per-timestep-index mean of the returns of rollouts long enough to reach t.
std::vector<double> time_baseline(const std::vector<Trajectory>& rollouts);

// A single-agent episodic problem the policy-gradient trainer can drive.
class EpisodicTask {
 public:
  virtual ~EpisodicTask() = default;
  struct Step {
    StateImage image;
    double reward = 0.0;
    bool done = false;
  };
  virtual Step reset() = 0;
  virtual Step step(int action) = 0;
  virtual int num_actions() const = 0;
  // False when every action leads to the same transition; the trainer then
  // takes `default_action()` without consulting (or crediting) the policy.
  virtual bool decision_point() const { return true; }
  virtual int default_action() const { return 0; }
  // Finished, uncensored job slowdowns of the completed episode.
  virtual std::vector<double> slowdowns() const { return {}; }
};

class SchedulingTask : public EpisodicTask {
 public:
  SchedulingTask(EnvConfig config, Jobset jobset);
  Step reset() override;
  Step step(int action) override;
  int num_actions() const override { return env_.config().num_actions(); }
  bool decision_point() const override { return env_.any_slot_occupied(); }
  int default_action() const override { return env_.config().void_action(); }
  std::vector<double> slowdowns() const override;

 private:
  Environment env_;
  Jobset jobset_;
};

using TaskFactory = std::function<std::unique_ptr<EpisodicTask>(std::size_t group)>;

// Runs one episode sampling actions from the policy (argmax if greedy).
// With keep_activations the forward cache of every decision is retained so
// gradients can be taken later without a second forward pass.
Trajectory rollout(const nn::PolicyNet& net, EpisodicTask& task, Rng& rng, bool greedy, double gamma,
                   bool keep_activations = false);

// Evaluation agent backed by a network; argmax by default. Takes the void
// action without a forward pass when no slot holds a job.
class PolicyAgent : public Agent {
 public:
  explicit PolicyAgent(std::shared_ptr<const nn::PolicyNet> net, bool greedy = true, std::uint64_t seed = 0);
  Action act(const Environment& env, const StateImage& image) override;
  bool uses_image() const override { return true; }
  std::string name() const override { return "policy"; }

 private:
  std::shared_ptr<const nn::PolicyNet> net_;
  bool greedy_;
  Rng rng_;
  nn::ForwardCache cache_;
};

struct BCExample {
  StateImage image;
  int action = 0;
  std::uint64_t jobset_seed = 0;
};

struct BCDataset {
  std::vector<BCExample> train;
  std::vector<BCExample> validation;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> validation_seeds;

  std::size_t size() const { return train.size() + validation.size(); }
};

// Runs the teacher on each jobset and records every (image, action) pair. The
// last ceil(fraction * n) jobsets form the validation split.
BCDataset collect_demonstrations(const std::vector<Jobset>& jobsets, Agent& teacher, const EnvConfig& env_config,
                                 double validation_fraction = 0.1);

struct BCEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct BCResult {
  nn::PolicyNet net;  // best-validation parameters
  std::vector<BCEpochStats> history;  // history[0] is the initial network
  int best_epoch = 0;
};

double action_accuracy(const nn::PolicyNet& net, const std::vector<BCExample>& examples);
double mean_cross_entropy(const nn::PolicyNet& net, const std::vector<BCExample>& examples);

// Mini-batch cross-entropy descent with early stopping on validation accuracy.
BCResult train_bc(const BCDataset& dataset, const nn::PolicyNet& init, const TrainConfig& config);

struct PgEpochStats {
  int epoch = 0;
  double mean_discounted_reward = 0.0;
  double max_discounted_reward = 0.0;
  double mean_slowdown = 0.0;  // NaN when no job finished
  double entropy = 0.0;        // mean over decision steps
  std::size_t rollouts = 0;
  std::size_t decision_steps = 0;
  bool updated = false;
  std::string diagnostic;
};

// Accumulated sum over rollouts of grad log pi(a_t|s_t) * (v_t - b_t),
// divided by the number of rollouts. Exposed for tests.
struct PgGradient {
  nn::Gradients grads;
  PgEpochStats stats;
};

PgGradient pg_gradient(const TaskFactory& make_task, std::size_t groups, const nn::PolicyNet& net,
                       const TrainConfig& config, int epoch);

PgEpochStats pg_epoch(const TaskFactory& make_task, std::size_t groups, nn::PolicyNet& net,
                      nn::OptimizerState& optimizer, const TrainConfig& config, int epoch);

PgEpochStats pg_epoch(const std::vector<Jobset>& jobsets, nn::PolicyNet& net, nn::OptimizerState& optimizer,
                      const TrainConfig& config, const EnvConfig& env_config, int epoch);

int resolve_workers(int requested);

}  // namespace rmlab
