#include "rmlab/training.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "rmlab/json_util.h"

namespace rmlab {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0,1]");
  if (!(learning_rate >= 0.0) || !(bc_learning_rate >= 0.0)) fail("learning rates must be >= 0");
  if (jobsets_per_epoch < 1 || epochs < 0 || bc_patience < 1 || bc_max_epochs < 0 || bc_batch_size < 1 ||
      bc_jobsets < 1 || checkpoint_every < 1 || workers < 0) {
    fail("counts must be positive");
  }
  if (rollouts_per_jobset < 2) fail("rollouts_per_jobset must be >= 2 for the baseline");
  if (!(bc_validation_fraction >= 0.0 && bc_validation_fraction < 1.0)) fail("bc_validation_fraction in [0,1)");
}

nn::OptimizerConfig TrainConfig::pg_optimizer() const {
  return {learning_rate, rms_decay, rms_epsilon, plain_sgd};
}

nn::OptimizerConfig TrainConfig::bc_optimizer() const {
  return {bc_learning_rate, rms_decay, rms_epsilon, plain_sgd};
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"gamma", c.gamma},
       {"learning_rate", c.learning_rate},
       {"rms_decay", c.rms_decay},
       {"rms_epsilon", c.rms_epsilon},
       {"plain_sgd", c.plain_sgd},
       {"jobsets_per_epoch", c.jobsets_per_epoch},
       {"rollouts_per_jobset", c.rollouts_per_jobset},
       {"epochs", c.epochs},
       {"bc_patience", c.bc_patience},
       {"bc_max_epochs", c.bc_max_epochs},
       {"bc_batch_size", c.bc_batch_size},
       {"bc_learning_rate", c.bc_learning_rate},
       {"bc_jobsets", c.bc_jobsets},
       {"bc_validation_fraction", c.bc_validation_fraction},
       {"checkpoint_every", c.checkpoint_every},
       {"greedy_rollouts", c.greedy_rollouts},
       {"workers", c.workers},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  require_known_keys(j,
                     {"gamma", "learning_rate", "rms_decay", "rms_epsilon", "plain_sgd", "jobsets_per_epoch",
                      "rollouts_per_jobset", "epochs", "bc_patience", "bc_max_epochs", "bc_batch_size",
                      "bc_learning_rate", "bc_jobsets", "bc_validation_fraction", "checkpoint_every",
                      "greedy_rollouts", "workers", "seed"},
                     "train");
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "rms_decay", c.rms_decay);
  read_opt(j, "rms_epsilon", c.rms_epsilon);
  read_opt(j, "plain_sgd", c.plain_sgd);
  read_opt(j, "jobsets_per_epoch", c.jobsets_per_epoch);
  read_opt(j, "rollouts_per_jobset", c.rollouts_per_jobset);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "bc_patience", c.bc_patience);
  read_opt(j, "bc_max_epochs", c.bc_max_epochs);
  read_opt(j, "bc_batch_size", c.bc_batch_size);
  read_opt(j, "bc_learning_rate", c.bc_learning_rate);
  read_opt(j, "bc_jobsets", c.bc_jobsets);
  read_opt(j, "bc_validation_fraction", c.bc_validation_fraction);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "greedy_rollouts", c.greedy_rollouts);
  read_opt(j, "workers", c.workers);
  read_opt(j, "seed", c.seed);
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> v(rewards.size());
  double next = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) next = v[t] = rewards[t] + gamma * next;
  return v;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) r[i] = steps[i].reward;
  return r;
}

std::vector<double> time_baseline(const std::vector<Trajectory>& rollouts) {
  std::size_t longest = 0;
  for (const auto& t : rollouts) longest = std::max(longest, t.returns.size());
  std::vector<double> baseline(longest, 0.0);
  for (std::size_t t = 0; t < longest; ++t) {
    // Incremental mean: exact when all contributions are equal.
    double mean = 0.0;
    int count = 0;
    for (const auto& traj : rollouts) {
      if (t >= traj.returns.size()) continue;
      ++count;
      mean += (traj.returns[t] - mean) / count;
    }
    baseline[t] = mean;
  }
  return baseline;
}

SchedulingTask::SchedulingTask(EnvConfig config, Jobset jobset) : env_(config), jobset_(std::move(jobset)) {}

EpisodicTask::Step SchedulingTask::reset() {
  auto out = env_.reset(jobset_);
  return {std::move(out.image), out.reward, out.done};
}

EpisodicTask::Step SchedulingTask::step(int action) {
  auto out = env_.step({action});
  return {std::move(out.image), out.reward, out.done};
}

std::vector<double> SchedulingTask::slowdowns() const {
  std::vector<double> s;
  for (const auto& r : env_.finished()) {
    if (!r.censored) s.push_back(r.slowdown());
  }
  return s;
}

namespace {

int sample_action(std::span<const double> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  // Rounding left u above the final cumulative sum; take the last non-zero entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

template <typename Fn>
void parallel_for_workers(int workers, Fn&& fn) {
  if (workers <= 1) {
    fn(0);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

Trajectory rollout(const nn::PolicyNet& net, EpisodicTask& task, Rng& rng, bool greedy, double gamma,
                   bool keep_activations) {
  Trajectory traj;
  nn::ForwardCache scratch;
  auto current = task.reset();
  while (!current.done) {
    TrajectoryStep step;
    if (task.decision_point()) {
      nn::ForwardCache& cache = keep_activations ? traj.activations.emplace_back() : scratch;
      auto probs = net.forward(current.image, cache);
      step.action = greedy ? nn::argmax(probs) : sample_action(probs, rng);
      traj.entropy_sum += nn::entropy(probs);
      step.image = static_cast<int>(traj.images.size());
      traj.images.push_back(std::move(current.image));
    } else {
      step.action = task.default_action();
    }
    current = task.step(step.action);
    step.reward = current.reward;
    traj.steps.push_back(step);
  }
  traj.returns = compute_returns(traj.rewards(), gamma);
  for (double s : task.slowdowns()) {
    traj.slowdown_sum += s;
    ++traj.slowdown_count;
  }
  return traj;
}

PolicyAgent::PolicyAgent(std::shared_ptr<const nn::PolicyNet> net, bool greedy, std::uint64_t seed)
    : net_(std::move(net)), greedy_(greedy), rng_(seed) {}

Action PolicyAgent::act(const Environment& env, const StateImage& image) {
  if (!env.any_slot_occupied()) return {env.config().void_action()};
  auto probs = net_->forward(image, cache_);
  return {greedy_ ? nn::argmax(probs) : sample_action(probs, rng_)};
}

BCDataset collect_demonstrations(const std::vector<Jobset>& jobsets, Agent& teacher, const EnvConfig& env_config,
                                 double validation_fraction) {
  if (jobsets.empty()) throw std::invalid_argument("collect_demonstrations: no jobsets");
  const std::size_t n = jobsets.size();
  std::size_t n_val = n >= 2 ? static_cast<std::size_t>(std::ceil(validation_fraction * n)) : 0;
  n_val = std::min(n_val, n - 1);
  BCDataset data;
  for (std::size_t i = 0; i < n; ++i) {
    const bool val = i >= n - n_val;
    auto record = run_episode(jobsets[i], env_config, teacher, {.record_images = true});
    auto& split = val ? data.validation : data.train;
    (val ? data.validation_seeds : data.train_seeds).push_back(jobsets[i].seed);
    for (std::size_t s = 0; s < record.steps.size(); ++s) {
      split.push_back({std::move(record.images[s]), record.steps[s].action, jobsets[i].seed});
    }
  }
  return data;
}

double action_accuracy(const nn::PolicyNet& net, const std::vector<BCExample>& examples) {
  if (examples.empty()) return 0.0;
  nn::ForwardCache cache;
  std::size_t hits = 0;
  for (const auto& ex : examples) hits += nn::argmax(net.forward(ex.image, cache)) == ex.action;
  return static_cast<double>(hits) / examples.size();
}

double mean_cross_entropy(const nn::PolicyNet& net, const std::vector<BCExample>& examples) {
  if (examples.empty()) return 0.0;
  nn::ForwardCache cache;
  double loss = 0.0;
  for (const auto& ex : examples) loss -= std::log(net.forward(ex.image, cache)[ex.action]);
  return loss / examples.size();
}

namespace {

// One forward pass per example: (mean loss, accuracy).
std::pair<double, double> loss_and_accuracy(const nn::PolicyNet& net, const std::vector<BCExample>& examples) {
  if (examples.empty()) return {0.0, 0.0};
  nn::ForwardCache cache;
  double loss = 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    auto probs = net.forward(ex.image, cache);
    loss -= std::log(probs[ex.action]);
    hits += nn::argmax(probs) == ex.action;
  }
  return {loss / examples.size(), static_cast<double>(hits) / examples.size()};
}

}  // namespace

BCResult train_bc(const BCDataset& dataset, const nn::PolicyNet& init, const TrainConfig& config) {
  if (dataset.train.empty()) throw std::invalid_argument("train_bc: empty training split");
  const bool has_val = !dataset.validation.empty();
  nn::PolicyNet net = init;
  auto optimizer = nn::make_optimizer(net, config.bc_optimizer());

  auto evaluate = [&](int epoch) {
    BCEpochStats stats;
    stats.epoch = epoch;
    std::tie(stats.train_loss, stats.train_accuracy) = loss_and_accuracy(net, dataset.train);
    stats.validation_accuracy = has_val ? action_accuracy(net, dataset.validation) : stats.train_accuracy;
    if (!std::isfinite(stats.train_loss)) {
      throw std::runtime_error("train_bc: non-finite loss at epoch " + std::to_string(epoch));
    }
    return stats;
  };

  BCResult result{net, {evaluate(0)}, 0};
  double best = result.history[0].validation_accuracy;
  int stale = 0;
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);
  nn::ForwardCache cache;
  auto grads = net.make_gradients();
  std::vector<double> dlogits(net.spec().num_actions);
  for (int epoch = 1; epoch <= config.bc_max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, seed_space::kShuffle, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.bc_batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.bc_batch_size);
      grads.zero();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& ex = dataset.train[order[i]];
        auto probs = net.forward(ex.image, cache);
        nn::cross_entropy_logit_grad(probs, ex.action, dlogits);
        net.backward(cache, dlogits, grads);
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (auto& g : grads.values) g *= scale;
      auto update = nn::apply_update(net, optimizer, grads, nn::Direction::Descent);
      if (!update.applied) throw std::runtime_error("train_bc: " + update.diagnostic);
    }
    auto stats = evaluate(epoch);
    result.history.push_back(stats);
    if (stats.validation_accuracy > best) {
      best = stats.validation_accuracy;
      result.net = net;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.bc_patience) {
      break;
    }
  }
  return result;
}

PgGradient pg_gradient(const TaskFactory& make_task, std::size_t groups, const nn::PolicyNet& net,
                       const TrainConfig& config, int epoch) {
  const int workers = std::min<int>(resolve_workers(config.workers), static_cast<int>(std::max<std::size_t>(groups, 1)));
  const int N = config.rollouts_per_jobset;
  const std::uint64_t epoch_seed = derive_seed(config.seed, seed_space::kRollout, static_cast<std::uint64_t>(epoch));

  struct Partial {
    nn::Gradients grads;
    std::vector<double> v0;
    double entropy = 0.0;
    double slowdown_sum = 0.0;
    long slowdown_count = 0;
    std::size_t decisions = 0;
  };
  std::vector<Partial> partials(workers);

  parallel_for_workers(workers, [&](int w) {
    Partial& part = partials[w];
    part.grads = net.make_gradients();
    std::vector<double> dlogits(net.spec().num_actions);
    for (std::size_t g = w; g < groups; g += workers) {
      auto task = make_task(g);
      std::vector<Trajectory> rollouts;
      rollouts.reserve(N);
      for (int n = 0; n < N; ++n) {
        Rng rng(derive_seed(epoch_seed, g, n));
        rollouts.push_back(rollout(net, *task, rng, config.greedy_rollouts, config.gamma, true));
      }
      const auto baseline = time_baseline(rollouts);
      for (auto& traj : rollouts) {
        part.v0.push_back(traj.returns.empty() ? 0.0 : traj.returns[0]);
        part.entropy += traj.entropy_sum;
        part.slowdown_sum += traj.slowdown_sum;
        part.slowdown_count += traj.slowdown_count;
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
          const auto& step = traj.steps[t];
          if (step.image < 0) continue;
          ++part.decisions;
          const double advantage = traj.returns[t] - baseline[t];
          if (advantage == 0.0) continue;
          auto& cache = traj.activations[step.image];
          nn::log_prob_logit_grad(cache.probs, step.action, advantage, dlogits);
          net.backward(cache, dlogits, part.grads);
        }
      }
    }
  });

  PgGradient out{net.make_gradients(), {}};
  auto& stats = out.stats;
  stats.epoch = epoch;
  stats.max_discounted_reward = -std::numeric_limits<double>::infinity();
  double v0_sum = 0.0, entropy_sum = 0.0, slowdown_sum = 0.0;
  long slowdown_count = 0;
  for (const auto& part : partials) {
    for (std::size_t i = 0; i < out.grads.values.size(); ++i) out.grads.values[i] += part.grads.values[i];
    for (double v : part.v0) {
      v0_sum += v;
      stats.max_discounted_reward = std::max(stats.max_discounted_reward, v);
    }
    stats.rollouts += part.v0.size();
    stats.decision_steps += part.decisions;
    entropy_sum += part.entropy;
    slowdown_sum += part.slowdown_sum;
    slowdown_count += part.slowdown_count;
  }
  if (stats.rollouts > 0) {
    const double scale = 1.0 / static_cast<double>(stats.rollouts);
    for (auto& g : out.grads.values) g *= scale;
    stats.mean_discounted_reward = v0_sum / stats.rollouts;
  }
  stats.entropy = stats.decision_steps > 0 ? entropy_sum / stats.decision_steps : 0.0;
  stats.mean_slowdown = slowdown_count > 0 ? slowdown_sum / slowdown_count : std::nan("");
  return out;
}

PgEpochStats pg_epoch(const TaskFactory& make_task, std::size_t groups, nn::PolicyNet& net,
                      nn::OptimizerState& optimizer, const TrainConfig& config, int epoch) {
  auto pg = pg_gradient(make_task, groups, net, config, epoch);
  auto result = nn::apply_update(net, optimizer, pg.grads, nn::Direction::Ascent);
  pg.stats.updated = result.applied;
  pg.stats.diagnostic = result.diagnostic;
  return pg.stats;
}

PgEpochStats pg_epoch(const std::vector<Jobset>& jobsets, nn::PolicyNet& net, nn::OptimizerState& optimizer,
                      const TrainConfig& config, const EnvConfig& env_config, int epoch) {
  TaskFactory factory = [&](std::size_t g) { return std::make_unique<SchedulingTask>(env_config, jobsets[g]); };
  return pg_epoch(factory, jobsets.size(), net, optimizer, config, epoch);
}

}  // namespace rmlab
