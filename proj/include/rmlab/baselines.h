#pragma once

#include <memory>
#include <string>

#include "rmlab/environment.h"
#include "rmlab/rng.h"

namespace rmlab {

struct AgentDecision {
  Action action;
  bool fits_now = false;  // some waiting job could start at offset 0
};

// Shortest fitting job (offset 0 only); ties to the lowest slot; else void.
AgentDecision sjf_decision(const Environment& env);
// Fitting job with the largest demand . free-capacity alignment score.
AgentDecision packer_decision(const Environment& env);

inline Action sjf_action(const Environment& env) { return sjf_decision(env).action; }
inline Action packer_action(const Environment& env) { return packer_decision(env).action; }
Action random_action(const Environment& env, Rng& rng);

// Alignment score of placing `job` now: sum_k demand[k] * (r - occupied(k, 0)).
long packer_score(const Environment& env, const Job& job);

class SjfAgent : public Agent {
 public:
  Action act(const Environment& env, const StateImage&) override { return sjf_action(env); }
  std::string name() const override { return "sjf"; }
};

class PackerAgent : public Agent {
 public:
  Action act(const Environment& env, const StateImage&) override { return packer_action(env); }
  std::string name() const override { return "packer"; }
};

class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  Action act(const Environment& env, const StateImage&) override { return random_action(env, rng_); }
  std::string name() const override { return "random"; }

 private:
  Rng rng_;
};

class VoidAgent : public Agent {
 public:
  Action act(const Environment& env, const StateImage&) override { return {env.config().void_action()}; }
  std::string name() const override { return "void"; }
};

// "sjf", "packer", "random" or "void". Policy agents live in training.h.
std::unique_ptr<Agent> make_heuristic_agent(const std::string& name, std::uint64_t seed);

}  // namespace rmlab
