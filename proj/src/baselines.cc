#include "rmlab/baselines.h"

#include <stdexcept>

namespace rmlab {

AgentDecision sjf_decision(const Environment& env) {
  const auto& slots = env.slots();
  int best = -1;
  for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
    if (!slots[i] || !env.fits_at(*slots[i], 0)) continue;
    if (best < 0 || slots[i]->duration < slots[best]->duration) best = i;
  }
  if (best < 0) return {{env.config().void_action()}, false};
  return {{best}, true};
}

long packer_score(const Environment& env, const Job& job) {
  long score = 0;
  for (int k = 0; k < env.config().num_resources; ++k) {
    score += static_cast<long>(job.demand[k]) * (env.config().r - env.occupied(k, 0));
  }
  return score;
}

AgentDecision packer_decision(const Environment& env) {
  const auto& slots = env.slots();
  int best = -1;
  long best_score = -1;
  for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
    if (!slots[i] || !env.fits_at(*slots[i], 0)) continue;
    const long score = packer_score(env, *slots[i]);
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  if (best < 0) return {{env.config().void_action()}, false};
  return {{best}, true};
}

Action random_action(const Environment& env, Rng& rng) {
  return {std::uniform_int_distribution<int>(0, env.config().num_slots)(rng)};
}

std::unique_ptr<Agent> make_heuristic_agent(const std::string& name, std::uint64_t seed) {
  if (name == "sjf") return std::make_unique<SjfAgent>();
  if (name == "packer") return std::make_unique<PackerAgent>();
  if (name == "random") return std::make_unique<RandomAgent>(seed);
  if (name == "void") return std::make_unique<VoidAgent>();
  throw std::invalid_argument("unknown agent '" + name + "'");
}

}  // namespace rmlab
