#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmlab/training.h"

namespace rmlab {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Gradient checks on `count` random reduced standard-CNN-shaped networks, both heads.
// `fault_layer` flips the sign of that layer's weight gradient.
CheckResult check_gradients(std::uint64_t seed, int count = 5, std::optional<int> fault_layer = std::nullopt);

// Random-action episodes at each load; any invariant violation fails.
CheckResult check_environment_fuzz(std::uint64_t seed, int episodes, const std::vector<double>& loads);

// compute_returns against a direct double sum on random sequences.
CheckResult check_returns(std::uint64_t seed, int sequences = 1000);

// Two-action one-step task paying +1 for action 0 and -1 for action 1.
class BanditTask : public EpisodicTask {
 public:
  Step reset() override;
  Step step(int action) override;
  int num_actions() const override { return 2; }
};

struct BanditOutcome {
  double final_probability = 0.0;  // pi(+1 action)
  int epochs = 0;                  // epochs run until the threshold was crossed (or the limit)
};

BanditOutcome train_bandit(std::uint64_t seed, int max_epochs = 200, double threshold = 0.9);

CheckResult check_bandit(std::uint64_t seed, int seeds = 10);

std::vector<CheckResult> run_selftest(std::uint64_t seed, std::optional<int> fault_layer = std::nullopt);

}  // namespace rmlab
