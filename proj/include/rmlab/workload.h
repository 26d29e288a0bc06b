#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmlab/rng.h"

namespace rmlab {

inline constexpr int kNumResources = 2;

enum class Mode { Online, Offline };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct Job {
  int id = 0;
  std::array<int, kNumResources> demand{};
  int duration = 1;  // ideal completion time T_j
  int arrival_time = 0;

  bool operator==(const Job&) const = default;
};

// Inclusive integer range.
struct IntRange {
  int lo = 0;
  int hi = 0;

  bool operator==(const IntRange&) const = default;
  int size() const { return hi - lo + 1; }
  double mean() const { return 0.5 * (lo + hi); }
};

struct WorkloadConfig {
  int r = 20;
  int num_resources = kNumResources;
  IntRange short_duration{1, 3};
  IntRange long_duration{10, 15};
  double short_prob = 0.8;
  // Demand ranges as fractions of r; discretized with ceil on both ends.
  double primary_lo = 0.5, primary_hi = 1.0;
  double secondary_lo = 0.1, secondary_hi = 0.2;
  int arrival_window = 50;
  double arrival_rate = 0.7;
  int num_jobs = 15;

  bool operator==(const WorkloadConfig&) const = default;

  IntRange primary_demand() const;
  IntRange secondary_demand() const;
  int max_duration() const;

  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct Jobset {
  std::vector<Job> jobs;
  Mode mode = Mode::Online;
  std::uint64_t seed = 0;
  int r = 20;
  double nominal_load = 0.0;

  bool operator==(const Jobset&) const = default;
};

Job sample_job(Rng& rng, const WorkloadConfig& config, int id, int arrival_time);

// Online: for each timestep in [0, arrival_window), floor(rate) arrivals plus
// one more with probability rate - floor(rate). Offline: num_jobs at time 0.
Jobset generate_jobset(Rng& rng, const WorkloadConfig& config, Mode mode, std::uint64_t seed = 0);
Jobset generate_jobset(std::uint64_t seed, const WorkloadConfig& config, Mode mode);

double expected_duration(const WorkloadConfig& config);
double expected_demand_sum(const WorkloadConfig& config);

// Offered load: rate * E[sum_k demand_k * duration] / (num_resources * r).
double compute_load(const WorkloadConfig& config);
double rate_for_load(const WorkloadConfig& config, double target_load);

// Realized load of a jobset over its arrival window.
double empirical_load(const Jobset& jobset, int arrival_window);

nlohmann::json jobset_to_json(const Jobset& jobset);
Jobset jobset_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const WorkloadConfig& c);
void from_json(const nlohmann::json& j, WorkloadConfig& c);

}  // namespace rmlab
