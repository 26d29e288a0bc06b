#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmlab/environment.h"
#include "rmlab/workload.h"

namespace rmlab {

// Mean S_j over finished, uncensored jobs of all records. Throws if none.
double average_slowdown(const std::vector<EpisodeRecord>& records);
double average_slowdown(const EpisodeRecord& record);
std::vector<double> slowdowns(const EpisodeRecord& record);

// Last completion minus earliest arrival; nullopt when the episode hit the cap.
std::optional<int> completion_time(const EpisodeRecord& record);

int censored_count(const EpisodeRecord& record);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

// Linear interpolation between order statistics (position q * (n - 1)).
double quantile(std::vector<double> values, double q);
Quartiles quartiles(std::span<const double> values);

struct DurationBucket {
  int duration = 0;
  Quartiles stats;
  bool sparse = false;  // fewer than min_count samples
};

std::vector<DurationBucket> slowdown_by_duration(const std::vector<EpisodeRecord>& records, std::size_t min_count = 5);
void write_duration_csv(const std::vector<DurationBucket>& buckets, const std::string& agent, const std::string& path);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t n = 0;
};
MeanStd mean_std(std::span<const double> values);

// One-sided paired t-test of H1: mean(a - b) < 0.
struct PairedTest {
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};
PairedTest paired_less_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

struct SweepSpec {
  std::vector<double> loads;
  std::vector<std::string> agents;
  int seeds_per_cell = 100;
  std::uint64_t seed = 1;
  double gamma = 0.99;
  int workers = 0;
  WorkloadConfig workload;
  EnvConfig env;

  static std::vector<double> default_loads();  // 0.1 .. 1.9 step 0.1
  void validate() const;
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);

struct SweepRow {
  double load = 0.0;
  std::string agent;
  std::uint64_t seed = 0;
  double slowdown = 0.0;           // NaN if no job finished
  std::optional<int> makespan;     // empty when censored
  double discounted_reward = 0.0;
  double total_reward = 0.0;
  int dropped = 0;
  int censored = 0;
};

struct CellReport {
  double load = 0.0;
  std::string agent;
  MeanStd slowdown;
  MeanStd makespan;
  MeanStd discounted_reward;
  double max_discounted_reward = 0.0;
  int dropped = 0;
  int censored = 0;
  std::vector<DurationBucket> by_duration;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<CellReport> cells;
  std::vector<std::uint64_t> jobset_seeds;
};

using AgentFactory = std::function<std::unique_ptr<Agent>(const std::string& name, std::uint64_t seed)>;

// Seeds of held-out jobsets for load index `cell`; namespace disjoint from training.
std::uint64_t eval_jobset_seed(std::uint64_t seed, std::size_t load_index, std::size_t i);
std::uint64_t train_jobset_seed(std::uint64_t seed, std::size_t i);
// Throws std::logic_error if any seed is shared.
void assert_disjoint(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// Jobsets for a load sweep cell: the workload rate is set from the load.
std::vector<Jobset> heldout_jobsets(const SweepSpec& spec, std::size_t load_index);

SweepResult run_sweep(const SweepSpec& spec, const AgentFactory& factory,
                      const std::function<void(const EpisodeRecord&, const SweepRow&)>& on_episode = {});

// Runs each agent on the same jobsets; records kept for further analysis.
std::vector<EpisodeRecord> evaluate_agent(const std::vector<Jobset>& jobsets, const EnvConfig& env,
                                          const AgentFactory& factory, const std::string& agent,
                                          std::uint64_t seed, int workers = 1);

void write_sweep_csv(const SweepResult& result, const std::string& path);
void write_report_csv(const SweepResult& result, const std::string& path);
void write_duration_report_csv(const SweepResult& result, const std::string& path);
void write_sidecar(const std::string& csv_path, const nlohmann::json& config);

struct CurveLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> series(const std::string& name) const;
};

CurveLog read_metrics_csv(const std::string& path);

struct CurveSummary {
  std::size_t epochs = 0;
  std::size_t quartile_len = 0;
  std::map<std::string, double> first_quartile_mean;
  std::map<std::string, double> last_quartile_mean;
  std::map<std::string, double> trend;  // last - first
};

CurveSummary summarize_curves(const CurveLog& log);
void write_curves_csv(const CurveLog& log, const std::string& path);

}  // namespace rmlab
