#include "rmlab/workload.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmlab/json_util.h"

namespace rmlab {

namespace {

int ceil_units(double fraction, int r) { return static_cast<int>(std::ceil(fraction * r - 1e-9)); }

int uniform_int(Rng& rng, IntRange range) {
  return std::uniform_int_distribution<int>(range.lo, range.hi)(rng);
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::Online ? "online" : "offline"; }

Mode mode_from_string(const std::string& s) {
  if (s == "online") return Mode::Online;
  if (s == "offline") return Mode::Offline;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

IntRange WorkloadConfig::primary_demand() const { return {ceil_units(primary_lo, r), ceil_units(primary_hi, r)}; }

IntRange WorkloadConfig::secondary_demand() const {
  return {ceil_units(secondary_lo, r), ceil_units(secondary_hi, r)};
}

int WorkloadConfig::max_duration() const { return std::max(short_duration.hi, long_duration.hi); }

void WorkloadConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("workload config: " + what); };
  if (r < 1) fail("r must be positive");
  if (num_resources != kNumResources) fail("only two resource types are supported");
  if (!(short_prob > 0.0 && short_prob < 1.0)) fail("short_prob must lie in (0,1)");
  for (auto range : {short_duration, long_duration}) {
    if (range.lo < 1 || range.hi < range.lo) fail("duration ranges must be non-empty and >= 1");
  }
  for (auto range : {primary_demand(), secondary_demand()}) {
    if (range.lo < 1 || range.hi > r || range.hi < range.lo) fail("demand range empty after discretization");
  }
  if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) fail("arrival_rate must be >= 0");
  if (arrival_window < 1) fail("arrival_window must be positive");
}

Job sample_job(Rng& rng, const WorkloadConfig& config, int id, int arrival_time) {
  Job job;
  job.id = id;
  job.arrival_time = arrival_time;
  const bool is_short = std::bernoulli_distribution(config.short_prob)(rng);
  job.duration = uniform_int(rng, is_short ? config.short_duration : config.long_duration);
  const int dominant = std::uniform_int_distribution<int>(0, config.num_resources - 1)(rng);
  for (int k = 0; k < config.num_resources; ++k) {
    job.demand[k] = uniform_int(rng, k == dominant ? config.primary_demand() : config.secondary_demand());
  }
  return job;
}

Jobset generate_jobset(Rng& rng, const WorkloadConfig& config, Mode mode, std::uint64_t seed) {
  config.validate();
  Jobset set;
  set.mode = mode;
  set.seed = seed;
  set.r = config.r;
  int next_id = 0;
  if (mode == Mode::Offline) {
    if (config.num_jobs <= 0) throw std::invalid_argument("offline jobset needs num_jobs > 0");
    for (int i = 0; i < config.num_jobs; ++i) set.jobs.push_back(sample_job(rng, config, next_id++, 0));
    return set;
  }
  const int whole = static_cast<int>(std::floor(config.arrival_rate));
  const double frac = config.arrival_rate - whole;
  std::bernoulli_distribution extra(frac);
  for (int t = 0; t < config.arrival_window; ++t) {
    const int count = whole + (frac > 0.0 && extra(rng) ? 1 : 0);
    for (int i = 0; i < count; ++i) set.jobs.push_back(sample_job(rng, config, next_id++, t));
  }
  set.nominal_load = compute_load(config);
  return set;
}

Jobset generate_jobset(std::uint64_t seed, const WorkloadConfig& config, Mode mode) {
  Rng rng(seed);
  return generate_jobset(rng, config, mode, seed);
}

double expected_duration(const WorkloadConfig& config) {
  return config.short_prob * config.short_duration.mean() + (1.0 - config.short_prob) * config.long_duration.mean();
}

double expected_demand_sum(const WorkloadConfig& config) {
  // One dominant resource, num_resources - 1 secondary ones.
  return config.primary_demand().mean() + (config.num_resources - 1) * config.secondary_demand().mean();
}

double compute_load(const WorkloadConfig& config) {
  // Duration and demand are sampled independently.
  return config.arrival_rate * expected_duration(config) * expected_demand_sum(config) /
         (config.num_resources * config.r);
}

double rate_for_load(const WorkloadConfig& config, double target_load) {
  if (target_load < 0.0) throw std::invalid_argument("target load must be >= 0");
  return target_load * config.num_resources * config.r / (expected_duration(config) * expected_demand_sum(config));
}

double empirical_load(const Jobset& jobset, int arrival_window) {
  double work = 0.0;
  for (const auto& job : jobset.jobs) {
    for (int k = 0; k < kNumResources; ++k) work += static_cast<double>(job.demand[k]) * job.duration;
  }
  return work / (static_cast<double>(arrival_window) * kNumResources * jobset.r);
}

nlohmann::json jobset_to_json(const Jobset& jobset) {
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& job : jobset.jobs) {
    jobs.push_back({{"id", job.id},
                    {"arrival", job.arrival_time},
                    {"duration", job.duration},
                    {"demand", {job.demand[0], job.demand[1]}}});
  }
  return {{"seed", jobset.seed}, {"mode", to_string(jobset.mode)}, {"r", jobset.r}, {"jobs", std::move(jobs)}};
}

Jobset jobset_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"seed", "mode", "r", "jobs"}, "jobset");
  Jobset set;
  set.seed = j.at("seed").get<std::uint64_t>();
  set.mode = mode_from_string(j.at("mode").get<std::string>());
  set.r = j.at("r").get<int>();
  int last_arrival = 0;
  for (const auto& jj : j.at("jobs")) {
    require_known_keys(jj, {"id", "arrival", "duration", "demand"}, "jobset.jobs[]");
    Job job;
    job.id = jj.at("id").get<int>();
    job.arrival_time = jj.at("arrival").get<int>();
    job.duration = jj.at("duration").get<int>();
    const auto& demand = jj.at("demand");
    if (!demand.is_array() || demand.size() != kNumResources) {
      throw std::invalid_argument("jobset: demand must have two entries");
    }
    for (int k = 0; k < kNumResources; ++k) job.demand[k] = demand[k].get<int>();
    if (job.duration < 1 || job.arrival_time < 0) throw std::invalid_argument("jobset: bad duration/arrival");
    if (job.arrival_time < last_arrival) throw std::invalid_argument("jobset: arrivals out of order");
    if (set.mode == Mode::Offline && job.arrival_time != 0) {
      throw std::invalid_argument("jobset: offline jobs must arrive at 0");
    }
    last_arrival = job.arrival_time;
    set.jobs.push_back(job);
  }
  return set;
}

void to_json(nlohmann::json& j, const WorkloadConfig& c) {
  j = {{"r", c.r},
       {"num_resources", c.num_resources},
       {"short_duration", {c.short_duration.lo, c.short_duration.hi}},
       {"long_duration", {c.long_duration.lo, c.long_duration.hi}},
       {"short_prob", c.short_prob},
       {"primary_demand", {c.primary_lo, c.primary_hi}},
       {"secondary_demand", {c.secondary_lo, c.secondary_hi}},
       {"arrival_window", c.arrival_window},
       {"arrival_rate", c.arrival_rate},
       {"num_jobs", c.num_jobs}};
}

void from_json(const nlohmann::json& j, WorkloadConfig& c) {
  require_known_keys(j,
                     {"r", "num_resources", "short_duration", "long_duration", "short_prob", "primary_demand",
                      "secondary_demand", "arrival_window", "arrival_rate", "num_jobs"},
                     "workload");
  read_opt(j, "r", c.r);
  read_opt(j, "num_resources", c.num_resources);
  auto read_range = [&](const char* key, auto& lo, auto& hi) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_array() || it->size() != 2) throw std::invalid_argument(std::string("workload.") + key);
      lo = (*it)[0].get<std::remove_reference_t<decltype(lo)>>();
      hi = (*it)[1].get<std::remove_reference_t<decltype(hi)>>();
    }
  };
  read_range("short_duration", c.short_duration.lo, c.short_duration.hi);
  read_range("long_duration", c.long_duration.lo, c.long_duration.hi);
  read_range("primary_demand", c.primary_lo, c.primary_hi);
  read_range("secondary_demand", c.secondary_lo, c.secondary_hi);
  read_opt(j, "short_prob", c.short_prob);
  read_opt(j, "arrival_window", c.arrival_window);
  read_opt(j, "arrival_rate", c.arrival_rate);
  read_opt(j, "num_jobs", c.num_jobs);
}

}  // namespace rmlab
