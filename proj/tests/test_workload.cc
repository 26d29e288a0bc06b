#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rmlab/workload.h"

using namespace rmlab;

namespace {

WorkloadConfig r20() { return WorkloadConfig{}; }

}  // namespace

TEST(Workload, DiscretizedDemandRangesAtR20) {
  const auto c = r20();
  EXPECT_EQ(c.primary_demand(), (IntRange{10, 20}));
  EXPECT_EQ(c.secondary_demand(), (IntRange{2, 4}));
}

TEST(Workload, DesignValuesAtR10) {
  WorkloadConfig c;
  c.r = 10;
  EXPECT_EQ(c.primary_demand(), (IntRange{5, 10}));
  EXPECT_EQ(c.secondary_demand(), (IntRange{1, 2}));
}

TEST(Workload, SampledJobsSatisfyInvariants) {
  const auto c = r20();
  Rng rng(11);
  int short_jobs = 0;
  std::set<int> primary_seen, secondary_seen;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Job j = sample_job(rng, c, i, 0);
    ASSERT_GE(j.duration, 1);
    const bool is_short = j.duration >= 1 && j.duration <= 3;
    const bool is_long = j.duration >= 10 && j.duration <= 15;
    ASSERT_TRUE(is_short || is_long) << j.duration;
    short_jobs += is_short;
    const int dom = j.demand[0] >= j.demand[1] ? 0 : 1;
    ASSERT_GE(j.demand[dom], 10);
    ASSERT_LE(j.demand[dom], 20);
    ASSERT_GE(j.demand[1 - dom], 2);
    ASSERT_LE(j.demand[1 - dom], 4);
    primary_seen.insert(j.demand[dom]);
    secondary_seen.insert(j.demand[1 - dom]);
  }
  EXPECT_NEAR(static_cast<double>(short_jobs) / n, 0.8, 0.01);
  EXPECT_EQ(primary_seen.size(), 11u);
  EXPECT_EQ(secondary_seen.size(), 3u);
}

TEST(Workload, DominantResourceIsUniform) {
  const auto c = r20();
  Rng rng(5);
  int first = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) first += sample_job(rng, c, i, 0).demand[0] >= 10;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 0.02);
}

TEST(Workload, SameSeedSameJob) {
  const auto c = r20();
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_job(a, c, i, i), sample_job(b, c, i, i));
}

TEST(Workload, ZeroRateGivesEmptyJobset) {
  auto c = r20();
  c.arrival_rate = 0.0;
  EXPECT_TRUE(generate_jobset(3, c, Mode::Online).jobs.empty());
  EXPECT_DOUBLE_EQ(compute_load(c), 0.0);
}

TEST(Workload, OfflineJobsArriveAtZero) {
  auto c = r20();
  c.num_jobs = 10;
  const auto js = generate_jobset(8, c, Mode::Offline);
  ASSERT_EQ(js.jobs.size(), 10u);
  for (const auto& j : js.jobs) EXPECT_EQ(j.arrival_time, 0);
  EXPECT_EQ(js.mode, Mode::Offline);
}

TEST(Workload, RejectsInvalidParameters) {
  auto c = r20();
  c.arrival_rate = -0.1;
  EXPECT_THROW(generate_jobset(1, c, Mode::Online), std::invalid_argument);
  c = r20();
  c.num_jobs = 0;
  EXPECT_THROW(generate_jobset(1, c, Mode::Offline), std::invalid_argument);
  c = r20();
  c.short_prob = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Workload, MeanJobCountMatchesBernoulliMean) {
  auto c = r20();
  c.arrival_rate = 0.7;
  c.arrival_window = 50;
  double total = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) total += static_cast<double>(generate_jobset(s, c, Mode::Online).jobs.size());
  EXPECT_NEAR(total / seeds, 0.7 * 50, 1.0);
}

TEST(Workload, JobsetIdsUniqueAndArrivalsOrdered) {
  auto c = r20();
  c.arrival_rate = 1.4;
  for (int s = 0; s < 50; ++s) {
    const auto js = generate_jobset(s, c, Mode::Online);
    std::set<int> ids;
    for (std::size_t i = 0; i < js.jobs.size(); ++i) {
      ids.insert(js.jobs[i].id);
      EXPECT_GE(js.jobs[i].arrival_time, 0);
      EXPECT_LT(js.jobs[i].arrival_time, c.arrival_window);
      if (i > 0) EXPECT_LE(js.jobs[i - 1].arrival_time, js.jobs[i].arrival_time);
    }
    EXPECT_EQ(ids.size(), js.jobs.size());
  }
}

TEST(Workload, ClosedFormLoadAtR20) {
  auto c = r20();
  EXPECT_DOUBLE_EQ(expected_duration(c), 4.1);
  EXPECT_DOUBLE_EQ(expected_demand_sum(c), 18.0);
  c.arrival_rate = 1.0;
  EXPECT_NEAR(compute_load(c), 1.845, 1e-12);
}

TEST(Workload, ClosedFormLoadAgreesWithMonteCarlo) {
  auto c = r20();
  c.arrival_rate = 1.0;
  Rng rng(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Job j = sample_job(rng, c, i, 0);
    sum += (j.demand[0] + j.demand[1]) * j.duration;
  }
  const double mc = sum / n / (c.num_resources * c.r);
  EXPECT_NEAR(mc, compute_load(c), 0.02 * compute_load(c));
}

TEST(Workload, RateForLoadRoundTrip) {
  auto c = r20();
  for (double target : {0.1, 0.5, 0.9, 1.3, 1.9}) {
    c.arrival_rate = rate_for_load(c, target);
    EXPECT_NEAR(compute_load(c), target, 1e-9);
  }
}

TEST(Workload, EmpiricalLoadConvergesToClosedForm) {
  auto c = r20();
  c.arrival_rate = rate_for_load(c, 0.9);
  double sum = 0.0;
  // 200 seeds leave a standard error of about 2% of the target; 2000 keep it near 0.7%.
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s) sum += empirical_load(generate_jobset(s, c, Mode::Online), c.arrival_window);
  EXPECT_NEAR(sum / seeds, 0.9, 0.02 * 0.9);
}

TEST(Workload, HighLoadUsesMultipleArrivalsPerStep) {
  auto c = r20();
  c.arrival_rate = rate_for_load(c, 1.9);
  EXPECT_GT(c.arrival_rate, 1.0);
  double sum = 0.0;
  for (int s = 0; s < 2000; ++s) sum += empirical_load(generate_jobset(s, c, Mode::Online), c.arrival_window);
  EXPECT_NEAR(sum / 2000, 1.9, 0.02 * 1.9);
}

TEST(Workload, SerializationIsDeterministicAndRoundTrips) {
  auto c = r20();
  const auto a = generate_jobset(77, c, Mode::Online);
  const auto b = generate_jobset(77, c, Mode::Online);
  EXPECT_EQ(jobset_to_json(a).dump(), jobset_to_json(b).dump());
  const auto back = jobset_from_json(jobset_to_json(a));
  EXPECT_EQ(back.jobs, a.jobs);
  EXPECT_EQ(back.seed, a.seed);
  EXPECT_EQ(back.mode, a.mode);
  EXPECT_EQ(back.r, a.r);
}

TEST(Workload, JsonSchemaKeys) {
  auto c = r20();
  const auto j = jobset_to_json(generate_jobset(1, c, Mode::Online));
  for (const char* key : {"seed", "mode", "r", "jobs"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["mode"], "online");
  ASSERT_FALSE(j["jobs"].empty());
  const auto& job = j["jobs"][0];
  EXPECT_EQ(job.size(), 4u);
  for (const char* key : {"id", "arrival", "duration", "demand"}) EXPECT_TRUE(job.contains(key)) << key;
  EXPECT_EQ(job["demand"].size(), 2u);
}

TEST(Workload, ConfigJsonRoundTrip) {
  auto c = r20();
  c.r = 10;
  c.long_duration = {5, 8};
  c.arrival_rate = 0.33;
  nlohmann::json j = c;
  EXPECT_EQ(j.get<WorkloadConfig>(), c);
}
