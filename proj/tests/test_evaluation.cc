#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "rmlab/baselines.h"
#include "rmlab/config.h"
#include "rmlab/evaluation.h"

using namespace rmlab;
namespace fs = std::filesystem;

namespace {

JobResult result(int id, int duration, int arrival, int start, bool censored = false) {
  JobResult r;
  r.job_id = id;
  r.duration = duration;
  r.arrival_time = arrival;
  r.start_time = start;
  r.finish_time = start + duration;
  r.censored = censored;
  return r;
}

EpisodeRecord record(std::vector<JobResult> results) {
  EpisodeRecord rec;
  rec.results = std::move(results);
  rec.num_jobs = static_cast<int>(rec.results.size());
  return rec;
}

double sort_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (pos - lo) * (v[lo + 1] - v[lo]);
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rmlab_eval_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SweepSpec desk_spec(std::vector<double> loads, std::vector<std::string> agents, int seeds) {
  auto cfg = RunConfig::desk(Mode::Online);
  cfg.resolve();
  SweepSpec s = cfg.eval;
  s.loads = std::move(loads);
  s.agents = std::move(agents);
  s.seeds_per_cell = seeds;
  s.workers = 1;
  return s;
}

AgentFactory heuristics() {
  return [](const std::string& name, std::uint64_t seed) { return make_heuristic_agent(name, seed); };
}

}  // namespace

TEST(Metrics, AverageSlowdownExamples) {
  EXPECT_DOUBLE_EQ(average_slowdown(record({result(0, 3, 0, 0)})), 1.0);
  EXPECT_DOUBLE_EQ(average_slowdown(record({result(0, 1, 0, 0), result(1, 1, 0, 1), result(2, 1, 0, 2)})), 2.0);
  const auto r = result(0, 2, 4, 7);
  EXPECT_EQ(r.completion_time(), 5);
  EXPECT_DOUBLE_EQ(r.slowdown(), 2.5);
}

TEST(Metrics, CensoredJobsExcludedAndEmptyThrows) {
  const auto rec = record({result(0, 2, 0, 0), result(1, 1, 0, 5, true)});
  EXPECT_DOUBLE_EQ(average_slowdown(rec), 1.0);
  EXPECT_EQ(censored_count(rec), 1);
  EXPECT_FALSE(completion_time(rec).has_value());
  EXPECT_THROW(average_slowdown(record({})), std::invalid_argument);
  EXPECT_THROW(average_slowdown(record({result(0, 1, 0, 3, true)})), std::invalid_argument);
}

TEST(Metrics, CompletionTimeExamples) {
  EXPECT_EQ(completion_time(record({result(0, 4, 0, 0)})), 4);
  EXPECT_EQ(completion_time(record({})), 0);
  // Two unit jobs that each need the whole cluster: they run back to back.
  EnvConfig c;
  c.r = 3;
  c.time_horizon = 4;
  c.num_slots = 2;
  c.backlog_capacity = 2;
  c.arrival_window = 4;
  c.hard_step_cap = 20;
  Jobset js;
  js.r = 3;
  js.jobs = {Job{0, {3, 3}, 1, 0}, Job{1, {3, 3}, 1, 0}};
  SjfAgent agent;
  const auto rec = run_episode(js, c, agent);
  EXPECT_EQ(completion_time(rec), 2);
  auto capped = rec;
  capped.capped = true;
  EXPECT_FALSE(completion_time(capped).has_value());
}

TEST(Metrics, QuantilesMatchSortOracle) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> v(1 + s % 37);
    for (auto& x : v) x = u(rng);
    const auto q = quartiles(v);
    EXPECT_EQ(q.count, v.size());
    EXPECT_DOUBLE_EQ(q.min, *std::min_element(v.begin(), v.end()));
    EXPECT_DOUBLE_EQ(q.max, *std::max_element(v.begin(), v.end()));
    EXPECT_NEAR(q.q1, sort_quantile(v, 0.25), 1e-12);
    EXPECT_NEAR(q.median, sort_quantile(v, 0.5), 1e-12);
    EXPECT_NEAR(q.q3, sort_quantile(v, 0.75), 1e-12);
  }
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
}

TEST(Metrics, DurationBucketsAllOnesWhenNoWaiting) {
  std::vector<JobResult> rs;
  for (int i = 0; i < 15; ++i) rs.push_back(result(i, 1 + i % 3, i, i));
  rs.push_back(result(99, 7, 0, 0));
  const auto buckets = slowdown_by_duration({record(rs)});
  ASSERT_EQ(buckets.size(), 4u);
  for (const auto& b : buckets) {
    EXPECT_DOUBLE_EQ(b.stats.min, 1.0);
    EXPECT_DOUBLE_EQ(b.stats.median, 1.0);
    EXPECT_DOUBLE_EQ(b.stats.max, 1.0);
    EXPECT_EQ(b.sparse, b.duration == 7);
  }
}

TEST(Metrics, RandomPolicyShortJobsSufferMoreAtHighLoad) {
  auto cfg = RunConfig::paper(Mode::Online);
  cfg.load = 1.5;
  cfg.resolve();
  std::vector<EpisodeRecord> records;
  for (int s = 0; s < 100; ++s) {
    RandomAgent agent(s);
    records.push_back(run_episode(generate_jobset(derive_seed(2, seed_space::kEval, s), cfg.workload, Mode::Online),
                                  cfg.env, agent));
  }
  std::map<int, double> median;
  for (const auto& b : slowdown_by_duration(records)) median[b.duration] = b.stats.median;
  ASSERT_TRUE(median.count(1) && median.count(15));
  EXPECT_GT(median[1], median[15]);
}

TEST(Statistics, MeanStdAndPairedTest) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto ms = mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 5.0);
  EXPECT_NEAR(ms.std, std::sqrt(32.0 / 7.0), 1e-12);
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 3, 5, 8};
  const auto t = paired_less_test(a, b);
  EXPECT_NEAR(t.mean_difference, -1.4, 1e-12);
  EXPECT_NEAR(t.t_statistic, -1.4 / (std::sqrt(1.3) / std::sqrt(5.0)), 1e-12);
  EXPECT_GT(t.p_value, 0.02);  // one-sided, df = 4, t = -2.7456: p = 0.0258
  EXPECT_LT(t.p_value, 0.03);
  EXPECT_TRUE(t.significant);
  EXPECT_FALSE(paired_less_test(b, a).significant);
}

TEST(Sweep, HeldOutSeedsAreDisjointFromTraining) {
  auto cfg = RunConfig::desk(Mode::Online);
  cfg.resolve();
  std::vector<std::uint64_t> train, eval;
  for (std::size_t i = 0; i < 500; ++i) train.push_back(train_jobset_seed(cfg.seed, i));
  for (std::size_t l = 0; l < 19; ++l) {
    for (std::size_t i = 0; i < 100; ++i) eval.push_back(eval_jobset_seed(cfg.seed, l, i));
  }
  EXPECT_NO_THROW(assert_disjoint(train, eval));
  std::vector<std::uint64_t> leaked{eval[5], train[7]};
  EXPECT_THROW(assert_disjoint(train, leaked), std::logic_error);
}

TEST(Sweep, DefaultLoadGrid) {
  const auto loads = SweepSpec::default_loads();
  ASSERT_EQ(loads.size(), 19u);
  EXPECT_NEAR(loads.front(), 0.1, 1e-12);
  EXPECT_NEAR(loads.back(), 1.9, 1e-12);
}

TEST(Sweep, RowsCellsAndAggregationAreConsistent) {
  const auto spec = desk_spec({0.5, 1.1}, {"sjf", "random"}, 12);
  std::vector<EpisodeRecord> kept;
  const auto result = run_sweep(spec, heuristics(), [&](const EpisodeRecord& rec, const SweepRow&) { kept.push_back(rec); });
  ASSERT_EQ(result.rows.size(), 2u * 2 * 12);
  ASSERT_EQ(result.cells.size(), 4u);
  EXPECT_EQ(kept.size(), result.rows.size());
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const auto& cell = result.cells[c];
    EXPECT_NEAR(cell.load, spec.loads[c / 2], 1e-9);
    EXPECT_GE(cell.slowdown.mean, 1.0);
    EXPECT_GE(cell.slowdown.n, 10u);
    std::vector<double> sd;
    for (std::size_t i = 0; i < 12; ++i) {
      const auto& row = result.rows[c * 12 + i];
      EXPECT_EQ(row.agent, cell.agent);
      const auto& rec = kept[c * 12 + i];
      EXPECT_DOUBLE_EQ(row.slowdown, average_slowdown(rec));
      if (row.makespan) {
        int longest = 0;
        for (const auto& r : rec.results) longest = std::max(longest, r.duration);
        EXPECT_GE(*row.makespan, longest);
      }
      sd.push_back(row.slowdown);
    }
    const auto ms = mean_std(sd);
    EXPECT_DOUBLE_EQ(ms.mean, cell.slowdown.mean);
    EXPECT_DOUBLE_EQ(ms.std, cell.slowdown.std);
  }
  // Both agents saw the same held-out jobsets.
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(result.rows[i].seed, result.rows[12 + i].seed);
}

TEST(Sweep, RandomIsWorseThanSjf) {
  const auto spec = desk_spec({0.5, 0.9, 1.3}, {"sjf", "random"}, 200);
  const auto result = run_sweep(spec, heuristics());
  for (std::size_t l = 0; l < spec.loads.size(); ++l) {
    std::vector<double> sjf, rnd;
    for (std::size_t i = 0; i < 200; ++i) {
      const auto& a = result.rows[(2 * l) * 200 + i];
      const auto& b = result.rows[(2 * l + 1) * 200 + i];
      if (std::isnan(a.slowdown) || std::isnan(b.slowdown)) continue;
      sjf.push_back(a.slowdown);
      rnd.push_back(b.slowdown);
    }
    EXPECT_TRUE(paired_less_test(sjf, rnd).significant) << "load " << spec.loads[l];
  }
}

TEST(Sweep, CsvOutputsCarryHeadersAndSidecars) {
  const auto dir = scratch_dir("csv");
  const auto spec = desk_spec({0.7}, {"sjf"}, 10);
  const auto result = run_sweep(spec, heuristics());
  const auto path = (dir / "episodes.csv").string();
  write_sweep_csv(result, path);
  write_sidecar(path, spec);
  write_report_csv(result, (dir / "report.csv").string());
  write_duration_report_csv(result, (dir / "durations.csv").string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "load,agent,seed,slowdown,makespan,reward,total_reward,dropped,censored");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 10);
  std::ifstream side(path + ".json");
  const auto j = nlohmann::json::parse(side);
  EXPECT_EQ(j["seeds_per_cell"], 10);
  std::ifstream rep(dir / "report.csv");
  std::getline(rep, header);
  EXPECT_EQ(header.rfind("load,agent,episodes,mean_slowdown", 0), 0u);
  fs::remove_all(dir);
}

TEST(Curves, ConstantLogHasZeroTrend) {
  CurveLog log;
  log.columns = {"epoch", "mean_discounted_reward", "mean_slowdown"};
  for (int e = 1; e <= 12; ++e) log.rows.push_back({static_cast<double>(e), -3.5, 2.0});
  const auto s = summarize_curves(log);
  EXPECT_EQ(s.quartile_len, 3u);
  EXPECT_EQ(s.trend.at("mean_discounted_reward"), 0.0);
  EXPECT_EQ(s.trend.at("mean_slowdown"), 0.0);
}

TEST(Curves, SummaryMatchesIndependentPassOverRawCsv) {
  const auto dir = scratch_dir("curves");
  const auto path = dir / "metrics.csv";
  {
    std::ofstream out(path);
    out << "epoch,mean_discounted_reward,max_discounted_reward,mean_slowdown,entropy,wallclock_s\n";
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    out.precision(17);
    for (int e = 1; e <= 37; ++e) {
      out << e << ',' << -40 + e * 0.3 + u(rng) << ',' << -30 + u(rng) << ',' << 3.0 - e * 0.02 << ',' << 0.5 + u(rng)
          << ',' << e * 1.5 << '\n';
    }
  }
  const auto s = summarize_curves(read_metrics_csv(path.string()));
  // Independent recomputation straight from the text.
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  const std::size_t q = rows.size() / 4;
  ASSERT_EQ(s.quartile_len, q);
  const std::vector<std::string> names{"mean_discounted_reward", "max_discounted_reward", "mean_slowdown", "entropy"};
  for (std::size_t c = 0; c < names.size(); ++c) {
    double first = 0, last = 0;
    for (std::size_t i = 0; i < q; ++i) {
      first += rows[i][c + 1];
      last += rows[rows.size() - q + i][c + 1];
    }
    EXPECT_NEAR(s.first_quartile_mean.at(names[c]), first / q, 1e-12);
    EXPECT_NEAR(s.last_quartile_mean.at(names[c]), last / q, 1e-12);
  }
  EXPECT_GT(s.trend.at("mean_discounted_reward"), 0.0);
  EXPECT_LT(s.trend.at("mean_slowdown"), 0.0);
  write_curves_csv(read_metrics_csv(path.string()), (dir / "curves.csv").string());
  std::ifstream curves(dir / "curves.csv");
  std::getline(curves, line);
  EXPECT_EQ(line, "epoch,series,value");
  fs::remove_all(dir);
}

TEST(Curves, MalformedLogIsRejected) {
  const auto dir = scratch_dir("bad");
  std::ofstream(dir / "m.csv") << "epoch,mean_slowdown\n1,2.0\n2,abc\n";
  EXPECT_THROW(read_metrics_csv((dir / "m.csv").string()), std::runtime_error);
  EXPECT_THROW(read_metrics_csv((dir / "missing.csv").string()), std::runtime_error);
  fs::remove_all(dir);
}
