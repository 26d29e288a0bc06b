#include "rmlab/evaluation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "rmlab/json_util.h"
#include "rmlab/training.h"

namespace rmlab {

std::vector<double> slowdowns(const EpisodeRecord& record) {
  std::vector<double> s;
  for (const auto& r : record.results) {
    if (!r.censored) s.push_back(r.slowdown());
  }
  return s;
}

double average_slowdown(const std::vector<EpisodeRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& rec : records) {
    for (double s : slowdowns(rec)) {
      sum += s;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("average_slowdown: no finished jobs");
  return sum / n;
}

double average_slowdown(const EpisodeRecord& record) { return average_slowdown(std::vector<EpisodeRecord>{record}); }

std::optional<int> completion_time(const EpisodeRecord& record) {
  if (record.capped || record.any_censored()) return std::nullopt;
  if (record.results.empty()) return 0;
  int first = std::numeric_limits<int>::max(), last = 0;
  for (const auto& r : record.results) {
    first = std::min(first, r.arrival_time);
    last = std::max(last, r.finish_time);
  }
  return last - first;
}

int censored_count(const EpisodeRecord& record) {
  return static_cast<int>(std::count_if(record.results.begin(), record.results.end(),
                                        [](const JobResult& r) { return r.censored; }));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - lo;
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  if (frac == 0.0) return a;
  const double b = *std::min_element(values.begin() + lo + 1, values.end());
  return a + frac * (b - a);
}

Quartiles quartiles(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  Quartiles out;
  out.count = v.size();
  if (v.empty()) return out;
  out.min = *std::min_element(v.begin(), v.end());
  out.max = *std::max_element(v.begin(), v.end());
  out.q1 = quantile(v, 0.25);
  out.median = quantile(v, 0.5);
  out.q3 = quantile(v, 0.75);
  return out;
}

std::vector<DurationBucket> slowdown_by_duration(const std::vector<EpisodeRecord>& records, std::size_t min_count) {
  std::map<int, std::vector<double>> by;
  for (const auto& rec : records) {
    for (const auto& r : rec.results) {
      if (!r.censored) by[r.duration].push_back(r.slowdown());
    }
  }
  std::vector<DurationBucket> out;
  for (const auto& [duration, values] : by) {
    out.push_back({duration, quartiles(values), values.size() < min_count});
  }
  return out;
}

void write_duration_csv(const std::vector<DurationBucket>& buckets, const std::string& agent, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17) << "agent,duration,count,min,q1,median,q3,max,sparse\n";
  for (const auto& b : buckets) {
    out << agent << ',' << b.duration << ',' << b.stats.count << ',' << b.stats.min << ',' << b.stats.q1 << ','
        << b.stats.median << ',' << b.stats.q3 << ',' << b.stats.max << ',' << (b.sparse ? 1 : 0) << '\n';
  }
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (values.size() - 1));
  }
  return out;
}

PairedTest paired_less_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("paired test needs equal samples, n >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto ms = mean_std(d);
  PairedTest out;
  out.mean_difference = ms.mean;
  if (ms.std == 0.0) {
    out.t_statistic = ms.mean < 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    out.p_value = ms.mean < 0 ? 0.0 : 1.0;
  } else {
    out.t_statistic = ms.mean / (ms.std / std::sqrt(static_cast<double>(d.size())));
    boost::math::students_t dist(static_cast<double>(d.size() - 1));
    out.p_value = boost::math::cdf(dist, out.t_statistic);
  }
  out.significant = out.p_value < alpha;
  return out;
}

std::vector<double> SweepSpec::default_loads() {
  std::vector<double> loads;
  for (int i = 1; i <= 19; ++i) loads.push_back(i / 10.0);
  return loads;
}

void SweepSpec::validate() const {
  if (loads.empty() || agents.empty()) throw std::invalid_argument("sweep: loads and agents required");
  for (double l : loads) {
    if (!(l > 0.0)) throw std::invalid_argument("sweep: loads must be positive");
  }
  if (seeds_per_cell < 1) throw std::invalid_argument("sweep: seeds_per_cell must be positive");
  workload.validate();
  env.validate();
}

void to_json(nlohmann::json& j, const SweepSpec& s) {
  j = {{"loads", s.loads}, {"agents", s.agents}, {"seeds_per_cell", s.seeds_per_cell}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  require_known_keys(j, {"loads", "agents", "seeds_per_cell"}, "eval");
  read_opt(j, "loads", s.loads);
  read_opt(j, "agents", s.agents);
  read_opt(j, "seeds_per_cell", s.seeds_per_cell);
}

std::uint64_t eval_jobset_seed(std::uint64_t seed, std::size_t load_index, std::size_t i) {
  return derive_seed(derive_seed(seed, seed_space::kEval, load_index), seed_space::kEval, i);
}

std::uint64_t train_jobset_seed(std::uint64_t seed, std::size_t i) {
  return derive_seed(seed, seed_space::kTrain, i);
}

void assert_disjoint(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::set<std::uint64_t> sa(a.begin(), a.end());
  for (auto s : b) {
    if (sa.count(s)) throw std::logic_error("held-out seed " + std::to_string(s) + " also used for training");
  }
}

std::vector<Jobset> heldout_jobsets(const SweepSpec& spec, std::size_t load_index) {
  WorkloadConfig w = spec.workload;
  std::vector<Jobset> sets;
  if (spec.env.mode == Mode::Online) w.arrival_rate = rate_for_load(w, spec.loads.at(load_index));
  for (int i = 0; i < spec.seeds_per_cell; ++i) {
    sets.push_back(generate_jobset(eval_jobset_seed(spec.seed, load_index, i), w, spec.env.mode));
  }
  return sets;
}

std::vector<EpisodeRecord> evaluate_agent(const std::vector<Jobset>& jobsets, const EnvConfig& env,
                                          const AgentFactory& factory, const std::string& agent, std::uint64_t seed,
                                          int workers) {
  std::vector<EpisodeRecord> records(jobsets.size());
  workers = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(jobsets.size())));
  auto work = [&](int w) {
    for (std::size_t i = w; i < jobsets.size(); i += workers) {
      auto a = factory(agent, derive_seed(seed, jobsets[i].seed, i));
      records[i] = run_episode(jobsets[i], env, *a, {.check_invariants = true});
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          work(w);
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
  return records;
}

SweepResult run_sweep(const SweepSpec& spec, const AgentFactory& factory,
                      const std::function<void(const EpisodeRecord&, const SweepRow&)>& on_episode) {
  spec.validate();
  SweepResult result;
  for (std::size_t li = 0; li < spec.loads.size(); ++li) {
    auto jobsets = heldout_jobsets(spec, li);
    for (const auto& js : jobsets) result.jobset_seeds.push_back(js.seed);
    WorkloadConfig w = spec.workload;
    w.arrival_rate = rate_for_load(w, spec.loads[li]);
    const double load = spec.env.mode == Mode::Online ? compute_load(w) : spec.loads[li];
    for (const auto& agent : spec.agents) {
      auto records = evaluate_agent(jobsets, spec.env, factory, agent, spec.seed, spec.workers);
      CellReport cell;
      cell.load = load;
      cell.agent = agent;
      std::vector<double> sd, mk, rw;
      cell.max_discounted_reward = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        SweepRow row;
        row.load = load;
        row.agent = agent;
        row.seed = jobsets[i].seed;
        auto s = slowdowns(rec);
        row.slowdown = s.empty() ? std::nan("") : average_slowdown(rec);
        row.makespan = completion_time(rec);
        row.discounted_reward = rec.discounted_reward(spec.gamma);
        row.total_reward = rec.total_reward();
        row.dropped = rec.dropped;
        row.censored = censored_count(rec);
        if (!s.empty()) sd.push_back(row.slowdown);
        if (row.makespan) mk.push_back(*row.makespan);
        rw.push_back(row.discounted_reward);
        cell.max_discounted_reward = std::max(cell.max_discounted_reward, row.discounted_reward);
        cell.dropped += row.dropped;
        cell.censored += row.censored;
        if (on_episode) on_episode(rec, row);
        result.rows.push_back(row);
      }
      cell.slowdown = mean_std(sd);
      cell.makespan = mean_std(mk);
      cell.discounted_reward = mean_std(rw);
      cell.by_duration = slowdown_by_duration(records);
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17) << "load,agent,seed,slowdown,makespan,reward,total_reward,dropped,censored\n";
  for (const auto& r : result.rows) {
    out << r.load << ',' << r.agent << ',' << r.seed << ',' << r.slowdown << ',';
    if (r.makespan) out << *r.makespan;
    out << ',' << r.discounted_reward << ',' << r.total_reward << ',' << r.dropped << ',' << r.censored << '\n';
  }
}

void write_report_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17)
      << "load,agent,episodes,mean_slowdown,std_slowdown,mean_makespan,std_makespan,mean_reward,max_reward,"
         "dropped,censored\n";
  for (const auto& c : result.cells) {
    out << c.load << ',' << c.agent << ',' << c.slowdown.n << ',' << c.slowdown.mean << ',' << c.slowdown.std << ','
        << c.makespan.mean << ',' << c.makespan.std << ',' << c.discounted_reward.mean << ','
        << c.max_discounted_reward << ',' << c.dropped << ',' << c.censored << '\n';
  }
}

void write_duration_report_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17) << "load,agent,duration,count,min,q1,median,q3,max,sparse\n";
  for (const auto& c : result.cells) {
    for (const auto& b : c.by_duration) {
      out << c.load << ',' << c.agent << ',' << b.duration << ',' << b.stats.count << ',' << b.stats.min << ','
          << b.stats.q1 << ',' << b.stats.median << ',' << b.stats.q3 << ',' << b.stats.max << ','
          << (b.sparse ? 1 : 0) << '\n';
    }
  }
}

void write_sidecar(const std::string& csv_path, const nlohmann::json& config) {
  std::ofstream out(csv_path + ".json");
  if (!out) throw std::runtime_error("cannot write sidecar for " + csv_path);
  out << config.dump(2) << '\n';
}

std::size_t CurveLog::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument("metrics log has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> CurveLog::series(const std::string& name) const {
  const auto c = column(name);
  std::vector<double> out;
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

CurveLog read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics log " + path);
  CurveLog log;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw std::runtime_error("metrics log: missing header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) log.columns.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("metrics log: bad value '" + cell + "' on line " + std::to_string(line_no));
      }
    }
    if (row.size() != log.columns.size()) {
      throw std::runtime_error("metrics log: wrong column count on line " + std::to_string(line_no));
    }
    log.rows.push_back(std::move(row));
  }
  return log;
}

CurveSummary summarize_curves(const CurveLog& log) {
  CurveSummary s;
  s.epochs = log.rows.size();
  if (s.epochs == 0) throw std::runtime_error("metrics log has no rows");
  s.quartile_len = std::max<std::size_t>(1, s.epochs / 4);
  for (const auto& name : log.columns) {
    if (name == "epoch") continue;
    const auto c = log.column(name);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < s.quartile_len; ++i) {
      first += log.rows[i][c];
      last += log.rows[s.epochs - s.quartile_len + i][c];
    }
    first /= s.quartile_len;
    last /= s.quartile_len;
    s.first_quartile_mean[name] = first;
    s.last_quartile_mean[name] = last;
    s.trend[name] = last - first;
  }
  return s;
}

void write_curves_csv(const CurveLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17) << "epoch,series,value\n";
  const auto ec = log.column("epoch");
  for (const auto& row : log.rows) {
    for (std::size_t c = 0; c < log.columns.size(); ++c) {
      if (c == ec || log.columns[c] == "wallclock_s") continue;
      out << row[ec] << ',' << log.columns[c] << ',' << row[c] << '\n';
    }
  }
}

}  // namespace rmlab
