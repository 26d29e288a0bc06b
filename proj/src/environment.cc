#include "rmlab/environment.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>
#include <unordered_set>

#include "rmlab/json_util.h"

namespace rmlab {

std::string to_string(Objective objective) {
  return objective == Objective::Slowdown ? "slowdown" : "completion_time";
}

Objective objective_from_string(const std::string& s) {
  if (s == "slowdown") return Objective::Slowdown;
  if (s == "completion_time") return Objective::CompletionTime;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

int EnvConfig::backlog_columns() const {
  return (backlog_capacity + time_horizon - 1) / time_horizon;
}

int EnvConfig::image_width() const { return num_resources * r * (1 + num_slots) + backlog_columns(); }

void EnvConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("env config: " + what); };
  if (r < 1 || time_horizon < 1 || num_slots < 1 || arrival_window < 1 || hard_step_cap < 1) {
    fail("sizes must be positive");
  }
  if (num_resources != kNumResources) fail("only two resource types are supported");
  if (mode == Mode::Online && backlog_capacity < 1) fail("online mode needs a positive backlog");
  if (mode == Mode::Offline && backlog_capacity != 0) fail("offline mode has no backlog");
  if (hard_step_cap <= arrival_window) fail("hard_step_cap must exceed arrival_window");
}

void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"r", c.r},
       {"num_resources", c.num_resources},
       {"time_horizon", c.time_horizon},
       {"num_slots", c.num_slots},
       {"backlog_capacity", c.backlog_capacity},
       {"arrival_window", c.arrival_window},
       {"objective", to_string(c.objective)},
       {"hard_step_cap", c.hard_step_cap}};
}

void from_json(const nlohmann::json& j, EnvConfig& c) {
  require_known_keys(j,
                     {"mode", "r", "num_resources", "time_horizon", "num_slots", "backlog_capacity",
                      "arrival_window", "objective", "hard_step_cap"},
                     "env");
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("objective")) c.objective = objective_from_string(j.at("objective").get<std::string>());
  read_opt(j, "r", c.r);
  read_opt(j, "num_resources", c.num_resources);
  read_opt(j, "time_horizon", c.time_horizon);
  read_opt(j, "num_slots", c.num_slots);
  read_opt(j, "backlog_capacity", c.backlog_capacity);
  read_opt(j, "arrival_window", c.arrival_window);
  read_opt(j, "hard_step_cap", c.hard_step_cap);
}

Environment::Environment(EnvConfig config) : config_(config) { config_.validate(); }

StepOutcome Environment::reset(const Jobset& jobset) {
  if (jobset.mode != config_.mode) throw std::invalid_argument("reset: jobset mode does not match env mode");
  if (config_.mode == Mode::Offline && static_cast<int>(jobset.jobs.size()) > config_.num_slots) {
    throw std::invalid_argument("reset: offline jobset has more jobs than slots");
  }
  for (const auto& job : jobset.jobs) {
    if (job.duration < 1 || job.duration > config_.time_horizon) {
      throw std::invalid_argument("reset: job duration outside [1, time_horizon]");
    }
    for (int k = 0; k < config_.num_resources; ++k) {
      if (job.demand[k] < 1 || job.demand[k] > config_.r) throw std::invalid_argument("reset: demand outside [1, r]");
    }
    if (job.arrival_time < 0 || job.arrival_time >= config_.hard_step_cap) {
      throw std::invalid_argument("reset: arrival outside [0, hard_step_cap)");
    }
  }
  jobs_ = jobset.jobs;
  std::stable_sort(jobs_.begin(), jobs_.end(),
                   [](const Job& a, const Job& b) { return a.arrival_time < b.arrival_time; });
  next_arrival_ = 0;
  clock_ = 0;
  done_ = false;
  capped_ = false;
  dropped_ = 0;
  slots_.assign(config_.num_slots, std::nullopt);
  backlog_.clear();
  running_.clear();
  finished_.clear();
  cells_.assign(config_.num_resources, std::vector<int>(static_cast<std::size_t>(config_.time_horizon) * config_.r, -1));
  counts_.assign(config_.num_resources, std::vector<int>(config_.time_horizon, 0));
  surface_arrivals();
  update_done();
  return outcome(0.0, false, false, 0);
}

bool Environment::any_slot_occupied() const {
  return std::any_of(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); });
}

void Environment::surface_arrivals() {
  while (next_arrival_ < jobs_.size() && jobs_[next_arrival_].arrival_time <= clock_) {
    const Job& job = jobs_[next_arrival_++];
    auto free_slot = std::find_if(slots_.begin(), slots_.end(), [](const auto& s) { return !s.has_value(); });
    if (free_slot != slots_.end()) {
      *free_slot = job;
    } else if (static_cast<int>(backlog_.size()) < config_.backlog_capacity) {
      backlog_.push_back(job);
    } else {
      ++dropped_;
    }
  }
}

void Environment::refill_slots() {
  for (auto& slot : slots_) {
    if (backlog_.empty()) return;
    if (!slot) {
      slot = backlog_.front();
      backlog_.pop_front();
    }
  }
}

bool Environment::fits_at(const Job& job, int offset) const {
  if (offset < 0 || offset + job.duration > config_.time_horizon) return false;
  for (int k = 0; k < config_.num_resources; ++k) {
    for (int t = offset; t < offset + job.duration; ++t) {
      if (counts_[k][t] + job.demand[k] > config_.r) return false;
    }
  }
  return true;
}

std::optional<int> Environment::earliest_offset(const Job& job) const {
  for (int d = 0; d + job.duration <= config_.time_horizon; ++d) {
    if (fits_at(job, d)) return d;
  }
  return std::nullopt;
}

void Environment::allocate(int slot, int offset) {
  const Job job = *slots_[slot];
  slots_[slot].reset();
  const int r = config_.r;
  for (int k = 0; k < config_.num_resources; ++k) {
    for (int t = offset; t < offset + job.duration; ++t) {
      int* row = &cells_[k][static_cast<std::size_t>(t) * r];
      int placed = 0;
      for (int c = 0; c < r && placed < job.demand[k]; ++c) {
        if (row[c] < 0) {
          row[c] = job.id;
          ++placed;
        }
      }
      counts_[k][t] += placed;
    }
  }
  running_.push_back({job, clock_ + offset, clock_ + offset + job.duration});
  refill_slots();
}

double Environment::pending_reward() const {
  if (config_.objective == Objective::CompletionTime) {
    int waiting = static_cast<int>(running_.size() + backlog_.size());
    for (const auto& s : slots_) waiting += s.has_value();
    return -static_cast<double>(waiting);
  }
  double reward = 0.0;
  for (const auto& rj : running_) reward -= 1.0 / rj.job.duration;
  for (const auto& s : slots_) {
    if (s) reward -= 1.0 / s->duration;
  }
  for (const auto& job : backlog_) reward -= 1.0 / job.duration;
  return reward;
}

int Environment::move_on() {
  ++clock_;
  const int r = config_.r;
  const int horizon = config_.time_horizon;
  for (int k = 0; k < config_.num_resources; ++k) {
    auto& cells = cells_[k];
    std::move(cells.begin() + r, cells.end(), cells.begin());
    std::fill(cells.end() - r, cells.end(), -1);
    auto& counts = counts_[k];
    std::move(counts.begin() + 1, counts.end(), counts.begin());
    counts[horizon - 1] = 0;
  }
  int finished_now = 0;
  auto keep = std::partition(running_.begin(), running_.end(),
                             [&](const RunningJob& rj) { return rj.finish_time > clock_; });
  // Report in start order for stable output.
  std::vector<RunningJob> done_jobs(keep, running_.end());
  running_.erase(keep, running_.end());
  std::sort(done_jobs.begin(), done_jobs.end(), [](const RunningJob& a, const RunningJob& b) {
    return std::tie(a.finish_time, a.start_time, a.job.id) < std::tie(b.finish_time, b.start_time, b.job.id);
  });
  for (const auto& rj : done_jobs) {
    finished_.push_back({rj.job.id, rj.job.duration, rj.job.arrival_time, rj.start_time, rj.finish_time, false});
    ++finished_now;
  }
  refill_slots();
  surface_arrivals();

  const bool drained = next_arrival_ == jobs_.size() && running_.empty() && backlog_.empty() && !any_slot_occupied();
  if (!drained && clock_ >= config_.hard_step_cap) {
    capped_ = true;
    const int cap = clock_;
    for (const auto& rj : running_) {
      finished_.push_back({rj.job.id, rj.job.duration, rj.job.arrival_time, rj.start_time, cap, true});
    }
    running_.clear();
    for (auto& s : slots_) {
      if (s) finished_.push_back({s->id, s->duration, s->arrival_time, -1, cap, true});
      s.reset();
    }
    for (const auto& job : backlog_) finished_.push_back({job.id, job.duration, job.arrival_time, -1, cap, true});
    backlog_.clear();
    for (auto& cells : cells_) std::fill(cells.begin(), cells.end(), -1);
    for (auto& counts : counts_) std::fill(counts.begin(), counts.end(), 0);
  }
  return finished_now;
}

void Environment::update_done() {
  done_ = capped_ ||
          (next_arrival_ == jobs_.size() && running_.empty() && backlog_.empty() && !any_slot_occupied());
}

StepOutcome Environment::step(Action action) {
  if (done_) throw std::logic_error("step called on a finished episode");
  if (action.index < 0 || action.index > config_.num_slots) throw std::out_of_range("action index out of range");
  if (action.index < config_.num_slots && slots_[action.index]) {
    if (auto offset = earliest_offset(*slots_[action.index])) {
      allocate(action.index, *offset);
      return outcome(0.0, false, true, 0);
    }
  }
  const double reward = pending_reward();
  const int finished_now = move_on();
  update_done();
  return outcome(reward, true, false, finished_now);
}

StepOutcome Environment::outcome(double reward, bool advanced, bool valid, int finished) const {
  StepOutcome out;
  if (render_) out.image = render_image();
  out.reward = reward;
  out.time_advanced = advanced;
  out.done = done_;
  out.info = {valid, finished, dropped_};
  return out;
}

StateImage Environment::render_image() const {
  const int r = config_.r;
  const int horizon = config_.time_horizon;
  StateImage image(horizon, config_.image_width());
  const int block = r * (1 + config_.num_slots);
  for (int k = 0; k < config_.num_resources; ++k) {
    const int base = k * block;
    for (int t = 0; t < horizon; ++t) {
      std::fill_n(&image.at(t, base), counts_[k][t], std::uint8_t{1});
    }
    for (int i = 0; i < config_.num_slots; ++i) {
      if (!slots_[i]) continue;
      const int col = base + r * (1 + i);
      for (int t = 0; t < slots_[i]->duration; ++t) std::fill_n(&image.at(t, col), slots_[i]->demand[k], std::uint8_t{1});
    }
  }
  const int backlog_base = config_.num_resources * block;
  for (int i = 0; i < static_cast<int>(backlog_.size()); ++i) image.at(i % horizon, backlog_base + i / horizon) = 1;
  return image;
}

void Environment::check_invariants() const {
  const int r = config_.r;
  const int horizon = config_.time_horizon;
  auto fail = [this](const std::string& what) {
    throw InvariantViolation("clock " + std::to_string(clock_) + ": " + what);
  };
  for (int k = 0; k < config_.num_resources; ++k) {
    for (int t = 0; t < horizon; ++t) {
      int used = 0;
      for (int c = 0; c < r; ++c) used += cells_[k][t * r + c] >= 0;
      if (used != counts_[k][t]) fail("occupancy count out of sync");
      if (used > r) fail("capacity exceeded");
    }
  }
  int in_slots = 0;
  for (const auto& s : slots_) in_slots += s.has_value();
  const std::size_t accounted = pending_count() + backlog_.size() + in_slots + running_.size() + finished_.size() + dropped_;
  if (accounted != jobs_.size()) fail("job conservation violated");

  std::unordered_set<int> seen;
  auto claim = [&](int id) {
    if (!seen.insert(id).second) fail("job " + std::to_string(id) + " in two places");
  };
  for (const auto& s : slots_) {
    if (s) claim(s->id);
  }
  for (const auto& job : backlog_) claim(job.id);
  for (const auto& rj : running_) claim(rj.job.id);
  for (const auto& res : finished_) claim(res.job_id);

  // Non-preemption: each running job holds exactly demand[k] cells in each of
  // its remaining rows and nothing elsewhere.
  std::vector<int> tally(static_cast<std::size_t>(horizon));
  for (const auto& rj : running_) {
    if (rj.finish_time <= clock_) fail("finished job still running");
    if (rj.start_time < rj.job.arrival_time) fail("job started before arrival");
    for (int k = 0; k < config_.num_resources; ++k) {
      std::fill(tally.begin(), tally.end(), 0);
      for (int t = 0; t < horizon; ++t) {
        for (int c = 0; c < r; ++c) tally[t] += cells_[k][t * r + c] == rj.job.id;
      }
      for (int t = 0; t < horizon; ++t) {
        const int abs_t = clock_ + t;
        const int expect = (abs_t >= rj.start_time && abs_t < rj.finish_time) ? rj.job.demand[k] : 0;
        if (tally[t] != expect) fail("job " + std::to_string(rj.job.id) + " cells modified (preemption)");
      }
    }
  }
  std::unordered_set<int> running_ids;
  for (const auto& rj : running_) running_ids.insert(rj.job.id);
  for (const auto& cells : cells_) {
    for (int id : cells) {
      if (id >= 0 && !running_ids.count(id)) fail("cell held by a job that is not running");
    }
  }
  for (const auto& res : finished_) {
    if (res.completion_time() < res.duration && !res.censored) fail("C_j < T_j");
  }
}

double EpisodeRecord::total_reward() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

double EpisodeRecord::discounted_reward(double gamma) const {
  double v = 0.0;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) v = it->reward + gamma * v;
  return v;
}

bool EpisodeRecord::any_censored() const {
  return std::any_of(results.begin(), results.end(), [](const JobResult& r) { return r.censored; });
}

EpisodeRecord run_episode(const Jobset& jobset, const EnvConfig& config, Agent& agent, const EpisodeOptions& options) {
  Environment env(config);
  env.set_render(agent.uses_image() || options.record_images);
  StepOutcome out = env.reset(jobset);
  EpisodeRecord record;
  record.seed = jobset.seed;
  record.config = config;
  record.num_jobs = static_cast<int>(jobset.jobs.size());
  while (!out.done) {
    const Action action = agent.act(env, out.image);
    if (options.record_images) record.images.push_back(out.image);
    out = env.step(action);
    if (options.check_invariants) env.check_invariants();
    record.steps.push_back({action.index, out.reward, out.time_advanced});
  }
  record.results = env.finished();
  record.dropped = env.dropped();
  record.capped = env.capped();
  return record;
}

nlohmann::json episode_to_json(const EpisodeRecord& record) {
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& r : record.results) {
    jobs.push_back({{"id", r.job_id},
                    {"arrival", r.arrival_time},
                    {"start", r.start_time},
                    {"finish", r.finish_time},
                    {"duration", r.duration},
                    {"completion_time", r.completion_time()},
                    {"slowdown", r.slowdown()},
                    {"censored", r.censored}});
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : record.steps) steps.push_back({{"action", s.action}, {"reward", s.reward}, {"advanced", s.time_advanced}});
  return {{"seed", record.seed}, {"config", record.config}, {"num_jobs", record.num_jobs},
          {"dropped", record.dropped}, {"capped", record.capped}, {"jobs", std::move(jobs)},
          {"steps", std::move(steps)}};
}

void write_pgm(const StateImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  for (auto v : image.data) out.put(static_cast<char>(v ? 255 : 0));
}

}  // namespace rmlab
