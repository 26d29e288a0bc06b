#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmlab/workload.h"

namespace rmlab {

enum class Objective { Slowdown, CompletionTime };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& s);

struct EnvConfig {
  Mode mode = Mode::Online;
  int r = 20;
  int num_resources = kNumResources;
  int time_horizon = 20;
  int num_slots = 10;
  int backlog_capacity = 60;
  int arrival_window = 50;
  Objective objective = Objective::Slowdown;
  int hard_step_cap = 1000;

  bool operator==(const EnvConfig&) const = default;

  int num_actions() const { return num_slots + 1; }
  int void_action() const { return num_slots; }
  int backlog_columns() const;
  int image_width() const;

  void validate() const;
};

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

// Thrown when a state invariant (capacity, conservation, non-preemption) breaks.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Action {
  int index = 0;
  bool operator==(const Action&) const = default;
};

struct JobResult {
  int job_id = 0;
  int duration = 1;       // T_j
  int arrival_time = 0;
  int start_time = -1;    // -1 if censored before starting
  int finish_time = 0;    // timestep at which the job left the system (or the cap)
  bool censored = false;

  int completion_time() const { return finish_time - arrival_time; }  // C_j
  double slowdown() const { return static_cast<double>(completion_time()) / duration; }
};

// Binary image, row-major [rows x cols].
struct StateImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;

  StateImage() = default;
  StateImage(int rows_, int cols_) : rows(rows_), cols(cols_), data(static_cast<std::size_t>(rows_) * cols_, 0) {}

  std::uint8_t at(int row, int col) const { return data[static_cast<std::size_t>(row) * cols + col]; }
  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * cols + col]; }
  bool operator==(const StateImage&) const = default;
};

struct StepInfo {
  bool valid_action = false;  // the action allocated a job
  int jobs_finished = 0;
  int dropped = 0;            // cumulative
};

struct StepOutcome {
  StateImage image;  // empty when rendering is disabled
  double reward = 0.0;
  bool time_advanced = false;
  bool done = false;
  StepInfo info;
};

struct RunningJob {
  Job job;
  int start_time = 0;
  int finish_time = 0;
};

class Environment {
 public:
  explicit Environment(EnvConfig config);

  StepOutcome reset(const Jobset& jobset);
  StepOutcome step(Action action);

  StateImage render_image() const;
  void set_render(bool enabled) { render_ = enabled; }

  // Earliest offset d such that the job fits rows [d, d+duration) within the
  // visible horizon; nullopt if there is none.
  std::optional<int> earliest_offset(const Job& job) const;
  bool fits_at(const Job& job, int offset) const;

  // Throws InvariantViolation.
  void check_invariants() const;

  const EnvConfig& config() const { return config_; }
  int clock() const { return clock_; }
  bool done() const { return done_; }
  const std::vector<std::optional<Job>>& slots() const { return slots_; }
  const std::deque<Job>& backlog() const { return backlog_; }
  const std::vector<RunningJob>& running() const { return running_; }
  const std::vector<JobResult>& finished() const { return finished_; }
  std::size_t pending_count() const { return jobs_.size() - next_arrival_; }
  int dropped() const { return dropped_; }
  int total_jobs() const { return static_cast<int>(jobs_.size()); }
  bool capped() const { return capped_; }
  int occupied(int resource, int row) const { return counts_[resource][row]; }
  int cell(int resource, int row, int col) const { return cells_[resource][row * config_.r + col]; }
  bool any_slot_occupied() const;

  // Reward the next Move on would emit (computed over running, slots, backlog).
  double pending_reward() const;

 private:
  void surface_arrivals();
  void refill_slots();
  void allocate(int slot, int offset);
  int move_on();
  void update_done();
  StepOutcome outcome(double reward, bool advanced, bool valid, int finished) const;

  EnvConfig config_;
  std::vector<Job> jobs_;
  std::size_t next_arrival_ = 0;
  int clock_ = 0;
  bool done_ = true;
  bool capped_ = false;
  bool render_ = true;
  int dropped_ = 0;
  std::vector<std::optional<Job>> slots_;
  std::deque<Job> backlog_;
  std::vector<RunningJob> running_;
  std::vector<JobResult> finished_;
  // Per resource: [time_horizon x r] job ids (-1 = free), and per-row counts.
  std::vector<std::vector<int>> cells_;
  std::vector<std::vector<int>> counts_;
};

struct StepRecord {
  int action = 0;
  double reward = 0.0;
  bool time_advanced = false;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  EnvConfig config;
  int num_jobs = 0;
  std::vector<StepRecord> steps;
  std::vector<JobResult> results;
  std::vector<StateImage> images;  // filled only when recording
  int dropped = 0;
  bool capped = false;

  double total_reward() const;
  double discounted_reward(double gamma) const;
  bool any_censored() const;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Action act(const Environment& env, const StateImage& image) = 0;
  virtual bool uses_image() const { return false; }
  virtual std::string name() const = 0;
};

struct EpisodeOptions {
  bool record_images = false;
  bool check_invariants = false;  // run check_invariants after every step
};

EpisodeRecord run_episode(const Jobset& jobset, const EnvConfig& config, Agent& agent,
                          const EpisodeOptions& options = {});

nlohmann::json episode_to_json(const EpisodeRecord& record);
void write_pgm(const StateImage& image, const std::string& path);

}  // namespace rmlab
