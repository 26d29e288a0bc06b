#include "rmlab/selftest.h"

#include <chrono>
#include <cmath>
#include <sstream>

#include "rmlab/baselines.h"
#include "rmlab/config.h"

namespace rmlab {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

CheckResult check_gradients(std::uint64_t seed, int count, std::optional<int> fault_layer) {
  Stopwatch sw;
  CheckResult result{"grad_check", true, "", 0.0};
  Rng rng(derive_seed(seed, seed_space::kInit, 0));
  std::uniform_int_distribution<int> rows_dist(6, 10), cols_dist(8, 16), actions_dist(3, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::size_t skipped = 0;
  std::string worst_where;
  for (int i = 0; i < count; ++i) {
    nn::NetSpec spec{rows_dist(rng), cols_dist(rng), {8, 16}, 5, {72}, actions_dist(rng)};
    nn::PolicyNet net(spec);
    net.initialize(derive_seed(seed, seed_space::kInit, static_cast<std::uint64_t>(i) + 1));
    net.inject_backward_fault(fault_layer);
    std::vector<double> input(nn::input_size(spec));
    for (auto& v : input) v = unit(rng);
    for (auto kind : {nn::HeadKind::CrossEntropy, nn::HeadKind::LogProb}) {
      nn::Head head{kind, std::uniform_int_distribution<int>(0, spec.num_actions - 1)(rng),
                    kind == nn::HeadKind::LogProb ? unit(rng) * 4.0 - 2.0 : 1.0};
      auto report = nn::grad_check(net, input, head);
      skipped += report.skipped_kinks;
      if (report.max_relative_error > worst) {
        worst = report.max_relative_error;
        worst_where = report.worst_layer;
      }
      result.passed = result.passed && report.passed;
    }
  }
  std::ostringstream os;
  os << count << " nets x 2 heads, max rel err " << worst << " (" << worst_where << "), " << skipped << " kink partials skipped";
  result.detail = os.str();
  result.seconds = sw.seconds();
  return result;
}

CheckResult check_environment_fuzz(std::uint64_t seed, int episodes, const std::vector<double>& loads) {
  Stopwatch sw;
  CheckResult result{"env_fuzz", true, "", 0.0};
  long violations = 0, jobs = 0;
  std::string first_error;
  for (std::size_t li = 0; li < loads.size(); ++li) {
    RunConfig config = RunConfig::desk(Mode::Online);
    config.load = loads[li];
    config.resolve();
    for (int e = 0; e < episodes; ++e) {
      const auto s = derive_seed(seed, seed_space::kEval, li * 1000003ULL + static_cast<std::uint64_t>(e));
      const Jobset jobset = generate_jobset(s, config.workload, Mode::Online);
      RandomAgent agent(s);
      try {
        const auto record = run_episode(jobset, config.env, agent, {.record_images = false, .check_invariants = true});
        if (static_cast<int>(record.results.size()) + record.dropped != record.num_jobs) {
          throw InvariantViolation("job count not conserved");
        }
        for (const auto& r : record.results) {
          if (!r.censored && r.slowdown() < 1.0) throw InvariantViolation("slowdown below 1");
        }
        jobs += record.num_jobs;
      } catch (const InvariantViolation& e) {
        if (violations++ == 0) first_error = e.what();
      }
    }
  }
  result.passed = violations == 0;
  std::ostringstream os;
  os << episodes << " episodes x " << loads.size() << " loads, " << jobs << " jobs, " << violations << " violations";
  if (!first_error.empty()) os << " (first: " << first_error << ")";
  result.detail = os.str();
  result.seconds = sw.seconds();
  return result;
}

CheckResult check_returns(std::uint64_t seed, int sequences) {
  Stopwatch sw;
  CheckResult result{"returns", true, "", 0.0};
  Rng rng(seed);
  std::uniform_int_distribution<int> len(0, 60);
  std::uniform_real_distribution<double> reward(-3.0, 1.0), gamma_dist(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < sequences; ++s) {
    std::vector<double> r(static_cast<std::size_t>(len(rng)));
    for (auto& v : r) v = reward(rng);
    const double gamma = s % 10 == 0 ? 1.0 : gamma_dist(rng);
    const auto v = compute_returns(r, gamma);
    for (std::size_t t = 0; t < r.size(); ++t) {
      double expect = 0.0;
      for (std::size_t k = t; k < r.size(); ++k) expect += std::pow(gamma, static_cast<double>(k - t)) * r[k];
      worst = std::max(worst, std::abs(expect - v[t]));
    }
  }
  result.passed = worst <= 1e-12;
  std::ostringstream os;
  os << sequences << " sequences, max abs err " << worst;
  result.detail = os.str();
  result.seconds = sw.seconds();
  return result;
}

EpisodicTask::Step BanditTask::reset() {
  Step s;
  s.image = StateImage(1, 1);
  s.image.at(0, 0) = 1;
  return s;
}

EpisodicTask::Step BanditTask::step(int action) {
  Step s = reset();
  s.reward = action == 0 ? 1.0 : -1.0;
  s.done = true;
  return s;
}

BanditOutcome train_bandit(std::uint64_t seed, int max_epochs, double threshold) {
  nn::PolicyNet net(nn::NetSpec{1, 1, {}, 5, {}, 2});
  net.initialize(derive_seed(seed, seed_space::kInit, 0));
  TrainConfig config;
  config.seed = seed;
  config.gamma = 1.0;
  config.rollouts_per_jobset = 10;
  config.learning_rate = 0.05;
  config.workers = 1;
  auto optimizer = nn::make_optimizer(net, config.pg_optimizer());
  const TaskFactory factory = [](std::size_t) { return std::make_unique<BanditTask>(); };
  auto probability = [&] {
    nn::ForwardCache cache;
    return net.forward(BanditTask().reset().image, cache)[0];
  };
  BanditOutcome out;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    pg_epoch(factory, 1, net, optimizer, config, epoch);
    out.epochs = epoch + 1;
    if (probability() > threshold) break;
  }
  out.final_probability = probability();
  return out;
}

CheckResult check_bandit(std::uint64_t seed, int seeds) {
  Stopwatch sw;
  CheckResult result{"bandit_pg", true, "", 0.0};
  int passed = 0, max_epochs = 0;
  double min_p = 1.0;
  for (int s = 0; s < seeds; ++s) {
    const auto out = train_bandit(derive_seed(seed, seed_space::kTrain, static_cast<std::uint64_t>(s)));
    if (out.final_probability > 0.9) ++passed;
    min_p = std::min(min_p, out.final_probability);
    max_epochs = std::max(max_epochs, out.epochs);
  }
  result.passed = passed == seeds;
  std::ostringstream os;
  os << passed << "/" << seeds << " seeds, min p(+1) " << min_p << ", max epochs " << max_epochs;
  result.detail = os.str();
  result.seconds = sw.seconds();
  return result;
}

std::vector<CheckResult> run_selftest(std::uint64_t seed, std::optional<int> fault_layer) {
  return {check_gradients(seed, 5, fault_layer), check_environment_fuzz(seed, 300, {0.7, 1.1, 1.9}),
          check_returns(seed), check_bandit(seed)};
}

}  // namespace rmlab
