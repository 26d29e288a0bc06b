#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "rmlab/pipeline.h"

using namespace rmlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rmlab_cfg_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

RunConfig tiny_run(const fs::path& out, Pipeline pipeline) {
  auto c = RunConfig::desk(Mode::Online);
  c.pipeline = pipeline;
  c.out = out.string();
  c.seed = 11;
  c.train.jobsets_per_epoch = 2;
  c.train.rollouts_per_jobset = 3;
  c.train.epochs = 4;
  c.train.checkpoint_every = 2;
  c.train.bc_jobsets = 4;
  c.train.bc_max_epochs = 2;
  c.train.workers = 1;
  c.resolve();
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

// metrics.csv without the trailing wallclock column.
std::vector<std::string> metrics_without_wallclock(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line.substr(0, line.rfind(',')));
  return rows;
}

}  // namespace

TEST(Presets, FullScaleDefaults) {
  const auto c = RunConfig::paper();
  EXPECT_EQ(c.env.r, 20);
  EXPECT_EQ(c.env.time_horizon, 20);
  EXPECT_EQ(c.env.num_slots, 10);
  EXPECT_EQ(c.env.backlog_capacity, 60);
  EXPECT_EQ(c.workload.arrival_window, 50);
  EXPECT_EQ(c.train.jobsets_per_epoch, 100);
  EXPECT_EQ(c.train.rollouts_per_jobset, 20);
  EXPECT_EQ(c.train.epochs, 500);
  EXPECT_DOUBLE_EQ(c.train.gamma, 0.99);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.env.image_width(), 443);
  EXPECT_EQ(c.net_spec().input_cols, 443);
}

TEST(Presets, DeskValues) {
  const auto c = RunConfig::desk();
  EXPECT_EQ(c.env.r, 10);
  EXPECT_EQ(c.env.time_horizon, 10);
  EXPECT_EQ(c.env.num_slots, 5);
  EXPECT_EQ(c.env.backlog_capacity, 30);
  EXPECT_EQ(c.workload.arrival_window, 25);
  EXPECT_EQ(c.train.jobsets_per_epoch, 20);
  EXPECT_EQ(c.train.rollouts_per_jobset, 10);
  EXPECT_LE(c.train.epochs, 150);
  EXPECT_EQ(c.env.image_width(), 123);
  EXPECT_THROW(RunConfig::preset_named("laptop"), std::invalid_argument);
}

TEST(Presets, OfflineResolvesSlotsFromJobCount) {
  auto c = RunConfig::desk(Mode::Offline);
  EXPECT_EQ(c.env.num_slots, c.workload.num_jobs);
  EXPECT_EQ(c.env.backlog_capacity, 0);
  c.workload.num_jobs = 7;
  c.resolve();
  EXPECT_EQ(c.env.num_slots, 7);
  EXPECT_EQ(c.env.num_actions(), 8);
}

TEST(ConfigJson, RoundTripIsExact) {
  for (const char* preset : {"paper", "desk"}) {
    for (Mode mode : {Mode::Online, Mode::Offline}) {
      auto c = RunConfig::preset_named(preset, mode);
      c.load = 0.7;
      c.seed = 99;
      c.pipeline = Pipeline::PG;
      c.resolve();
      const auto j = to_json(c);
      const auto back = run_config_from_json(j);
      EXPECT_EQ(to_json(back), j);
      EXPECT_EQ(back.train, c.train);
      EXPECT_EQ(back.env.num_slots, c.env.num_slots);
    }
  }
}

TEST(ConfigJson, OverlaysPresetAndRejectsUnknownKeys) {
  const auto c = run_config_from_json({{"preset", "desk"}, {"load", 1.3}, {"train", {{"epochs", 7}}}});
  EXPECT_EQ(c.env.r, 10);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_NEAR(compute_load(c.workload), 1.3, 1e-9);
  EXPECT_THROW(run_config_from_json({{"preset", "desk"}, {"lr", 0.1}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json({{"train", {{"epoch", 3}}}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json({{"pipeline", "ppo"}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json({{"preset", "desk"}, {"env", {{"r", 12}}}}), std::invalid_argument);
}

TEST(Pipeline, RunDirectoryContents) {
  const auto dir = scratch_dir("layout");
  const auto c = tiny_run(dir, Pipeline::BCThenPG);
  const auto art = train(c);
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  EXPECT_TRUE(fs::exists(dir / "bc_history.csv"));
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  for (int e : {0, 2, 4}) EXPECT_TRUE(fs::exists(dir / "checkpoints" / pg_checkpoint_name(e))) << e;
  EXPECT_FALSE(fs::exists(dir / "checkpoints" / pg_checkpoint_name(1)));
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "bc_final.json"));
  EXPECT_EQ(load_run_config((dir / "config.json").string()).train, c.train);
  EXPECT_EQ(metrics_without_wallclock(dir / "metrics.csv").size(), 5u);
  ASSERT_TRUE(art.bc.has_value());
  EXPECT_EQ(art.bc->history.front().epoch, 0);
  EXPECT_GT(art.demonstrations, 0u);
  EXPECT_EQ(art.epochs.size(), 4u);
  fs::remove_all(dir);
}

TEST(Pipeline, PgStartsFromTheBcPolicy) {
  const auto dir = scratch_dir("handoff");
  train(tiny_run(dir, Pipeline::BCThenPG));
  const auto bc = nn::net_from_checkpoint(nn::load_checkpoint_json((dir / "checkpoints/bc_final.json").string()));
  const auto pg0 =
      nn::net_from_checkpoint(nn::load_checkpoint_json((dir / "checkpoints" / pg_checkpoint_name(0)).string()));
  EXPECT_EQ(bc.hash(), pg0.hash());
  fs::remove_all(dir);
}

TEST(Pipeline, ResumeMatchesUninterruptedRun) {
  const auto full_dir = scratch_dir("full");
  const auto split_dir = scratch_dir("split");
  const auto full = train(tiny_run(full_dir, Pipeline::BCThenPG));

  TrainOptions first;
  first.stop_after_epoch = 2;
  const auto partial = train(tiny_run(split_dir, Pipeline::BCThenPG), first);
  EXPECT_EQ(partial.epochs.size(), 2u);
  TrainOptions second;
  second.resume = true;
  const auto resumed = train(tiny_run(split_dir, Pipeline::BCThenPG), second);
  EXPECT_EQ(resumed.epochs.size(), 2u);
  EXPECT_FALSE(resumed.bc.has_value());

  EXPECT_EQ(full.net.hash(), resumed.net.hash());
  EXPECT_EQ(metrics_without_wallclock(full_dir / "metrics.csv"), metrics_without_wallclock(split_dir / "metrics.csv"));
  EXPECT_EQ(read_file(full_dir / "checkpoints" / pg_checkpoint_name(4)),
            read_file(split_dir / "checkpoints" / pg_checkpoint_name(4)));
  fs::remove_all(full_dir);
  fs::remove_all(split_dir);
}

TEST(Pipeline, SameSeedSameRun) {
  const auto a = scratch_dir("a");
  const auto b = scratch_dir("b");
  auto ca = tiny_run(a, Pipeline::PG);
  auto cb = tiny_run(b, Pipeline::PG);
  EXPECT_EQ(train(ca).net.hash(), train(cb).net.hash());
  cb.seed = 12;
  cb.resolve();
  EXPECT_NE(train(ca).net.hash(), train(cb).net.hash());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, AgentFactoryChecksCheckpointShape) {
  const auto dir = scratch_dir("shape");
  auto c = tiny_run(dir, Pipeline::PG);
  c.train.epochs = 1;
  c.resolve();
  train(c);
  const std::string policy = "policy:" + (dir / "checkpoints/final.json").string();
  auto factory = make_agent_factory(c.env);
  EXPECT_EQ(factory(policy, 0)->name(), "policy");
  EXPECT_EQ(factory("sjf", 0)->name(), "sjf");
  auto other = RunConfig::paper();
  EXPECT_THROW(make_agent_factory(other.env)(policy, 0), std::invalid_argument);
  EXPECT_ANY_THROW(factory("policy:" + (dir / "missing.json").string(), 0));
  fs::remove_all(dir);
}
