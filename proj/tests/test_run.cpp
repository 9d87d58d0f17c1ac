#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slacksac/eval/harness.hpp"
#include "slacksac/run/config.hpp"
#include "slacksac/run/sweep.hpp"
#include "slacksac/run/trainer.hpp"
#include "test_util.hpp"

using namespace slacksac;
using namespace slacksac::run;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

RunConfig tiny(Condition c = Condition::slack_hstar_negA) {
  RunConfig cfg;
  cfg.condition = c;
  cfg.episodes = 3;
  cfg.seeds = {5};
  cfg.agent.hidden = {8, 8};
  cfg.agent.batch_max = 16;
  cfg.env_params = {{"episode_length", "20"}};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& out = {}) {
  std::string cmd = std::string(SLACKSAC_CLI_PATH) + " " + args;
  if (!out.empty()) cmd += " > " + out.string();
  cmd += " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesSectionsAndPresets) {
  const auto c = parse(
      "[run]\nenv = pendulum\ncondition = slack_hstar_Hbar_minus_2A\nepisodes = 12\nseeds = 3, 4\n"
      "[agent]\nhidden = 32,32\ngamma = 0.95\npolicy = gaussian\n"
      "[attack]\nprobability = 0.05\n"
      "[env]\nsubsteps = 10\n");
  EXPECT_EQ(c.env, "pendulum");
  EXPECT_EQ(c.episodes, 12u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.agent.hidden, (std::vector<std::size_t>{32, 32}));
  EXPECT_EQ(c.agent.family, policy::Family::gaussian);
  EXPECT_EQ(c.attack.probability, 0.05);
  const auto a = c.resolved_agent(3);
  EXPECT_EQ(a.action_dim, 1u);
  EXPECT_EQ(a.entropy_mode, sac::EntropyMode::slack);
  EXPECT_NEAR(a.h_star, std::log(2.0) - 2.0, 1e-15);
  EXPECT_EQ(a.seed, 3u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ConditionPresetsMatchBounds) {
  const double ln2 = std::log(2.0);
  for (std::size_t n : {1u, 2u, 4u}) {
    const double a = static_cast<double>(n);
    const auto conv = entropy_setting(Condition::conventional, n, sac::EntropyMode::slack, 0);
    EXPECT_EQ(conv.mode, sac::EntropyMode::conventional);
    EXPECT_EQ(conv.h_star, -a);
    const auto neg = entropy_setting(Condition::slack_hstar_negA, n, sac::EntropyMode::conventional, 0);
    EXPECT_NEAR(slack::delta_upper_bound(slack::ActionSpaceKind::continuous, n, neg.h_star), a * (1 + ln2), 1e-12);
    const auto hb = entropy_setting(Condition::slack_hstar_Hbar_minus_2A, n, sac::EntropyMode::conventional, 0);
    EXPECT_NEAR(slack::delta_upper_bound(slack::ActionSpaceKind::continuous, n, hb.h_star), 2 * a, 1e-12);
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse("[run]\nepisodez = 3\n"), ConfigError);
  EXPECT_THROW(parse("[agent]\ngamma = fast\n"), ConfigError);
  EXPECT_THROW(parse("[nope]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\ncondition = lukewarm\n"), ConfigError);
  EXPECT_THROW(parse("[run]\njust some words\n"), ConfigError);
  EXPECT_THROW(parse("[run\nenv = point_mass\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nepisodes = 0\n").validate(), ConfigError);
  EXPECT_THROW(parse("[run]\nenv = cartpole\n").validate(), ConfigError);
  EXPECT_THROW(parse("[env]\nwarp = 9\n").validate(), ConfigError);
  EXPECT_THROW(parse("[attack]\nprobability = 1.5\n").validate(), ConfigError);
  EXPECT_THROW(parse("[run]\ncondition = custom\n").validate(), ConfigError);
  EXPECT_NO_THROW(parse("[run]\ncondition = custom\n[agent]\nentropy_mode = slack\nh_star = -1\n").validate());
}

TEST(Config, OverridesAndIniRoundTrip) {
  auto c = parse("[run]\nepisodes = 12\n");
  apply_override(c, "run.episodes=40");
  apply_override(c, "agent.lr_actor = 0.001");
  apply_override(c, "env.init_box=0.5");
  apply_override(c, "run.conditions=conventional,slack_hstar_negA");
  EXPECT_EQ(c.episodes, 40u);
  EXPECT_EQ(c.agent.lr_actor, 0.001);
  EXPECT_EQ(c.env_params.at("init_box"), "0.5");
  EXPECT_THROW(apply_override(c, "episodes=4"), ConfigError);
  EXPECT_THROW(apply_override(c, "run.episodes"), ConfigError);
  const auto text = to_ini(c);
  EXPECT_EQ(to_ini(parse(text)), text);
}

TEST(Trainer, OneEpisodeGivesOneRowAndLoadableCheckpoint) {
  auto cfg = tiny();
  cfg.episodes = 1;
  const auto dir = testutil::temp_dir("trainer_one");
  Trainer t(cfg, 5);
  const auto rows = t.train(dir);
  ASSERT_EQ(rows.size(), 1u);
  const auto table = io::read_csv((dir / "metrics.csv").string());
  EXPECT_EQ(table.schema, kMetricsSchema);
  EXPECT_EQ(table.rows.size(), 1u);
  const auto bytes = io::Checkpoint::load((dir / "checkpoint.bin").string()).to_bytes();
  const auto resumed = Trainer::resume(io::Checkpoint::from_bytes(bytes));
  EXPECT_EQ(resumed.checkpoint().to_bytes(), bytes);
  EXPECT_EQ(resumed.buffer().size(), 20u);
  EXPECT_TRUE(fs::exists(dir / "config.ini"));
  EXPECT_TRUE(fs::exists(dir / "timing.csv"));
}

TEST(Trainer, SameSeedGivesIdenticalMetrics) {
  const auto a = testutil::temp_dir("trainer_a"), b = testutil::temp_dir("trainer_b");
  Trainer(tiny(), 5).train(a);
  Trainer(tiny(), 5).train(b);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  const auto c = testutil::temp_dir("trainer_c");
  Trainer(tiny(), 6).train(c);
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
}

TEST(Trainer, ConventionalConditionHasZeroDelta) {
  const auto dir = testutil::temp_dir("trainer_conv");
  for (const auto& row : Trainer(tiny(Condition::conventional), 5).train(dir)) {
    EXPECT_EQ(row.mean_delta, 0.0);
    EXPECT_EQ(row.branch1_fraction, 0.0);
  }
  for (double d : io::read_csv((dir / "metrics.csv").string()).numbers("mean_delta")) EXPECT_EQ(d, 0.0);
}

TEST(Trainer, ResumeContinuesExactly) {
  auto cfg = tiny();
  cfg.episodes = 4;
  cfg.checkpoint_every = 2;
  const auto full = testutil::temp_dir("resume_full");
  Trainer(cfg, 5).train(full);

  const auto part = testutil::temp_dir("resume_part");
  Trainer(cfg, 5).train(part);
  auto resumed = Trainer::resume(io::Checkpoint::load((part / "checkpoint_ep2.bin").string()));
  EXPECT_EQ(resumed.episodes_done(), 2u);
  const auto again = testutil::temp_dir("resume_again");
  const auto rows = resumed.train(again);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(io::Checkpoint::load((again / "checkpoint.bin").string()).to_bytes(),
            io::Checkpoint::load((full / "checkpoint.bin").string()).to_bytes());
}

TEST(Sweep, RunsEveryConditionSeedPair) {
  auto cfg = tiny();
  cfg.episodes = 2;
  cfg.sweep_conditions = {Condition::conventional, Condition::slack_hstar_negA};
  cfg.seeds = {1, 2};
  cfg.workers = 2;
  cfg.eval_episodes = 2;
  cfg.output = testutil::temp_dir("sweep").string();
  const auto results = run_sweep(cfg);
  ASSERT_EQ(results.size(), 4u);
  for (const auto& r : results) {
    EXPECT_EQ(r.metrics.size(), 2u);
    EXPECT_EQ(r.eval.size(), 2u);
    EXPECT_TRUE(fs::exists(run_dir(cfg.output, r.job.condition, r.job.seed) / "eval.csv"));
  }
  // Parallel and serial sweeps agree.
  cfg.workers = 1;
  cfg.output = testutil::temp_dir("sweep_serial").string();
  const auto serial = run_sweep(cfg);
  for (std::size_t i = 0; i < results.size(); ++i)
    EXPECT_EQ(serial[i].metrics.back().episode_return, results[i].metrics.back().episode_return);
}

TEST(Cli, TrainEvalCompareSmoke) {
  const auto dir = testutil::temp_dir("cli");
  const auto cfg_path = dir / "run.ini";
  {
    std::ofstream f(cfg_path);
    f << "[run]\nepisodes = 2\nseeds = 3\ncondition = slack_hstar_negA\noutput = " << (dir / "run").string()
      << "\n[agent]\nhidden = 8,8\nbatch_max = 16\n[env]\nepisode_length = 20\n";
  }
  ASSERT_EQ(run_cli("train -q -c " + cfg_path.string()), 0);
  const auto ckpt = dir / "run" / "checkpoint.bin";
  ASSERT_TRUE(fs::exists(ckpt));

  ASSERT_EQ(run_cli("eval " + ckpt.string() + " -n 3 -p 0 -o " + (dir / "e1").string()), 0);
  const auto recs = eval::read_eval_csv((dir / "e1" / "eval.csv").string());
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) EXPECT_EQ(r.attack_count, 0u);
  const auto summary = nlohmann::json::parse(slurp(dir / "e1" / "summary.json"));
  EXPECT_EQ(summary["episodes"], 3);
  EXPECT_TRUE(summary["conditions"].contains("slack_hstar_negA"));

  ASSERT_EQ(run_cli("eval " + ckpt.string() + " -n 3 -p 0 -o " + (dir / "e2").string()), 0);
  EXPECT_EQ(slurp(dir / "e1" / "eval.csv"), slurp(dir / "e2" / "eval.csv"));

  const auto report = dir / "report.json";
  ASSERT_EQ(run_cli("compare " + (dir / "e1").string() + " " + (dir / "e2").string() +
                    " -m episode_return --alternative less -o " + report.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_GE(j["test"]["p_value"].get<double>(), 0.5);
  EXPECT_EQ(j["test"]["n_x"], 3);
  EXPECT_TRUE(j["a"]["summary"].contains("median"));
  EXPECT_TRUE(j["b"]["summary"].contains("median"));
  EXPECT_TRUE(j["test"].contains("u_statistic"));
}

TEST(Cli, ExitCodes) {
  const auto dir = testutil::temp_dir("cli_errors");
  EXPECT_EQ(run_cli("--help", dir / "help.txt"), 0);
  EXPECT_EQ(run_cli("train -q -s run.episodez=3"), 2);
  EXPECT_EQ(run_cli("train -q -s run.env=cartpole"), 2);
  EXPECT_EQ(run_cli("eval " + (dir / "missing.bin").string()), 3);
  {
    std::ofstream f(dir / "corrupt.bin");
    f << "not a checkpoint";
  }
  EXPECT_EQ(run_cli("eval " + (dir / "corrupt.bin").string()), 3);
  EXPECT_EQ(run_cli("compare " + (dir / "nothing_a.csv").string() + " " + (dir / "nothing_b.csv").string()), 3);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Config, ShippedExamplesLoad) {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(SLACKSAC_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    SCOPED_TRACE(entry.path().string());
    const auto cfg = run::load_config(entry.path().string());
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_NO_THROW(envs::make_env(cfg.env, cfg.env_params));
    ++count;
  }
  EXPECT_GE(count, 3u);
}
