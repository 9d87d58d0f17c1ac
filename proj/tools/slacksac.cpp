// slacksac: train, evaluate and compare agents from the command line.
//
// Exit codes: 0 ok, 2 configuration, 3 I/O, 4 numeric failure, 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slacksac/error.hpp"
#include "slacksac/eval/harness.hpp"
#include "slacksac/io/checkpoint.hpp"
#include "slacksac/run/config.hpp"
#include "slacksac/run/sweep.hpp"
#include "slacksac/run/trainer.hpp"

namespace fs = std::filesystem;
using namespace slacksac;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

/// Relative output paths are placed under $SLACKSAC_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& p) {
  const fs::path path(p);
  const char* root = std::getenv("SLACKSAC_OUTPUT_ROOT");
  if (path.is_relative() && root != nullptr && *root != '\0') return fs::path(root) / path;
  return path;
}

run::RunConfig build_config(const std::string& file, const std::vector<std::string>& overrides) {
  run::RunConfig cfg = file.empty() ? run::RunConfig{} : run::load_config(file);
  for (const auto& o : overrides) run::apply_override(cfg, o);
  cfg.output = output_path(cfg.output).string();
  cfg.validate();
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

int cmd_train(const std::string& config_file, const std::vector<std::string>& overrides,
              const std::string& resume, bool quiet) {
  if (!resume.empty()) {
    const auto ck = io::Checkpoint::load(resume);
    auto trainer = run::Trainer::resume(ck);
    const fs::path dir = fs::path(resume).parent_path();
    trainer.train(dir.empty() ? fs::path(".") : dir, quiet ? nullptr : &std::cerr);
    std::cout << (dir / "checkpoint.bin").string() << "\n";
    return 0;
  }
  const auto cfg = build_config(config_file, overrides);
  run::Trainer trainer(cfg, cfg.seeds.front());
  trainer.train(cfg.output, quiet ? nullptr : &std::cerr);
  std::cout << (fs::path(cfg.output) / "checkpoint.bin").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::size_t episodes = 100;
  double attack_p = 0.0;
  std::uint64_t attack_seed = 0;
  std::uint64_t seed = 0;
  bool sampled = false;
  std::string output;
  std::string tag;
  std::string trace;
};

int cmd_eval(const EvalArgs& a) {
  const auto ck = io::Checkpoint::load(a.checkpoint);
  std::istringstream cfg_text(ck.text("run.config"));
  const auto cfg = run::parse_config(cfg_text);
  const auto agent = sac::Agent::load(ck);
  auto env = envs::make_env(cfg.env, cfg.env_params);
  const envs::AttackConfig attack{a.attack_p, envs::kAttackAmplitude, a.attack_seed};
  attack.validate();
  eval::EvalOptions opts;
  opts.episodes = a.episodes;
  opts.deterministic = !a.sampled;
  opts.seed = a.seed;
  opts.condition_tag = a.tag.empty() ? run::to_string(cfg.condition) : a.tag;
  const auto records = eval::run_eval(agent.policy(), *env, attack, opts);

  const fs::path dir = output_path(a.output.empty() ? (fs::path(a.checkpoint).parent_path() / "eval").string()
                                                    : a.output);
  fs::create_directories(dir);
  eval::write_eval_csv((dir / "eval.csv").string(), records);
  nlohmann::json summary = {{"checkpoint", a.checkpoint},
                            {"episodes", a.episodes},
                            {"deterministic", !a.sampled},
                            {"attack_probability", a.attack_p},
                            {"conditions", records.empty() ? nlohmann::json::object()
                                                           : eval::summarize_records(records)}};
  write_json(dir / "summary.json", summary);
  if (!a.trace.empty()) eval::write_trace(output_path(a.trace).string(), agent.policy(), *env, attack, a.seed);
  std::cout << (dir / "eval.csv").string() << "\n";
  return 0;
}

fs::path eval_csv_of(const std::string& p) {
  const fs::path path(p);
  return fs::is_directory(path) ? path / "eval.csv" : path;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& metric,
                const std::string& alternative, const std::string& output) {
  const auto alt = eval::parse_alternative(alternative);
  const auto ra = eval::read_eval_csv(eval_csv_of(a).string());
  const auto rb = eval::read_eval_csv(eval_csv_of(b).string());
  if (ra.empty() || rb.empty()) throw ConfigError("compare needs at least one record on each side");
  std::vector<double> x, y;
  for (const auto& r : ra) x.push_back(eval::metric_value(r, metric));
  for (const auto& r : rb) y.push_back(eval::metric_value(r, metric));
  const auto test = eval::mann_whitney_u(x, y, alt);
  const auto sx = eval::summarize(x);
  const auto sy = eval::summarize(y);
  nlohmann::json report = {{"metric", metric},
                           {"a", {{"path", a}, {"summary", eval::summary_json(sx)}}},
                           {"b", {{"path", b}, {"summary", eval::summary_json(sy)}}},
                           {"median_difference", sx.median - sy.median},
                           {"mean_difference", sx.mean - sy.mean},
                           {"test", eval::rank_sum_json(test)}};
  if (output.empty())
    std::cout << report.dump(2) << "\n";
  else
    write_json(output_path(output), report);
  return 0;
}

int cmd_sweep(const std::string& config_file, const std::vector<std::string>& overrides, bool quiet) {
  const auto cfg = build_config(config_file, overrides);
  const auto results = run::run_sweep(cfg, quiet ? nullptr : &std::cerr);

  // Per-seed final-window statistics, one line per run.
  const fs::path summary_path = fs::path(cfg.output) / "sweep.csv";
  std::ofstream f(summary_path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + summary_path.string() + "'");
  f << "#schema=sweep/1\ncondition,seed,final_return,final_neg_log_pi,final_batch_neg_log_pi,final_alpha,"
       "final_delta,eval_return,eval_action_l2\n";
  for (const auto& r : results) {
    const std::size_t window = std::min<std::size_t>(50, r.metrics.size());
    double ret = 0, nlp = 0, bnlp = 0, alpha = 0, delta = 0;
    for (std::size_t i = r.metrics.size() - window; i < r.metrics.size(); ++i) {
      ret += r.metrics[i].episode_return;
      nlp -= r.metrics[i].mean_log_pi;
      bnlp -= r.metrics[i].batch_log_pi;
      alpha += r.metrics[i].alpha;
      delta += r.metrics[i].mean_delta;
    }
    const double w = static_cast<double>(window);
    double eret = 0, el2 = 0;
    for (const auto& e : r.eval) {
      eret += e.episode_return / static_cast<double>(r.eval.size());
      el2 += e.mean_action_l2 / static_cast<double>(r.eval.size());
    }
    f << run::to_string(r.job.condition) << ',' << r.job.seed << ',' << io::format_double(ret / w) << ','
      << io::format_double(nlp / w) << ',' << io::format_double(bnlp / w) << ',' << io::format_double(alpha / w)
      << ',' << io::format_double(delta / w) << ',' << io::format_double(eret) << ',' << io::format_double(el2)
      << "\n";
  }
  std::cout << summary_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft actor-critic with a slack-variable entropy bound"};
  app.require_subcommand(1);

  std::string config_file, resume;
  std::vector<std::string> overrides;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "Train one run (first seed of run.seeds)");
  train->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
  train->add_option("-s,--set", overrides, "Override, section.key=value (repeatable)");
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_flag("-q,--quiet", quiet, "No per-episode log");

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint under random action attacks");
  evalc->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
  evalc->add_option("-n,--episodes", ev.episodes, "Test episodes");
  evalc->add_option("-p,--attack-probability", ev.attack_p, "Per-step attack probability")
      ->check(CLI::Range(0.0, 1.0));
  evalc->add_option("--attack-seed", ev.attack_seed, "Attack noise seed");
  evalc->add_option("--seed", ev.seed, "Episode seed base");
  evalc->add_flag("--sampled", ev.sampled, "Sample actions instead of using the mode");
  evalc->add_option("-o,--output", ev.output, "Output directory (default: <checkpoint dir>/eval)");
  evalc->add_option("--tag", ev.tag, "condition_tag column (default: the run's condition)");
  evalc->add_option("--trace", ev.trace, "Also dump one episode trace to this CSV");

  std::string cmp_a, cmp_b, metric = "episode_return", alternative = "greater", report;
  auto* compare = app.add_subcommand("compare", "One-sided rank-sum test between two eval.csv files");
  compare->add_option("a", cmp_a, "eval.csv or directory containing it")->required();
  compare->add_option("b", cmp_b, "eval.csv or directory containing it")->required();
  compare->add_option("-m,--metric", metric, "episode_return, mean_action_l2, mean_log_pi or attack_count");
  compare->add_option("--alternative", alternative, "greater: a tends to exceed b; less: the reverse")
      ->check(CLI::IsMember({"less", "greater"}));
  compare->add_option("-o,--output", report, "Write the JSON report here instead of stdout");

  auto* sweep = app.add_subcommand("sweep", "Train every run.conditions x run.seeds pair");
  sweep->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
  sweep->add_option("-s,--set", overrides, "Override, section.key=value (repeatable)");
  sweep->add_flag("-q,--quiet", quiet, "No progress log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(config_file, overrides, resume, quiet);
    if (*evalc) return cmd_eval(ev);
    if (*compare) return cmd_compare(cmp_a, cmp_b, metric, alternative, report);
    if (*sweep) return cmd_sweep(config_file, overrides, quiet);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
