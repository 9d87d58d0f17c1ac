#pragma once

// Seed sweeps: every (condition, seed) pair is an independent Trainer run in
// its own directory <output>/<condition>/seed_<n>. Workers pull jobs from a
// shared counter; results are collected into a slot per job, so the outcome
// does not depend on scheduling.

#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include "slacksac/envs/registry.hpp"
#include "slacksac/eval/harness.hpp"
#include "slacksac/run/trainer.hpp"

namespace slacksac::run {

struct SweepJob {
  Condition condition;
  std::uint64_t seed;
  std::filesystem::path dir;
};

struct SweepResult {
  SweepJob job;
  std::vector<MetricsRow> metrics;
  std::vector<eval::EvalRecord> eval;  // empty unless eval_episodes > 0
};

inline std::filesystem::path run_dir(const std::filesystem::path& root, Condition c, std::uint64_t seed) {
  return root / to_string(c) / ("seed_" + std::to_string(seed));
}

inline std::vector<SweepJob> sweep_jobs(const RunConfig& config) {
  std::vector<SweepJob> jobs;
  for (auto c : config.sweep_conditions)
    for (auto s : config.seeds) jobs.push_back({c, s, run_dir(config.output, c, s)});
  return jobs;
}

/// Trains (and optionally evaluates) one job. The evaluation uses the
/// config's attack settings, deterministic actions and the run seed.
inline SweepResult run_job(const RunConfig& base, const SweepJob& job) {
  RunConfig cfg = base;
  cfg.condition = job.condition;
  cfg.output = job.dir.string();
  Trainer trainer(cfg, job.seed);
  SweepResult result{job, trainer.train(job.dir), {}};
  if (cfg.eval_episodes > 0) {
    auto env = envs::make_env(cfg.env, cfg.env_params);
    eval::EvalOptions opts;
    opts.episodes = cfg.eval_episodes;
    opts.seed = job.seed;
    opts.condition_tag = to_string(job.condition);
    result.eval = eval::run_eval(trainer.agent().policy(), *env, cfg.attack, opts);
    eval::write_eval_csv((job.dir / "eval.csv").string(), result.eval);
  }
  return result;
}

inline std::vector<SweepResult> run_sweep(const RunConfig& config, std::ostream* log = nullptr) {
  config.validate();
  const auto jobs = sweep_jobs(config);
  std::vector<SweepResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        results[i] = run_job(config, jobs[i]);
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << "done " << to_string(jobs[i].condition) << " seed " << jobs[i].seed << "\n";
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(config.workers, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace slacksac::run
