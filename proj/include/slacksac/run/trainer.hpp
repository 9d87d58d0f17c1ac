#pragma once

// Training loop: one sampled rollout per episode, then an episode-end replay
// epoch. Each episode appends one row to metrics.csv.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "slacksac/envs/registry.hpp"
#include "slacksac/io/checkpoint.hpp"
#include "slacksac/io/csv.hpp"
#include "slacksac/replay.hpp"
#include "slacksac/run/config.hpp"
#include "slacksac/sac/agent.hpp"

namespace slacksac::run {

inline constexpr const char* kMetricsSchema = "metrics/1";

struct MetricsRow {
  std::size_t episode = 0;
  double episode_return = 0.0;
  double mean_log_pi = 0.0;  // over the sampled rollout actions
  double batch_log_pi = 0.0;  // over the replayed states the temperature update sees
  double alpha = 0.0;
  double mean_delta = 0.0;
  double mean_residual = 0.0;
  double branch1_fraction = 0.0;  // share of slack samples on the |e| > eps branch
  double mean_action_l2 = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::size_t updates = 0;
  double wall_time_s = 0.0;  // written to timing.csv, not metrics.csv
};

inline std::string metrics_header() {
  return "episode,return,mean_log_pi,batch_log_pi,alpha,mean_delta,mean_residual,branch1_fraction,mean_action_l2,"
         "critic_loss,actor_loss,updates";
}

inline std::string metrics_line(const MetricsRow& r) {
  using io::format_double;
  std::string s = std::to_string(r.episode);
  for (double v : {r.episode_return, r.mean_log_pi, r.batch_log_pi, r.alpha, r.mean_delta, r.mean_residual,
                   r.branch1_fraction, r.mean_action_l2, r.critic_loss, r.actor_loss})
    s += "," + format_double(v);
  s += "," + std::to_string(r.updates);
  return s;
}

// Replay buffer <-> checkpoint -------------------------------------------------

inline void put_buffer(io::Checkpoint& ck, const ReplayBuffer& buffer) {
  const auto ordered = buffer.in_order();
  ck.put_count("buffer.capacity", buffer.capacity());
  ck.put_count("buffer.count", ordered.size());
  if (ordered.empty()) return;
  const auto ds = static_cast<std::uint64_t>(ordered.front()->state.size());
  const auto da = static_cast<std::uint64_t>(ordered.front()->action.size());
  const std::uint64_t n = ordered.size();
  std::vector<double> s, a, ns, r, flags;
  for (const auto* t : ordered) {
    s.insert(s.end(), t->state.data(), t->state.data() + ds);
    a.insert(a.end(), t->action.data(), t->action.data() + da);
    ns.insert(ns.end(), t->next_state.data(), t->next_state.data() + ds);
    r.push_back(t->reward);
    flags.push_back(t->done ? 1.0 : 0.0);
    flags.push_back(t->truncated ? 1.0 : 0.0);
  }
  ck.put("buffer.state", s, {n, ds});
  ck.put("buffer.action", a, {n, da});
  ck.put("buffer.next_state", ns, {n, ds});
  ck.put("buffer.reward", r);
  ck.put("buffer.flags", flags, {n, 2});
}

inline ReplayBuffer get_buffer(const io::Checkpoint& ck, std::size_t state_dim, std::size_t action_dim) {
  ReplayBuffer buffer(ck.count("buffer.capacity"));
  const auto n = ck.count("buffer.count");
  if (n == 0) return buffer;
  const auto& s = ck.f64("buffer.state");
  const auto& a = ck.f64("buffer.action");
  const auto& ns = ck.f64("buffer.next_state");
  const auto& r = ck.f64("buffer.reward");
  const auto& flags = ck.f64("buffer.flags");
  if (s.size() != n * state_dim || a.size() != n * action_dim || ns.size() != n * state_dim ||
      r.size() != n || flags.size() != 2 * n)
    throw IoError("checkpoint replay block has inconsistent sizes");
  std::vector<Transition> ts(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = ts[i];
    t.state = Eigen::Map<const Eigen::VectorXd>(s.data() + i * state_dim, static_cast<Eigen::Index>(state_dim));
    t.action = Eigen::Map<const Eigen::VectorXd>(a.data() + i * action_dim, static_cast<Eigen::Index>(action_dim));
    t.next_state = Eigen::Map<const Eigen::VectorXd>(ns.data() + i * state_dim, static_cast<Eigen::Index>(state_dim));
    t.reward = r[i];
    t.done = flags[2 * i] > 0.5;
    t.truncated = flags[2 * i + 1] > 0.5;
  }
  buffer.restore(std::move(ts));
  return buffer;
}

/// One training run (one env, one condition, one seed).
class Trainer {
 public:
  Trainer(RunConfig config, std::uint64_t seed)
      : config_(std::move(config)),
        seed_(seed),
        env_(envs::make_env(config_.env, config_.env_params)),
        agent_(config_.resolved_agent(seed)),
        buffer_(agent_.config().buffer_max) {
    config_.attack.validate();
  }

  const RunConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const sac::Agent& agent() const { return agent_; }
  sac::Agent& mutable_agent() { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::size_t episodes_done() const { return episodes_done_; }
  envs::Env& env() { return *env_; }

  /// Env seed for episode `ep`, independent of the agent's random stream.
  std::uint64_t episode_seed(std::size_t ep) const {
    return sac::splitmix64(seed_ * 0x100000001b3ULL + ep + 0x5eed);
  }

  MetricsRow run_episode() {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRow row;
    row.episode = episodes_done_;
    Eigen::VectorXd state = env_->reset(episode_seed(episodes_done_));
    std::size_t steps = 0;
    for (;;) {
      const auto sample = agent_.policy().sample(state, agent_.rng());
      auto r = env_->step(sample.action);
      row.episode_return += r.reward;
      row.mean_log_pi += sample.log_prob;
      row.mean_action_l2 += sample.action.norm();
      ++steps;
      buffer_.push({state, sample.action, r.next_state, r.reward, r.done, r.truncated});
      state = std::move(r.next_state);
      if (r.done || r.truncated) break;
    }
    row.mean_log_pi /= static_cast<double>(steps);
    row.mean_action_l2 /= static_cast<double>(steps);

    const auto stats = agent_.train_on_episode_end(buffer_);
    row.alpha = agent_.temperature().alpha;
    row.batch_log_pi = stats.log_pi;
    row.mean_delta = stats.delta;
    row.mean_residual = stats.residual;
    row.branch1_fraction = stats.equality_fraction;
    row.critic_loss = stats.critic_loss;
    row.actor_loss = stats.actor_loss;
    row.updates = stats.batches;
    ++episodes_done_;
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
  }

  io::Checkpoint checkpoint() const {
    io::Checkpoint ck;
    agent_.save(ck);
    ck.put_text("run.config", to_ini(config_));
    ck.put_count("run.seed", seed_);
    ck.put_count("run.episodes_done", episodes_done_);
    if (config_.save_buffer) put_buffer(ck, buffer_);
    return ck;
  }

  static Trainer resume(const io::Checkpoint& ck) {
    std::istringstream cfg(ck.text("run.config"));
    Trainer t(parse_config(cfg), ck.count("run.seed"));
    t.agent_ = sac::Agent::load(ck);
    t.episodes_done_ = ck.count("run.episodes_done");
    if (ck.contains("buffer.capacity"))
      t.buffer_ = get_buffer(ck, t.agent_.config().state_dim, t.agent_.config().action_dim);
    return t;
  }

  /// Runs the remaining episodes, writing metrics.csv, timing.csv and
  /// checkpoints into `dir`. Returns all rows produced by this call.
  std::vector<MetricsRow> train(const std::filesystem::path& dir, std::ostream* log = nullptr) {
    std::filesystem::create_directories(dir);
    const bool fresh = episodes_done_ == 0;
    if (fresh) {
      std::ofstream cfg(dir / "config.ini", std::ios::trunc);
      cfg << to_ini(config_) << "\n[resolved]\nseed = " << seed_
          << "\nh_star = " << io::format_double(agent_.config().h_star)
          << "\ndelta_bar = " << io::format_double(agent_.slack_config().delta_bar)
          << "\nepsilon = " << io::format_double(agent_.slack_config().epsilon) << "\n";
    }
    std::ofstream metrics(dir / "metrics.csv", fresh ? std::ios::trunc : std::ios::app);
    std::ofstream timing(dir / "timing.csv", fresh ? std::ios::trunc : std::ios::app);
    if (!metrics || !timing) throw IoError("cannot write metrics into '" + dir.string() + "'");
    if (fresh) {
      metrics << "#schema=" << kMetricsSchema << "\n" << metrics_header() << "\n";
      timing << "#schema=timing/1\nepisode,wall_time_s\n";
    }
    std::vector<MetricsRow> rows;
    while (episodes_done_ < config_.episodes) {
      auto row = run_episode();
      metrics << metrics_line(row) << "\n";
      timing << row.episode << "," << io::format_double(row.wall_time_s) << "\n";
      if (log)
        *log << "episode " << row.episode << " return " << row.episode_return << " log_pi "
             << row.mean_log_pi << " alpha " << row.alpha << " delta " << row.mean_delta << "\n";
      rows.push_back(row);
      if (config_.checkpoint_every > 0 && episodes_done_ % config_.checkpoint_every == 0 &&
          episodes_done_ < config_.episodes)
        checkpoint().save((dir / ("checkpoint_ep" + std::to_string(episodes_done_) + ".bin")).string());
    }
    metrics.flush();
    checkpoint().save((dir / "checkpoint.bin").string());
    return rows;
  }

 private:
  RunConfig config_;
  std::uint64_t seed_;
  std::unique_ptr<envs::Env> env_;
  sac::Agent agent_;
  ReplayBuffer buffer_;
  std::size_t episodes_done_ = 0;
};

}  // namespace slacksac::run
