#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slacksac/envs/attack.hpp"
#include "slacksac/envs/env.hpp"
#include "slacksac/eval/stats.hpp"
#include "slacksac/io/csv.hpp"
#include "slacksac/policy/policy_net.hpp"
#include "slacksac/sac/agent.hpp"

namespace slacksac::eval {

inline constexpr const char* kEvalSchema = "eval/1";

struct EvalRecord {
  std::size_t episode_index = 0;
  std::string condition_tag;
  double episode_return = 0.0;
  double mean_action_l2 = 0.0;  // of the policy's intended action, before any attack
  double mean_log_pi = 0.0;
  std::size_t attack_count = 0;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"episode_return", "mean_action_l2", "mean_log_pi",
                                              "attack_count"};
  return names;
}

inline double metric_value(const EvalRecord& r, const std::string& metric) {
  if (metric == "episode_return") return r.episode_return;
  if (metric == "mean_action_l2") return r.mean_action_l2;
  if (metric == "mean_log_pi") return r.mean_log_pi;
  if (metric == "attack_count") return static_cast<double>(r.attack_count);
  throw ConfigError("unknown metric '" + metric + "'");
}

struct EvalOptions {
  std::size_t episodes = 100;
  bool deterministic = true;
  std::uint64_t seed = 0;  // episode i uses env seed derived from (seed, i)
  std::string condition_tag;
};

/// Runs test episodes without touching the policy. Each episode gets its own
/// env seed, attack stream and sampling stream, so results depend only on
/// (policy, options, attack seed).
inline std::vector<EvalRecord> run_eval(const policy::PolicyNet& policy, envs::Env& env,
                                        const envs::AttackConfig& attack, const EvalOptions& options) {
  std::vector<EvalRecord> records;
  envs::AttackWrapper wrapper(env, attack);
  for (std::size_t ep = 0; ep < options.episodes; ++ep) {
    const std::uint64_t base = sac::splitmix64(options.seed * 1000003ULL + ep);
    wrapper.reseed(sac::splitmix64(base ^ attack.rng_seed ^ 0xa77acc5ULL));
    std::mt19937_64 sampling(sac::splitmix64(base + 1));
    Eigen::VectorXd state = wrapper.reset(base);

    EvalRecord rec;
    rec.episode_index = ep;
    rec.condition_tag = options.condition_tag;
    std::size_t steps = 0;
    for (;;) {
      const auto head = policy.head(state);
      Eigen::VectorXd action;
      double lp;
      if (options.deterministic) {
        action = policy::mode_action(head);
        lp = policy::log_prob(head, head.location);
      } else {
        const auto s = policy::sample_reparam(head, policy::draw_noise(head, sampling));
        action = s.action;
        lp = s.log_prob;
      }
      const auto r = wrapper.step(action);
      rec.episode_return += r.step.reward;
      rec.mean_action_l2 += action.norm();
      rec.mean_log_pi += lp;
      rec.attack_count += r.attacked ? 1 : 0;
      ++steps;
      state = r.step.next_state;
      if (r.step.done || r.step.truncated) break;
    }
    rec.mean_action_l2 /= static_cast<double>(steps);
    rec.mean_log_pi /= static_cast<double>(steps);
    records.push_back(std::move(rec));
  }
  return records;
}

inline void write_eval_csv(const std::string& path, const std::vector<EvalRecord>& records) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << "#schema=" << kEvalSchema << "\n";
  f << "episode_index,condition_tag,episode_return,mean_action_l2,mean_log_pi,attack_count\n";
  for (const auto& r : records)
    f << r.episode_index << ',' << r.condition_tag << ',' << io::format_double(r.episode_return) << ','
      << io::format_double(r.mean_action_l2) << ',' << io::format_double(r.mean_log_pi) << ','
      << r.attack_count << "\n";
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline std::vector<EvalRecord> read_eval_csv(const std::string& path) {
  const auto t = io::read_csv(path);
  if (t.schema != kEvalSchema)
    throw ConfigError("'" + path + "' has schema " + t.schema + ", expected " + kEvalSchema);
  const auto ret = t.numbers("episode_return");
  const auto l2 = t.numbers("mean_action_l2");
  const auto lp = t.numbers("mean_log_pi");
  const auto att = t.numbers("attack_count");
  const auto idx = t.numbers("episode_index");
  const auto tag = t.column("condition_tag");
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back({static_cast<std::size_t>(idx[i]), t.rows[i][tag], ret[i], l2[i], lp[i],
                   static_cast<std::size_t>(att[i])});
  return out;
}

/// Dumps one deterministic episode as CSV rows (t, state..., action...,
/// reward, attacked). The action columns hold what the env received.
inline void write_trace(const std::string& path, const policy::PolicyNet& policy, envs::Env& env,
                        const envs::AttackConfig& attack, std::uint64_t seed) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  const auto& spec = env.spec();
  f << "#schema=trace/1\nt";
  for (std::size_t i = 0; i < spec.state_dim; ++i) f << ",s" << i;
  for (std::size_t i = 0; i < spec.action_dim; ++i) f << ",a" << i;
  f << ",reward,attacked\n";
  envs::AttackWrapper wrapper(env, attack);
  const std::uint64_t base = sac::splitmix64(seed * 1000003ULL);
  wrapper.reseed(sac::splitmix64(base ^ attack.rng_seed ^ 0xa77acc5ULL));
  Eigen::VectorXd state = wrapper.reset(base);
  for (std::size_t k = 0;; ++k) {
    const auto r = wrapper.step(policy::mode_action(policy.head(state)));
    f << io::format_double(static_cast<double>(k) * spec.dt);
    for (Eigen::Index i = 0; i < state.size(); ++i) f << ',' << io::format_double(state(i));
    for (Eigen::Index i = 0; i < r.applied_action.size(); ++i) f << ',' << io::format_double(r.applied_action(i));
    f << ',' << io::format_double(r.step.reward) << ',' << (r.attacked ? 1 : 0) << "\n";
    state = r.step.next_state;
    if (r.step.done || r.step.truncated) break;
  }
}

/// Share of the unattacked return kept under attack: 1 - (R_clean - R_attacked) / |R_clean|.
/// Equals R_attacked / R_clean for positive returns and stays meaningful for
/// negative ones (cost-style rewards), where a plain ratio flips direction.
inline double return_retention(double attacked, double clean) {
  if (clean == 0.0) throw NumericError("return_retention: unattacked return is zero");
  return 1.0 - (clean - attacked) / std::abs(clean);
}

inline nlohmann::json summary_json(const Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

/// Per-condition, per-metric statistics.
inline nlohmann::json summarize_records(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ConfigError("no records to summarize");
  std::map<std::string, std::vector<const EvalRecord*>> by_condition;
  for (const auto& r : records) by_condition[r.condition_tag].push_back(&r);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [tag, rs] : by_condition) {
    nlohmann::json cond = nlohmann::json::object();
    for (const auto& metric : metric_names()) {
      std::vector<double> v;
      for (const auto* r : rs) v.push_back(metric_value(*r, metric));
      cond[metric] = summary_json(summarize(v));
    }
    out[tag] = cond;
  }
  return out;
}

inline nlohmann::json rank_sum_json(const RankSumResult& r) {
  return {{"u_statistic", r.u_statistic}, {"p_value", r.p_value},
          {"alternative", to_string(r.alternative)}, {"n_x", r.n_x},
          {"n_y", r.n_y}, {"exact", r.exact},
          {"degenerate", r.degenerate}};
}

}  // namespace slacksac::eval
