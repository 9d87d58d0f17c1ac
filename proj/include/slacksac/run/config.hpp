#pragma once

// Run configuration: an INI file with [run], [agent], [attack] and [env]
// sections. Unknown keys are rejected; command-line overrides use the same
// "section.key=value" spelling.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "slacksac/envs/attack.hpp"
#include "slacksac/envs/registry.hpp"
#include "slacksac/error.hpp"
#include "slacksac/io/csv.hpp"
#include "slacksac/sac/agent.hpp"

namespace slacksac::run {

/// Entropy-bound presets:
///   conventional               H* = -|A|,            Delta = 0
///   slack_hstar_negA           H* = -|A|,            Delta in [0, |A| (1 + ln 2)]
///   slack_hstar_Hbar_minus_2A  H* = |A| (ln 2 - 2),  Delta in [0, 2 |A|]
///   custom                     agent.entropy_mode and agent.h_star
enum class Condition { conventional, slack_hstar_negA, slack_hstar_Hbar_minus_2A, custom };

inline Condition parse_condition(const std::string& s) {
  if (s == "conventional") return Condition::conventional;
  if (s == "slack_hstar_negA") return Condition::slack_hstar_negA;
  if (s == "slack_hstar_Hbar_minus_2A") return Condition::slack_hstar_Hbar_minus_2A;
  if (s == "custom") return Condition::custom;
  throw ConfigError("unknown condition '" + s +
                    "' (expected conventional, slack_hstar_negA, slack_hstar_Hbar_minus_2A or custom)");
}

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::conventional: return "conventional";
    case Condition::slack_hstar_negA: return "slack_hstar_negA";
    case Condition::slack_hstar_Hbar_minus_2A: return "slack_hstar_Hbar_minus_2A";
    case Condition::custom: return "custom";
  }
  return "custom";
}

struct EntropySetting {
  sac::EntropyMode mode;
  double h_star;
};

inline EntropySetting entropy_setting(Condition c, std::size_t action_dim, sac::EntropyMode custom_mode,
                                      double custom_h_star) {
  const double a = static_cast<double>(action_dim);
  switch (c) {
    case Condition::conventional: return {sac::EntropyMode::conventional, -a};
    case Condition::slack_hstar_negA: return {sac::EntropyMode::slack, -a};
    case Condition::slack_hstar_Hbar_minus_2A: return {sac::EntropyMode::slack, a * (std::log(2.0) - 2.0)};
    case Condition::custom: return {custom_mode, custom_h_star};
  }
  return {custom_mode, custom_h_star};
}

struct RunConfig {
  // [run]
  std::string env = "point_mass";
  Condition condition = Condition::conventional;
  std::vector<Condition> sweep_conditions{Condition::conventional};
  std::size_t episodes = 300;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  std::string output = "runs/default";
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  bool save_buffer = true;
  std::size_t eval_episodes = 0;     // sweep: evaluation episodes per run
  std::size_t workers = 1;           // sweep: parallel runs

  // [agent]
  sac::AgentConfig agent;
  sac::EntropyMode custom_mode = sac::EntropyMode::conventional;
  double custom_h_star = std::nan("");

  // [attack]
  envs::AttackConfig attack;

  // [env]
  envs::EnvParams env_params;

  /// Agent config with dims and entropy settings resolved for this env and
  /// condition.
  sac::AgentConfig resolved_agent(std::uint64_t seed) const {
    auto e = envs::make_env(env, env_params);
    sac::AgentConfig a = agent;
    a.state_dim = e->spec().state_dim;
    a.action_dim = e->spec().action_dim;
    const auto setting = entropy_setting(condition, a.action_dim, custom_mode, custom_h_star);
    if (condition == Condition::custom && !std::isfinite(custom_h_star))
      throw ConfigError("condition 'custom' requires agent.h_star");
    a.entropy_mode = setting.mode;
    a.h_star = setting.h_star;
    a.seed = seed;
    return a;
  }

  void validate() const {
    if (episodes < 1) throw ConfigError("run.episodes must be at least 1");
    if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
    if (workers < 1) throw ConfigError("run.workers must be at least 1");
    attack.validate();
    resolved_agent(seeds.front()).validate();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

}  // namespace detail

/// Applies one "section.key" = value assignment.
inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key,
                          const std::string& raw_value) {
  using namespace detail;
  const std::string v = trim(raw_value);
  const std::string full = section + "." + key;
  auto& a = c.agent;
  if (section == "run") {
    if (key == "env") c.env = v;
    else if (key == "condition") c.condition = parse_condition(v);
    else if (key == "conditions") {
      c.sweep_conditions.clear();
      for (const auto& s : split_list(v)) c.sweep_conditions.push_back(parse_condition(s));
    } else if (key == "episodes") c.episodes = to_uint(full, v);
    else if (key == "seeds") {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(to_uint(full, s));
    } else if (key == "output") c.output = v;
    else if (key == "checkpoint_every") c.checkpoint_every = to_uint(full, v);
    else if (key == "save_buffer") c.save_buffer = to_bool(full, v);
    else if (key == "eval_episodes") c.eval_episodes = to_uint(full, v);
    else if (key == "workers") c.workers = to_uint(full, v);
    else throw ConfigError("unknown key '" + full + "'");
  } else if (section == "agent") {
    if (key == "hidden") {
      a.hidden.clear();
      for (const auto& s : split_list(v)) a.hidden.push_back(to_uint(full, s));
    } else if (key == "gamma") a.gamma = to_double(full, v);
    else if (key == "tau") a.tau = to_double(full, v);
    else if (key == "batch_max") a.batch_max = to_uint(full, v);
    else if (key == "buffer_max") a.buffer_max = to_uint(full, v);
    else if (key == "epsilon") a.epsilon = to_double(full, v);
    else if (key == "alpha_init") a.alpha_init = to_double(full, v);
    else if (key == "lr_critic") a.lr_critic = to_double(full, v);
    else if (key == "lr_actor") a.lr_actor = to_double(full, v);
    else if (key == "lr_slack") a.lr_slack = to_double(full, v);
    else if (key == "lr_alpha") a.lr_alpha = to_double(full, v);
    else if (key == "policy") {
      if (v == "student_t") a.family = policy::Family::student_t;
      else if (v == "gaussian") a.family = policy::Family::gaussian;
      else throw ConfigError(full + ": expected student_t or gaussian");
    } else if (key == "entropy_mode") {
      if (v == "conventional") c.custom_mode = sac::EntropyMode::conventional;
      else if (v == "slack") c.custom_mode = sac::EntropyMode::slack;
      else throw ConfigError(full + ": expected conventional or slack");
    } else if (key == "h_star") c.custom_h_star = to_double(full, v);
    else throw ConfigError("unknown key '" + full + "'");
  } else if (section == "attack") {
    if (key == "probability") c.attack.probability = to_double(full, v);
    else if (key == "amplitude") c.attack.amplitude = to_double(full, v);
    else if (key == "seed") c.attack.rng_seed = to_uint(full, v);
    else throw ConfigError("unknown key '" + full + "'");
  } else if (section == "env") {
    c.env_params[key] = v;
  } else {
    throw ConfigError("unknown section '" + section + "'");
  }
}

/// "section.key=value"
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  apply_setting(c, detail::trim(assignment.substr(0, dot)), detail::trim(assignment.substr(dot + 1, eq - dot - 1)),
                assignment.substr(eq + 1));
}

inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) apply_setting(c, section, key, value.data());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  return parse_config(f);
}

/// Canonical text form; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const RunConfig& c) {
  using detail::join;
  using io::format_double;
  std::ostringstream o;
  std::vector<std::string> conds;
  for (auto k : c.sweep_conditions) conds.push_back(to_string(k));
  o << "[run]\n"
    << "env = " << c.env << "\n"
    << "condition = " << to_string(c.condition) << "\n"
    << "conditions = " << join(conds) << "\n"
    << "episodes = " << c.episodes << "\n"
    << "seeds = " << join(c.seeds) << "\n"
    << "output = " << c.output << "\n"
    << "checkpoint_every = " << c.checkpoint_every << "\n"
    << "save_buffer = " << (c.save_buffer ? "true" : "false") << "\n"
    << "eval_episodes = " << c.eval_episodes << "\n"
    << "workers = " << c.workers << "\n\n";
  const auto& a = c.agent;
  o << "[agent]\n"
    << "hidden = " << join(a.hidden) << "\n"
    << "gamma = " << format_double(a.gamma) << "\n"
    << "tau = " << format_double(a.tau) << "\n"
    << "batch_max = " << a.batch_max << "\n"
    << "buffer_max = " << a.buffer_max << "\n"
    << "epsilon = " << format_double(a.epsilon) << "\n"
    << "alpha_init = " << format_double(a.alpha_init) << "\n"
    << "lr_critic = " << format_double(a.lr_critic) << "\n"
    << "lr_actor = " << format_double(a.lr_actor) << "\n"
    << "lr_slack = " << format_double(a.lr_slack) << "\n"
    << "lr_alpha = " << format_double(a.lr_alpha) << "\n"
    << "policy = " << (a.family == policy::Family::gaussian ? "gaussian" : "student_t") << "\n"
    << "entropy_mode = " << sac::to_string(c.custom_mode) << "\n";
  if (std::isfinite(c.custom_h_star)) o << "h_star = " << format_double(c.custom_h_star) << "\n";
  o << "\n[attack]\n"
    << "probability = " << format_double(c.attack.probability) << "\n"
    << "amplitude = " << format_double(c.attack.amplitude) << "\n"
    << "seed = " << c.attack.rng_seed << "\n";
  o << "\n[env]\n";
  for (const auto& [k, v] : c.env_params) o << k << " = " << v << "\n";
  return o.str();
}

}  // namespace slacksac::run
