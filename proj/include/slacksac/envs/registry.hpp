#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "slacksac/envs/impedance.hpp"
#include "slacksac/envs/pendulum.hpp"
#include "slacksac/envs/point_mass.hpp"

namespace slacksac::envs {

using EnvParams = std::map<std::string, std::string>;

inline const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"point_mass", "pendulum", "impedance_track"};
  return names;
}

namespace detail {

class ParamReader {
 public:
  ParamReader(const std::string& env, const EnvParams& params) : env_(env), params_(params) {}

  void read(const std::string& key, double& out) {
    if (auto it = find(key); it != params_.end()) {
      try {
        std::size_t pos = 0;
        out = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError(env_ + "." + key + ": expected a number, got '" + it->second + "'");
      }
    }
  }

  void read(const std::string& key, std::size_t& out) {
    if (auto it = find(key); it != params_.end()) {
      try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size() || v < 0) throw std::invalid_argument(key);
        out = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ConfigError(env_ + "." + key + ": expected a non-negative integer, got '" + it->second + "'");
      }
    }
  }

  void finish() const {
    for (const auto& [k, v] : params_)
      if (!used_.count(k)) throw ConfigError("unknown parameter '" + k + "' for env " + env_);
  }

 private:
  EnvParams::const_iterator find(const std::string& key) {
    used_[key] = true;
    return params_.find(key);
  }

  std::string env_;
  const EnvParams& params_;
  std::map<std::string, bool> used_;
};

}  // namespace detail

inline std::unique_ptr<Env> make_env(const std::string& name, const EnvParams& params = {}) {
  detail::ParamReader r(name, params);
  std::unique_ptr<Env> env;
  if (name == "point_mass") {
    PointMass::Params p;
    r.read("dt", p.dt);
    r.read("episode_length", p.episode_length);
    r.read("mass", p.mass);
    r.read("max_force", p.max_force);
    r.read("damping", p.damping);
    r.read("init_box", p.init_box);
    r.finish();
    env = std::make_unique<PointMass>(p);
  } else if (name == "pendulum") {
    Pendulum::Params p;
    r.read("dt", p.dt);
    r.read("episode_length", p.episode_length);
    r.read("gravity", p.gravity);
    r.read("mass", p.mass);
    r.read("length", p.length);
    r.read("max_torque", p.max_torque);
    r.read("max_speed", p.max_speed);
    r.read("damping", p.damping);
    r.read("substeps", p.substeps);
    r.finish();
    env = std::make_unique<Pendulum>(p);
  } else if (name == "impedance_track") {
    ImpedanceTrack::Params p;
    r.read("dt", p.dt);
    r.read("episode_length", p.episode_length);
    r.read("mass", p.mass);
    r.read("amplitude_min", p.amplitude_min);
    r.read("amplitude_max", p.amplitude_max);
    r.read("omega_min", p.omega_min);
    r.read("omega_max", p.omega_max);
    r.read("initial_stiffness", p.initial_stiffness);
    r.read("initial_damping", p.initial_damping);
    r.finish();
    env = std::make_unique<ImpedanceTrack>(p);
  } else {
    throw ConfigError("unknown env '" + name + "'");
  }
  return env;
}

}  // namespace slacksac::envs
