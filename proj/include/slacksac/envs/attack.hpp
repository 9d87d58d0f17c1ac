#pragma once

#include <cstdint>
#include <random>

#include "slacksac/envs/env.hpp"
#include "slacksac/policy/student_t.hpp"

namespace slacksac::envs {

inline constexpr double kAttackAmplitude = 0.2;

struct AttackConfig {
  double probability = 0.0;
  double amplitude = kAttackAmplitude;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(probability >= 0.0 && probability <= 1.0))
      throw ConfigError("attack probability must lie in [0, 1]");
    if (amplitude != kAttackAmplitude) throw ConfigError("attack amplitude is fixed at 0.2");
  }
};

struct AttackStepResult {
  StepResult step;
  bool attacked = false;
  Eigen::VectorXd applied_action;
};

/// With probability p per step the whole action vector is replaced by
/// 0.2 * squash(z), z ~ N(0, I), which lies strictly inside (-0.2, 0.2)^|A|.
class AttackWrapper {
 public:
  AttackWrapper(Env& env, AttackConfig config) : env_(env), config_(config), rng_(config.rng_seed) {
    config_.validate();
  }

  Eigen::VectorXd reset(std::uint64_t env_seed) { return env_.reset(env_seed); }

  /// Restarts the attack noise stream, e.g. at the start of each episode.
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  AttackStepResult step(const Eigen::VectorXd& action) {
    AttackStepResult r;
    std::bernoulli_distribution hit(config_.probability);
    r.attacked = hit(rng_);
    if (r.attacked) {
      r.applied_action.resize(action.size());
      for (Eigen::Index i = 0; i < action.size(); ++i) {
        std::normal_distribution<double> normal(0.0, 1.0);
        r.applied_action(i) = config_.amplitude * policy::squash(normal(rng_));
      }
    } else {
      r.applied_action = action;
    }
    r.step = env_.step(r.applied_action);
    return r;
  }

  Env& env() { return env_; }
  const AttackConfig& config() const { return config_; }

 private:
  Env& env_;
  AttackConfig config_;
  std::mt19937_64 rng_;
};

}  // namespace slacksac::envs
