#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "slacksac/error.hpp"

namespace slacksac::envs {

struct EnvSpec {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::size_t episode_length = 1;
  double dt = 0.05;
  std::string name;
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;       // failure condition
  bool truncated = false;  // episode_length reached
};

/// Common interface. Actions live in [-1, 1]^|A|; anything outside is clamped
/// and counted.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  Eigen::VectorXd reset(std::uint64_t seed) {
    steps_ = 0;
    return do_reset(seed);
  }

  StepResult step(const Eigen::VectorXd& action) {
    if (static_cast<std::size_t>(action.size()) != spec().action_dim)
      throw ConfigError(spec().name + ": action has wrong dimension");
    if (!action.allFinite()) throw NumericError(spec().name + ": non-finite action");
    Eigen::VectorXd a = action;
    if (a.cwiseAbs().maxCoeff() > 1.0) {
      ++clamped_actions_;
      a = a.cwiseMax(-1.0).cwiseMin(1.0);
    }
    auto r = do_step(a);
    ++steps_;
    if (!r.done && steps_ >= spec().episode_length) r.truncated = true;
    return r;
  }

  std::size_t steps() const { return steps_; }
  std::uint64_t clamped_actions() const { return clamped_actions_; }

 protected:
  virtual Eigen::VectorXd do_reset(std::uint64_t seed) = 0;
  virtual StepResult do_step(const Eigen::VectorXd& action) = 0;

 private:
  std::size_t steps_ = 0;
  std::uint64_t clamped_actions_ = 0;
};

}  // namespace slacksac::envs
