#pragma once

#include <random>

#include "slacksac/envs/env.hpp"

namespace slacksac::envs {

struct PointMassParams {
  double dt = 0.05;
  std::size_t episode_length = 200;
  double mass = 1.0;
  double max_force = 1.0;
  double damping = 0.0;  // linear drag coefficient
  double init_box = 1.0;
};

/// Planar unit mass pushed by a bounded force toward the origin.
///
/// state  (x, y, vx, vy); initial position uniform in [-init_box, init_box]^2,
///        initial velocity zero
/// action force in [-1, 1]^2, scaled by max_force
/// reward -|p - goal|^2 - 0.01 |a|^2, goal at the origin
/// There is no failure condition; episodes end by truncation.
class PointMass final : public Env {
 public:
  using Params = PointMassParams;

  explicit PointMass(Params p = {}) : params_(p) {
    if (!(p.dt > 0.0) || p.episode_length == 0 || !(p.mass > 0.0))
      throw ConfigError("point_mass: dt, episode_length and mass must be positive");
    spec_ = {4, 2, p.episode_length, p.dt, "point_mass"};
  }

  const EnvSpec& spec() const override { return spec_; }
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass>(*this); }

  const Eigen::Vector4d& state() const { return state_; }
  void set_state(const Eigen::Vector4d& s) { state_ = s; }

 protected:
  Eigen::VectorXd do_reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-params_.init_box, params_.init_box);
    const double x = box(rng);
    const double y = box(rng);
    state_ << x, y, 0.0, 0.0;
    return state_;
  }

  StepResult do_step(const Eigen::VectorXd& action) override {
    const Eigen::Vector2d force = params_.max_force * action.head<2>();
    Eigen::Vector2d v = state_.tail<2>();
    v += params_.dt * (force - params_.damping * v) / params_.mass;
    const Eigen::Vector2d p = state_.head<2>() + params_.dt * v;
    state_ << p, v;
    StepResult r;
    r.next_state = state_;
    r.reward = -p.squaredNorm() - 0.01 * action.squaredNorm();
    return r;
  }

 private:
  Params params_;
  EnvSpec spec_;
  Eigen::Vector4d state_ = Eigen::Vector4d::Zero();
};

}  // namespace slacksac::envs
