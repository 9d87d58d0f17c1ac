#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "slacksac/envs/env.hpp"

namespace slacksac::envs {

struct PendulumParams {
  double dt = 0.05;
  std::size_t episode_length = 200;
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_torque = 2.0;
  double max_speed = 8.0;
  double damping = 0.0;
  std::size_t substeps = 100;
};

/// Torque-limited swing-up of a uniform rod (angle 0 is upright).
///
///   theta'' = 3 g / (2 l) sin(theta) + 3 / (m l^2) u - damping theta'
///
/// observation (cos theta, sin theta, theta_dot), torque u = max_torque * a,
/// reward -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2). Each control step is
/// split into `substeps` leapfrog substeps (half kick, drift, half kick), which
/// keeps the energy drift second order in the substep; angular speed is
/// clipped to max_speed.
class Pendulum final : public Env {
 public:
  using Params = PendulumParams;

  explicit Pendulum(Params p = {}) : params_(p) {
    if (!(p.dt > 0.0) || p.episode_length == 0 || p.substeps == 0)
      throw ConfigError("pendulum: dt, episode_length and substeps must be positive");
    spec_ = {3, 1, p.episode_length, p.dt, "pendulum"};
  }

  const EnvSpec& spec() const override { return spec_; }
  std::unique_ptr<Env> clone() const override { return std::make_unique<Pendulum>(*this); }

  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }
  void set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = theta_dot;
  }

  /// Conserved under zero torque and zero damping:
  /// 1/2 theta_dot^2 + 3 g / (2 l) cos(theta).
  double energy() const {
    return 0.5 * theta_dot_ * theta_dot_ + 1.5 * params_.gravity / params_.length * std::cos(theta_);
  }

  static double wrap_angle(double x) {
    return std::remainder(x, 2.0 * std::numbers::pi);
  }

 protected:
  Eigen::VectorXd do_reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    theta_ = angle(rng);
    theta_dot_ = speed(rng);
    return observation();
  }

  StepResult do_step(const Eigen::VectorXd& action) override {
    const double u = params_.max_torque * action(0);
    const double cost = std::pow(wrap_angle(theta_), 2) + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;
    const double h = params_.dt / static_cast<double>(params_.substeps);
    const double k = 1.5 * params_.gravity / params_.length;
    const double b = 3.0 / (params_.mass * params_.length * params_.length);
    auto kick = [&](double dt) {
      theta_dot_ += dt * (k * std::sin(theta_) + b * u - params_.damping * theta_dot_);
      theta_dot_ = std::clamp(theta_dot_, -params_.max_speed, params_.max_speed);
    };
    for (std::size_t i = 0; i < params_.substeps; ++i) {
      kick(0.5 * h);
      theta_ += h * theta_dot_;
      kick(0.5 * h);
    }
    StepResult r;
    r.next_state = observation();
    r.reward = -cost;
    return r;
  }

 private:
  Eigen::VectorXd observation() const {
    return Eigen::Vector3d(std::cos(theta_), std::sin(theta_), theta_dot_);
  }

  Params params_;
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

}  // namespace slacksac::envs
