#pragma once

// Variable-impedance tracking on a planar unit mass.
//
// A spring-damper with gains (k_p, k_d) per axis pulls the mass toward a
// sinusoidal target p_tar(t) = p_ini +- A sin(omega pi t). The agent does not
// command forces: each action nudges the gains by up to 5 % of their range.
// The reward trades effort against staying within 5 cm of the target:
//   r = exp(-sum |tau_i|) - [ |p_tar - p| > 0.05 ].

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "slacksac/envs/env.hpp"

namespace slacksac::envs {

inline constexpr std::size_t kImpedanceAxes = 2;
inline constexpr double kMaxStiffness = 100.0;
inline constexpr double kMaxDamping = 10.0;
inline constexpr double kTrackingTolerance = 0.05;

struct TrajectoryPhase {
  std::array<double, kImpedanceAxes> amplitude{};  // m
  std::array<double, kImpedanceAxes> omega{};      // p_tar = A sin(omega pi t)
  std::array<double, kImpedanceAxes> sign{1.0, 1.0};
};

struct ImpedanceState {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  Eigen::Vector2d effort = Eigen::Vector2d::Zero();
  Eigen::Vector2d stiffness = Eigen::Vector2d::Constant(50.0);
  Eigen::Vector2d damping = Eigen::Vector2d::Constant(5.0);
  TrajectoryPhase phase;
  double time = 0.0;
};

inline double impedance_target(double t, double amplitude, double omega, double sign, double origin) {
  return origin + sign * amplitude * std::sin(omega * std::numbers::pi * t);
}

inline double impedance_target_velocity(double t, double amplitude, double omega, double sign) {
  return sign * amplitude * omega * std::numbers::pi * std::cos(omega * std::numbers::pi * t);
}

inline double impedance_reward(const Eigen::VectorXd& efforts, double tracking_error) {
  return std::exp(-efforts.cwiseAbs().sum()) - (tracking_error > kTrackingTolerance ? 1.0 : 0.0);
}

/// Gains move by 5 % of their maximum per unit action, then are clamped.
inline void impedance_apply_action(ImpedanceState& s, const Eigen::VectorXd& action) {
  for (std::size_t i = 0; i < kImpedanceAxes; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s.stiffness(k) = std::clamp(s.stiffness(k) + 0.05 * kMaxStiffness * action(k), 0.0, kMaxStiffness);
    s.damping(k) = std::clamp(s.damping(k) + 0.05 * kMaxDamping * action(k + kImpedanceAxes), 0.0, kMaxDamping);
  }
}

struct ImpedanceTrackParams {
  double dt = 0.02;
  std::size_t episode_length = 500;
  double mass = 1.0;
  double amplitude_min = 0.05;
  double amplitude_max = 0.15;
  double omega_min = 0.1;
  double omega_max = 0.9;
  double initial_stiffness = 50.0;
  double initial_damping = 5.0;
};

/// action layout: (dk_p x, dk_p y, dk_d x, dk_d y).
/// state layout (14): position - origin, velocity, target - origin, target
/// velocity, effort, k_p / 100, k_d / 10.
class ImpedanceTrack final : public Env {
 public:
  using Params = ImpedanceTrackParams;

  explicit ImpedanceTrack(Params p = {}) : params_(p) {
    if (!(p.dt > 0.0) || p.episode_length == 0 || !(p.mass > 0.0))
      throw ConfigError("impedance_track: dt, episode_length and mass must be positive");
    if (p.amplitude_min > p.amplitude_max || p.omega_min > p.omega_max)
      throw ConfigError("impedance_track: empty amplitude or frequency range");
    spec_ = {14, 4, p.episode_length, p.dt, "impedance_track"};
  }

  const EnvSpec& spec() const override { return spec_; }
  std::unique_ptr<Env> clone() const override { return std::make_unique<ImpedanceTrack>(*this); }

  const ImpedanceState& state() const { return state_; }
  ImpedanceState& mutable_state() { return state_; }

  Eigen::VectorXd observation() const {
    Eigen::VectorXd o(14);
    o << state_.position - state_.origin, state_.velocity, state_.target - state_.origin,
        target_velocity(state_.time), state_.effort, state_.stiffness / kMaxStiffness,
        state_.damping / kMaxDamping;
    return o;
  }

 protected:
  Eigen::VectorXd do_reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(params_.amplitude_min, params_.amplitude_max);
    std::uniform_real_distribution<double> om(params_.omega_min, params_.omega_max);
    std::bernoulli_distribution coin(0.5);
    state_ = ImpedanceState{};
    for (std::size_t i = 0; i < kImpedanceAxes; ++i) {
      state_.phase.amplitude[i] = amp(rng);
      state_.phase.omega[i] = om(rng);
      state_.phase.sign[i] = coin(rng) ? 1.0 : -1.0;
    }
    state_.stiffness.setConstant(params_.initial_stiffness);
    state_.damping.setConstant(params_.initial_damping);
    state_.target = target(0.0);
    state_.position = state_.target;
    return observation();
  }

  StepResult do_step(const Eigen::VectorXd& action) override {
    impedance_apply_action(state_, action);
    const Eigen::Vector2d tar = target(state_.time);
    const Eigen::Vector2d tar_vel = target_velocity(state_.time);
    state_.effort = state_.stiffness.cwiseProduct(tar - state_.position) +
                    state_.damping.cwiseProduct(tar_vel - state_.velocity);
    state_.velocity += params_.dt * state_.effort / params_.mass;
    state_.position += params_.dt * state_.velocity;
    state_.time += params_.dt;
    state_.target = target(state_.time);
    StepResult r;
    r.reward = impedance_reward(state_.effort, (state_.target - state_.position).norm());
    r.next_state = observation();
    return r;
  }

 private:
  Eigen::Vector2d target(double t) const {
    Eigen::Vector2d p;
    for (std::size_t i = 0; i < kImpedanceAxes; ++i)
      p(static_cast<Eigen::Index>(i)) = impedance_target(t, state_.phase.amplitude[i], state_.phase.omega[i],
                                                         state_.phase.sign[i], state_.origin(static_cast<Eigen::Index>(i)));
    return p;
  }

  Eigen::Vector2d target_velocity(double t) const {
    Eigen::Vector2d v;
    for (std::size_t i = 0; i < kImpedanceAxes; ++i)
      v(static_cast<Eigen::Index>(i)) =
          impedance_target_velocity(t, state_.phase.amplitude[i], state_.phase.omega[i], state_.phase.sign[i]);
    return v;
  }

  Params params_;
  EnvSpec spec_;
  ImpedanceState state_;
};

}  // namespace slacksac::envs
