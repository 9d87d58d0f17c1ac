#pragma once

// Soft actor-critic losses and their gradients.
//
// Every network-level function writes parameter gradients into caller-owned
// buffers and never touches parameters; the agent decides which buffers are
// applied. Randomness comes from the caller's engine, so two calls with copies
// of the same engine see the same noise.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slacksac/error.hpp"
#include "slacksac/nn/mlp.hpp"
#include "slacksac/policy/policy_net.hpp"
#include "slacksac/replay.hpp"

namespace slacksac::sac {

struct CriticPair {
  nn::MlpParams q1, q2;
  nn::MlpParams q1_target, q2_target;

  static CriticPair init(std::size_t state_dim, std::size_t action_dim,
                         const std::vector<std::size_t>& hidden, std::uint64_t seed_1,
                         std::uint64_t seed_2) {
    std::vector<std::size_t> sizes{state_dim + action_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    CriticPair c;
    c.q1 = nn::MlpParams::init(sizes, seed_1);
    c.q2 = nn::MlpParams::init(sizes, seed_2);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    return c;
  }
};

struct Batch {
  Eigen::MatrixXd states;       // dim_s x B
  Eigen::MatrixXd actions;      // |A| x B
  Eigen::MatrixXd next_states;  // dim_s x B
  Eigen::VectorXd rewards;
  Eigen::VectorXd done;  // 1 cuts bootstrapping; truncation does not

  Eigen::Index size() const { return states.cols(); }
};

inline Batch make_batch(const ReplayBuffer& buffer, std::span<const std::size_t> slots) {
  Batch b;
  if (slots.empty()) return b;
  const auto& first = buffer[slots[0]];
  const auto n = static_cast<Eigen::Index>(slots.size());
  b.states.resize(first.state.size(), n);
  b.actions.resize(first.action.size(), n);
  b.next_states.resize(first.next_state.size(), n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = buffer[slots[static_cast<std::size_t>(i)]];
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.next_states.col(i) = t.next_state;
    b.rewards(i) = t.reward;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

inline Eigen::MatrixXd state_action(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

// Scalar forms -----------------------------------------------------------------

/// y = r + (1 - done) gamma (min(Q1', Q2') - alpha ln pi').
inline double soft_bellman_target(double reward, bool done, double gamma, double q1_next,
                                  double q2_next, double alpha, double log_pi_next) {
  if (done) return reward;
  return reward + gamma * (std::min(q1_next, q2_next) - alpha * log_pi_next);
}

inline double critic_sample_loss(double y, double q1, double q2) {
  return 0.5 * (y - q1) * (y - q1) + 0.5 * (y - q2) * (y - q2);
}

inline double actor_sample_loss(double q1, double q2, double alpha, double log_pi) {
  return -std::min(q1, q2) + alpha * log_pi;
}

/// d/d(alpha) of mean(-alpha (ln pi + H* + Delta)); zero deltas give the
/// conventional rule. Applied to log(alpha) directly.
inline double alpha_gradient(std::span<const double> log_pis, double h_star,
                             std::span<const double> deltas = {}) {
  if (log_pis.empty()) return 0.0;
  double g = 0.0;
  for (std::size_t i = 0; i < log_pis.size(); ++i)
    g -= log_pis[i] + h_star + (deltas.empty() ? 0.0 : deltas[i]);
  return g / static_cast<double>(log_pis.size());
}

// Network-level losses ----------------------------------------------------------

template <class Rng>
Eigen::VectorXd td_target(const Batch& batch, const CriticPair& critics,
                          const policy::PolicyNet& policy, double alpha, double gamma, Rng& rng) {
  const Eigen::Index n = batch.size();
  const auto heads = policy.heads(batch.next_states);
  Eigen::MatrixXd next_actions(policy.action_dim(), n);
  Eigen::VectorXd next_log_pi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& h = heads[static_cast<std::size_t>(i)];
    const auto s = policy::sample_reparam(h, policy::draw_noise(h, rng));
    next_actions.col(i) = s.action;
    next_log_pi(i) = s.log_prob;
  }
  const Eigen::MatrixXd x = state_action(batch.next_states, next_actions);
  const Eigen::MatrixXd q1 = nn::forward(critics.q1_target, x);
  const Eigen::MatrixXd q2 = nn::forward(critics.q2_target, x);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y(i) = soft_bellman_target(batch.rewards(i), batch.done(i) > 0.5, gamma, q1(0, i), q2(0, i),
                               alpha, next_log_pi(i));
  return y;
}

/// mean over the batch of 1/2 (y - Q1)^2 + 1/2 (y - Q2)^2; gradients go to
/// the online critics only.
inline double critic_loss(const Batch& batch, const Eigen::VectorXd& y, const CriticPair& critics,
                          nn::MlpGrads& grad_q1, nn::MlpGrads& grad_q2) {
  const Eigen::Index n = batch.size();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd x = state_action(batch.states, batch.actions);
  nn::ForwardCache c1, c2;
  const Eigen::MatrixXd q1 = nn::forward(critics.q1, x, &c1);
  const Eigen::MatrixXd q2 = nn::forward(critics.q2, x, &c2);
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd up1(1, n), up2(1, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += critic_sample_loss(y(i), q1(0, i), q2(0, i)) * inv_n;
    up1(0, i) = (q1(0, i) - y(i)) * inv_n;
    up2(0, i) = (q2(0, i) - y(i)) * inv_n;
  }
  nn::backward(critics.q1, c1, up1, grad_q1);
  nn::backward(critics.q2, c2, up2, grad_q2);
  return loss;
}

struct ActorResult {
  double loss = 0.0;
  std::vector<double> log_pis;  // detached, one per state
  double mean_action_l2 = 0.0;
};

/// mean over states of -min(Q1, Q2)(s, a) + alpha ln pi(a|s) with a drawn by
/// reparameterization from the given noise (one draw per state). Gradients
/// reach the policy through the action and the explicit log-density; critic
/// gradients are discarded. The gamma draws are data: no gradient flows
/// through them into the dof.
inline ActorResult actor_loss(const Eigen::MatrixXd& states, const CriticPair& critics,
                              const policy::PolicyNet& policy, double alpha,
                              const std::vector<policy::Noise>& noises, nn::MlpGrads& grad_policy) {
  const Eigen::Index n = states.cols();
  ActorResult result;
  if (n == 0) return result;
  if (noises.size() != static_cast<std::size_t>(n)) throw ConfigError("actor_loss: one noise draw per state");
  const auto a_dim = static_cast<Eigen::Index>(policy.action_dim());
  nn::ForwardCache policy_cache;
  Eigen::MatrixXd raw;
  const auto heads = policy.heads(states, &policy_cache, &raw);
  std::vector<policy::SampledAction> samples;
  samples.reserve(static_cast<std::size_t>(n));
  Eigen::MatrixXd actions(a_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    samples.push_back(policy::sample_reparam(heads[static_cast<std::size_t>(i)], noises[static_cast<std::size_t>(i)]));
    actions.col(i) = samples.back().action;
  }
  const Eigen::MatrixXd x = state_action(states, actions);
  nn::ForwardCache c1, c2;
  const Eigen::MatrixXd q1 = nn::forward(critics.q1, x, &c1);
  const Eigen::MatrixXd q2 = nn::forward(critics.q2, x, &c2);

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd up1 = Eigen::MatrixXd::Zero(1, n), up2 = Eigen::MatrixXd::Zero(1, n);
  result.log_pis.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lp = samples[static_cast<std::size_t>(i)].log_prob;
    result.log_pis[static_cast<std::size_t>(i)] = lp;
    result.loss += actor_sample_loss(q1(0, i), q2(0, i), alpha, lp) * inv_n;
    result.mean_action_l2 += actions.col(i).norm() * inv_n;
    if (q1(0, i) <= q2(0, i))
      up1(0, i) = -inv_n;
    else
      up2(0, i) = -inv_n;
  }

  // Action cotangents through both critics; their parameter grads are scratch.
  auto scratch_1 = nn::MlpGrads::zeros_like(critics.q1);
  auto scratch_2 = nn::MlpGrads::zeros_like(critics.q2);
  const Eigen::MatrixXd dx1 = nn::backward(critics.q1, c1, up1, scratch_1);
  const Eigen::MatrixXd dx2 = nn::backward(critics.q2, c2, up2, scratch_2);
  const Eigen::MatrixXd d_action = (dx1 + dx2).bottomRows(a_dim);

  Eigen::MatrixXd d_raw(raw.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& h = heads[k];
    const auto& s = samples[k];
    const auto lpg = policy::log_prob_grad(h, s.pre_squash);
    const double w = alpha * inv_n;
    Eigen::VectorXd d_u(a_dim);
    for (Eigen::Index j = 0; j < a_dim; ++j) {
      const bool clamped = std::abs(s.pre_squash(j)) >= policy::kSampleClamp;
      d_u(j) = clamped ? 0.0 : d_action(j, i) * policy::squash_grad(s.pre_squash(j)) + w * lpg.d_pre_squash(j);
    }
    const Eigen::VectorXd d_loc = d_u + w * lpg.d_location;
    const Eigen::VectorXd d_scale = d_u.cwiseProduct(policy::noise_multiplier(noises[k])) + w * lpg.d_scale;
    const Eigen::VectorXd d_dof = w * lpg.d_dof;
    d_raw.col(i) = policy::raw_gradient(raw.col(i), d_loc, d_scale, d_dof, policy.family);
  }
  nn::backward(policy.params, policy_cache, d_raw, grad_policy);
  return result;
}

template <std::uniform_random_bit_generator Rng>
ActorResult actor_loss(const Eigen::MatrixXd& states, const CriticPair& critics,
                       const policy::PolicyNet& policy, double alpha, Rng& rng,
                       nn::MlpGrads& grad_policy) {
  const auto heads = policy.heads(states);
  std::vector<policy::Noise> noises;
  noises.reserve(heads.size());
  for (const auto& h : heads) noises.push_back(policy::draw_noise(h, rng));
  return actor_loss(states, critics, policy, alpha, noises, grad_policy);
}

/// Polyak averaging: target <- (1 - tau) target + tau online.
inline void soft_update(nn::MlpParams& target, const nn::MlpParams& online, double tau) {
  auto t = nn::tensors(target);
  auto o = nn::tensors(online);
  for (std::size_t k = 0; k < t.size(); ++k)
    for (std::size_t i = 0; i < t[k].size(); ++i) t[k][i] = (1.0 - tau) * t[k][i] + tau * o[k][i];
}

inline void soft_update(CriticPair& critics, double tau) {
  soft_update(critics.q1_target, critics.q1, tau);
  soft_update(critics.q2_target, critics.q2, tau);
}

}  // namespace slacksac::sac
