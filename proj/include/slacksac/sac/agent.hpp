#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slacksac/error.hpp"
#include "slacksac/io/checkpoint.hpp"
#include "slacksac/nn/adam.hpp"
#include "slacksac/policy/policy_net.hpp"
#include "slacksac/replay.hpp"
#include "slacksac/sac/losses.hpp"
#include "slacksac/slack.hpp"

namespace slacksac::sac {

enum class EntropyMode { conventional, slack };

inline std::string to_string(EntropyMode m) { return m == EntropyMode::slack ? "slack" : "conventional"; }

struct AgentConfig {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::vector<std::size_t> hidden{100, 100};
  double gamma = 0.99;
  double tau = 5e-3;
  std::size_t batch_max = 256;
  std::size_t buffer_max = 102400;
  EntropyMode entropy_mode = EntropyMode::conventional;
  double h_star = -1.0;
  double epsilon = -1.0;  // negative: 0.1 |A|
  double alpha_init = 1.0;
  double lr_critic = 3e-4;
  double lr_actor = 3e-4;
  double lr_slack = 3e-4;
  double lr_alpha = 3e-4;
  policy::Family family = policy::Family::student_t;
  std::uint64_t seed = 0;

  void validate() const {
    if (state_dim == 0 || action_dim == 0) throw ConfigError("state and action dims must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (batch_max == 0 || buffer_max == 0) throw ConfigError("batch_max and buffer_max must be positive");
    if (!(alpha_init > 0.0)) throw ConfigError("alpha_init must be positive");
    for (double lr : {lr_critic, lr_actor, lr_slack, lr_alpha})
      if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("hidden layer widths must be positive");
    if (!std::isfinite(h_star)) throw ConfigError("h_star must be finite");
  }
};

struct TemperatureState {
  double alpha_tilde = 0.0;  // log alpha
  double alpha = 1.0;
  double learning_rate = 3e-4;

  static TemperatureState from_alpha(double alpha, double learning_rate) {
    return {std::log(alpha), alpha, learning_rate};
  }
};

/// Mirror step: the gradient w.r.t. alpha is applied to log(alpha).
inline void alpha_update(TemperatureState& state, double g) {
  if (!std::isfinite(g)) throw NumericError("temperature gradient is not finite");
  state.alpha_tilde -= state.learning_rate * g;
  state.alpha = std::exp(state.alpha_tilde);
}

struct UpdateStats {
  std::size_t batches = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double log_pi = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double residual = 0.0;
  double equality_fraction = 0.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Agent {
 public:
  explicit Agent(AgentConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto s = config_.seed;
    policy_ = policy::PolicyNet::init(config_.state_dim, config_.action_dim, config_.hidden,
                                      splitmix64(s * 8 + 1), config_.family);
    critics_ = CriticPair::init(config_.state_dim, config_.action_dim, config_.hidden,
                                splitmix64(s * 8 + 2), splitmix64(s * 8 + 3));
    slack_net_ = slack::SlackNet::init(config_.state_dim, config_.hidden, splitmix64(s * 8 + 4));
    slack_config_ = slack::SlackConfig::make(slack::ActionSpaceKind::continuous, config_.action_dim,
                                             config_.h_star, config_.epsilon);
    temperature_ = TemperatureState::from_alpha(config_.alpha_init, config_.lr_alpha);
    opt_q1_ = nn::OptimizerState::for_params(critics_.q1, {config_.lr_critic});
    opt_q2_ = nn::OptimizerState::for_params(critics_.q2, {config_.lr_critic});
    opt_policy_ = nn::OptimizerState::for_params(policy_.params, {config_.lr_actor});
    opt_slack_ = nn::OptimizerState::for_params(slack_net_.params, {config_.lr_slack});
    rng_.seed(splitmix64(s * 8 + 5));
  }

  const AgentConfig& config() const { return config_; }
  const policy::PolicyNet& policy() const { return policy_; }
  const CriticPair& critics() const { return critics_; }
  const slack::SlackNet& slack_net() const { return slack_net_; }
  const slack::SlackConfig& slack_config() const { return slack_config_; }
  const TemperatureState& temperature() const { return temperature_; }
  std::mt19937_64& rng() { return rng_; }
  std::uint64_t empty_buffer_skips() const { return empty_buffer_skips_; }

  // Mutable access for tests and tools that stage specific parameters.
  policy::PolicyNet& mutable_policy() { return policy_; }
  CriticPair& mutable_critics() { return critics_; }
  slack::SlackNet& mutable_slack_net() { return slack_net_; }
  TemperatureState& mutable_temperature() { return temperature_; }

  bool slack_enabled() const { return config_.entropy_mode == EntropyMode::slack; }

  /// Slack values for a batch of states; zeros in conventional mode.
  Eigen::RowVectorXd deltas(const Eigen::MatrixXd& states) const {
    if (!slack_enabled()) return Eigen::RowVectorXd::Zero(states.cols());
    return slack_net_.delta(states, slack_config_.delta_bar);
  }

  // The five sub-steps of one mini-batch update, in the order train_batch()
  // runs them. Each touches only its own parameter block.

  double critic_step(const Batch& batch) {
    const Eigen::VectorXd y = td_target(batch, critics_, policy_, temperature_.alpha, config_.gamma, rng_);
    auto g1 = nn::MlpGrads::zeros_like(critics_.q1);
    auto g2 = nn::MlpGrads::zeros_like(critics_.q2);
    const double loss = critic_loss(batch, y, critics_, g1, g2);
    nn::optimizer_step(opt_q1_, critics_.q1, g1);
    nn::optimizer_step(opt_q2_, critics_.q2, g2);
    return loss;
  }

  ActorResult actor_step(const Batch& batch) {
    auto g = nn::MlpGrads::zeros_like(policy_.params);
    auto result = actor_loss(batch.states, critics_, policy_, temperature_.alpha, rng_, g);
    nn::optimizer_step(opt_policy_, policy_.params, g);
    return result;
  }

  /// Returns the detached slack values used in the update.
  std::vector<double> alpha_step(const Batch& batch, std::span<const double> log_pis) {
    const Eigen::RowVectorXd d = deltas(batch.states);
    std::vector<double> delta(d.data(), d.data() + d.size());
    alpha_update(temperature_, alpha_gradient(log_pis, slack_config_.h_star, delta));
    return delta;
  }

  slack::SlackStats slack_step(const Batch& batch, std::span<const double> log_pis) {
    return slack::slack_update(slack_net_, opt_slack_, batch.states, log_pis, temperature_.alpha,
                               slack_config_);
  }

  void target_step() { soft_update(critics_, config_.tau); }

  UpdateStats train_batch(const Batch& batch) {
    UpdateStats st;
    st.batches = 1;
    st.critic_loss = critic_step(batch);
    const auto actor = actor_step(batch);
    st.actor_loss = actor.loss;
    const auto delta = alpha_step(batch, actor.log_pis);
    for (std::size_t i = 0; i < actor.log_pis.size(); ++i) {
      st.log_pi += actor.log_pis[i] / static_cast<double>(actor.log_pis.size());
      st.residual += slack::constraint_residual(actor.log_pis[i], slack_config_.h_star, delta[i]) /
                     static_cast<double>(actor.log_pis.size());
    }
    if (slack_enabled()) {
      const auto ss = slack_step(batch, actor.log_pis);
      st.delta = ss.mean_delta;
      st.equality_fraction = ss.equality_fraction;
    }
    target_step();
    st.alpha = temperature_.alpha;
    return st;
  }

  /// Replays floor(size/2) transitions in mini-batches. Returned values are
  /// per-batch means.
  UpdateStats train_on_episode_end(const ReplayBuffer& buffer) {
    UpdateStats total;
    if (buffer.empty()) {
      ++empty_buffer_skips_;
      return total;
    }
    const auto epoch = buffer.sample_epoch(config_.batch_max, rng_);
    for (const auto& slots : epoch) {
      const auto st = train_batch(make_batch(buffer, slots));
      ++total.batches;
      total.critic_loss += st.critic_loss;
      total.actor_loss += st.actor_loss;
      total.log_pi += st.log_pi;
      total.alpha += st.alpha;
      total.delta += st.delta;
      total.residual += st.residual;
      total.equality_fraction += st.equality_fraction;
    }
    if (total.batches > 0) {
      const double k = static_cast<double>(total.batches);
      total.critic_loss /= k;
      total.actor_loss /= k;
      total.log_pi /= k;
      total.alpha /= k;
      total.delta /= k;
      total.residual /= k;
      total.equality_fraction /= k;
    }
    return total;
  }

  // Checkpointing -------------------------------------------------------------

  void save(io::Checkpoint& ck) const {
    const auto& c = config_;
    std::vector<std::uint64_t> hidden(c.hidden.begin(), c.hidden.end());
    ck.put_u64("config.hidden", hidden);
    const std::uint64_t ints[] = {c.state_dim, c.action_dim, c.batch_max, c.buffer_max,
                                  static_cast<std::uint64_t>(c.entropy_mode),
                                  static_cast<std::uint64_t>(c.family), c.seed};
    ck.put_u64("config.ints", ints);
    const double reals[] = {c.gamma, c.tau, c.h_star, c.epsilon, c.alpha_init,
                            c.lr_critic, c.lr_actor, c.lr_slack, c.lr_alpha};
    ck.put("config.reals", reals);

    io::put_network(ck, "policy", policy_.params);
    io::put_network(ck, "q1", critics_.q1);
    io::put_network(ck, "q2", critics_.q2);
    io::put_network(ck, "q1_target", critics_.q1_target);
    io::put_network(ck, "q2_target", critics_.q2_target);
    io::put_network(ck, "slack", slack_net_.params);
    io::put_optimizer(ck, "opt.policy", opt_policy_);
    io::put_optimizer(ck, "opt.q1", opt_q1_);
    io::put_optimizer(ck, "opt.q2", opt_q2_);
    io::put_optimizer(ck, "opt.slack", opt_slack_);
    const double temp[] = {temperature_.alpha_tilde, temperature_.alpha, temperature_.learning_rate};
    ck.put("temperature", temp);
    ck.put_count("empty_buffer_skips", empty_buffer_skips_);
    std::ostringstream rng_state;
    rng_state << rng_;
    ck.put_text("agent.rng", rng_state.str());
  }

  static Agent load(const io::Checkpoint& ck) {
    AgentConfig c;
    const auto& hidden = ck.u64("config.hidden");
    c.hidden.assign(hidden.begin(), hidden.end());
    const auto& ints = ck.u64("config.ints");
    const auto& reals = ck.f64("config.reals");
    if (ints.size() != 7 || reals.size() != 9) throw IoError("checkpoint config block has wrong size");
    c.state_dim = ints[0];
    c.action_dim = ints[1];
    c.batch_max = ints[2];
    c.buffer_max = ints[3];
    c.entropy_mode = static_cast<EntropyMode>(ints[4]);
    c.family = static_cast<policy::Family>(ints[5]);
    c.seed = ints[6];
    c.gamma = reals[0];
    c.tau = reals[1];
    c.h_star = reals[2];
    c.epsilon = reals[3];
    c.alpha_init = reals[4];
    c.lr_critic = reals[5];
    c.lr_actor = reals[6];
    c.lr_slack = reals[7];
    c.lr_alpha = reals[8];

    Agent a(c);
    a.policy_.params = io::get_network(ck, "policy");
    a.critics_.q1 = io::get_network(ck, "q1");
    a.critics_.q2 = io::get_network(ck, "q2");
    a.critics_.q1_target = io::get_network(ck, "q1_target");
    a.critics_.q2_target = io::get_network(ck, "q2_target");
    a.slack_net_.params = io::get_network(ck, "slack");
    a.opt_policy_ = io::get_optimizer(ck, "opt.policy", a.policy_.params);
    a.opt_q1_ = io::get_optimizer(ck, "opt.q1", a.critics_.q1);
    a.opt_q2_ = io::get_optimizer(ck, "opt.q2", a.critics_.q2);
    a.opt_slack_ = io::get_optimizer(ck, "opt.slack", a.slack_net_.params);
    const auto& temp = ck.f64("temperature");
    if (temp.size() != 3) throw IoError("checkpoint temperature block has wrong size");
    a.temperature_ = {temp[0], temp[1], temp[2]};
    a.empty_buffer_skips_ = ck.count("empty_buffer_skips");
    std::istringstream rng_state(ck.text("agent.rng"));
    rng_state >> a.rng_;
    if (!rng_state) throw IoError("checkpoint rng state is corrupt");
    return a;
  }

 private:
  AgentConfig config_;
  policy::PolicyNet policy_;
  CriticPair critics_;
  slack::SlackNet slack_net_;
  slack::SlackConfig slack_config_;
  TemperatureState temperature_;
  nn::OptimizerState opt_q1_, opt_q2_, opt_policy_, opt_slack_;
  std::mt19937_64 rng_;
  std::uint64_t empty_buffer_skips_ = 0;
};

}  // namespace slacksac::sac
