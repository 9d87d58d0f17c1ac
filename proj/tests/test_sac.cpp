#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "scenarios.hpp"
#include "slacksac/io/checkpoint.hpp"
#include "slacksac/sac/agent.hpp"
#include "slacksac/sac/losses.hpp"

using namespace slacksac;
using namespace slacksac::sac;

namespace {

std::vector<double> flatten(const nn::MlpParams& p) {
  std::vector<double> out;
  for (auto t : nn::tensors(p)) out.insert(out.end(), t.begin(), t.end());
  return out;
}

struct Snapshot {
  std::vector<double> policy, q1, q2, q1t, q2t, slack;
  double alpha_tilde;

  explicit Snapshot(const Agent& a)
      : policy(flatten(a.policy().params)),
        q1(flatten(a.critics().q1)),
        q2(flatten(a.critics().q2)),
        q1t(flatten(a.critics().q1_target)),
        q2t(flatten(a.critics().q2_target)),
        slack(flatten(a.slack_net().params)),
        alpha_tilde(a.temperature().alpha_tilde) {}
};

struct Changed {
  bool policy, q1, q2, q1t, q2t, slack, alpha;
};

Changed diff(const Snapshot& a, const Snapshot& b) {
  return {a.policy != b.policy, a.q1 != b.q1, a.q2 != b.q2, a.q1t != b.q1t, a.q2t != b.q2t, a.slack != b.slack,
          a.alpha_tilde != b.alpha_tilde};
}

AgentConfig small_config(EntropyMode mode, std::uint64_t seed = 3) {
  AgentConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.hidden = {8, 8};
  c.entropy_mode = mode;
  c.h_star = -2.0;
  c.batch_max = 16;
  c.buffer_max = 1000;
  c.seed = seed;
  return c;
}

ReplayBuffer random_buffer(std::size_t n, std::uint64_t seed) {
  ReplayBuffer b(1000);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.state = Eigen::Vector3d(g(rng), g(rng), g(rng));
    t.next_state = Eigen::Vector3d(g(rng), g(rng), g(rng));
    t.action = Eigen::Vector2d(u(rng), u(rng));
    t.reward = g(rng);
    t.done = i % 7 == 0;
    b.push(std::move(t));
  }
  return b;
}

}  // namespace

TEST(SoftBellmanTarget, Examples) {
  EXPECT_DOUBLE_EQ(soft_bellman_target(1.7, false, 0.0, 5, 6, 0.3, -1), 1.7);
  EXPECT_NEAR(soft_bellman_target(1.0, false, 0.9, 2.0, 3.0, 0.5, -1.0), 3.25, 1e-15);
  EXPECT_DOUBLE_EQ(soft_bellman_target(1.0, true, 0.9, 2.0, 3.0, 0.5, -1.0), 1.0);
}

TEST(TdTarget, MyopicAndTerminalCases) {
  auto p = scenarios::small_problem(1);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd y0 = td_target(p.batch, p.critics, p.policy, 0.5, 0.0, rng);
  EXPECT_LT((y0 - p.batch.rewards).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::VectorXd y = td_target(p.batch, p.critics, p.policy, 0.5, 0.9, rng);
  EXPECT_DOUBLE_EQ(y(1), p.batch.rewards(1));  // done
  EXPECT_NE(y(0), p.batch.rewards(0));
}

TEST(TdTarget, DependsOnTargetNetworksOnly) {
  auto p = scenarios::small_problem(2);
  std::mt19937_64 r1(4), r2(4), r3(4);
  const Eigen::VectorXd y = td_target(p.batch, p.critics, p.policy, 0.5, 0.9, r1);
  auto changed_online = p.critics;
  changed_online.q1.layers[0].weight.array() += 0.5;
  changed_online.q2.layers[0].weight.array() += 0.5;
  EXPECT_EQ(td_target(p.batch, changed_online, p.policy, 0.5, 0.9, r2), y);
  auto changed_target = p.critics;
  changed_target.q1_target.layers.back().bias.array() += 1.0;
  changed_target.q2_target.layers.back().bias.array() += 1.0;
  const Eigen::VectorXd y2 = td_target(p.batch, changed_target, p.policy, 0.5, 0.9, r3);
  EXPECT_NE(y2, y);
}

TEST(CriticLoss, SampleValue) {
  EXPECT_NEAR(critic_sample_loss(3.25, 3.0, 4.0), 0.3125, 1e-15);
}

TEST(CriticLoss, PerfectFitHasZeroLossAndGradient) {
  auto p = scenarios::small_problem(3);
  for (auto* q : {&p.critics.q1, &p.critics.q2}) {
    q->layers.back().weight.setZero();
    q->layers.back().bias.setConstant(1.25);
  }
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(p.batch.size(), 1.25);
  auto g1 = nn::MlpGrads::zeros_like(p.critics.q1);
  auto g2 = nn::MlpGrads::zeros_like(p.critics.q2);
  EXPECT_EQ(critic_loss(p.batch, y, p.critics, g1, g2), 0.0);
  for (const auto* g : {&g1, &g2})
    for (auto t : nn::tensors(*g))
      for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(CriticLoss, GradientMatchesFiniteDifference) {
  for (std::uint64_t seed : {11, 12, 13}) EXPECT_LT(scenarios::critic_fd_error(seed), 1e-4);
}

TEST(ActorLoss, SampleValues) {
  EXPECT_DOUBLE_EQ(actor_sample_loss(2.0, 3.0, 0.0, -7.0), -2.0);
  EXPECT_DOUBLE_EQ(actor_sample_loss(2.0, 3.0, 0.5, -1.0), -2.5);
}

TEST(ActorLoss, MinCriticConservatismProperty) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const double q1 = n(rng), q2 = n(rng);
    EXPECT_GE(-std::min(q1, q2), -q1);
    EXPECT_GE(-std::min(q1, q2), -q2);
  }
}

TEST(ActorLoss, GradientMatchesFiniteDifference) {
  for (std::uint64_t seed : {21, 22, 23}) {
    EXPECT_LT(scenarios::actor_fd_error(seed), 1e-4);
    EXPECT_LT(scenarios::actor_fd_error(seed, policy::Family::gaussian), 1e-4);
  }
}

TEST(ActorLoss, LeavesCriticsUntouched) {
  auto p = scenarios::small_problem(5);
  const auto before = p.critics;
  std::mt19937_64 rng(1);
  auto g = nn::MlpGrads::zeros_like(p.policy.params);
  const auto r = actor_loss(p.batch.states, p.critics, p.policy, 0.3, rng, g);
  EXPECT_EQ(flatten(p.critics.q1), flatten(before.q1));
  EXPECT_EQ(flatten(p.critics.q2), flatten(before.q2));
  EXPECT_EQ(r.log_pis.size(), static_cast<std::size_t>(p.batch.size()));
}

TEST(AlphaGradient, Examples) {
  const std::vector<double> eq{1.5, 1.5};
  const std::vector<double> d{0.5, 0.5};
  EXPECT_DOUBLE_EQ(alpha_gradient(eq, -2.0, d), 0.0);
  EXPECT_DOUBLE_EQ(alpha_gradient(std::vector<double>{4.0}, -6.0, std::vector<double>{0.5}), 1.5);
  EXPECT_DOUBLE_EQ(alpha_gradient(std::vector<double>{7.0}, -6.0), -1.0);
  EXPECT_EQ(alpha_gradient({}, -6.0), 0.0);
}

TEST(AlphaGradient, MatchesFiniteDifference) { EXPECT_LT(scenarios::alpha_fd_error(7), 1e-8); }

TEST(AlphaUpdate, Examples) {
  auto s = TemperatureState::from_alpha(1.0, 0.1);
  alpha_update(s, 0.0);
  EXPECT_EQ(s.alpha_tilde, 0.0);
  EXPECT_EQ(s.alpha, 1.0);
  alpha_update(s, 1.5);
  EXPECT_NEAR(s.alpha_tilde, -0.15, 1e-15);
  EXPECT_NEAR(s.alpha, 0.860708, 1e-6);
  EXPECT_THROW(alpha_update(s, std::numeric_limits<double>::quiet_NaN()), NumericError);
}

TEST(AlphaUpdate, PositiveAndExpConsistentProperty) {
  auto s = TemperatureState::from_alpha(1.0, 0.05);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    alpha_update(s, n(rng));
    ASSERT_GT(s.alpha, 0.0);
    ASSERT_EQ(s.alpha, std::exp(s.alpha_tilde));
  }
}

TEST(SoftUpdate, Examples) {
  auto online = nn::MlpParams::init({2, 3, 1}, 1);
  auto target = nn::MlpParams::init({2, 3, 1}, 2);
  auto t1 = target;
  soft_update(t1, online, 1.0);
  EXPECT_EQ(flatten(t1), flatten(online));

  auto zero = online;
  for (auto t : nn::tensors(zero))
    for (double& v : t) v = 0.0;
  auto two = online;
  for (auto t : nn::tensors(two))
    for (double& v : t) v = 2.0;
  soft_update(zero, two, 0.5);
  for (double v : flatten(zero)) EXPECT_DOUBLE_EQ(v, 1.0);

  const double tau = 0.1;
  const auto a = flatten(target), b = flatten(online);
  double d0 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d0 += (a[i] - b[i]) * (a[i] - b[i]);
  for (int k = 1; k <= 30; ++k) {
    soft_update(target, online, tau);
    const auto c = flatten(target);
    double dk = 0;
    for (std::size_t i = 0; i < c.size(); ++i) dk += (c[i] - b[i]) * (c[i] - b[i]);
    EXPECT_NEAR(std::sqrt(dk), std::sqrt(d0) * std::pow(1 - tau, k), 1e-12);
  }
}

TEST(Agent, SubStepsOnlyMoveTheirOwnParameters) {
  for (auto mode : {EntropyMode::conventional, EntropyMode::slack}) {
    Agent agent(small_config(mode));
    const auto buffer = random_buffer(64, 1);
    std::mt19937_64 rng(2);
    const auto slots = buffer.sample_epoch(16, rng).front();
    const auto batch = make_batch(buffer, slots);

    Snapshot s0(agent);
    agent.critic_step(batch);
    Snapshot s1(agent);
    auto c = diff(s0, s1);
    EXPECT_TRUE(c.q1 && c.q2);
    EXPECT_FALSE(c.policy || c.q1t || c.q2t || c.slack || c.alpha);

    const auto actor = agent.actor_step(batch);
    Snapshot s2(agent);
    c = diff(s1, s2);
    EXPECT_TRUE(c.policy);
    EXPECT_FALSE(c.q1 || c.q2 || c.q1t || c.q2t || c.slack || c.alpha);

    agent.alpha_step(batch, actor.log_pis);
    Snapshot s3(agent);
    c = diff(s2, s3);
    EXPECT_TRUE(c.alpha);
    EXPECT_FALSE(c.policy || c.q1 || c.q2 || c.q1t || c.q2t || c.slack);

    agent.slack_step(batch, actor.log_pis);
    Snapshot s4(agent);
    c = diff(s3, s4);
    EXPECT_TRUE(c.slack);
    EXPECT_FALSE(c.policy || c.q1 || c.q2 || c.q1t || c.q2t || c.alpha);

    agent.target_step();
    Snapshot s5(agent);
    c = diff(s4, s5);
    EXPECT_TRUE(c.q1t && c.q2t);
    EXPECT_FALSE(c.policy || c.q1 || c.q2 || c.slack || c.alpha);
  }
}

TEST(Agent, EpisodeEndUsesHalfBuffer) {
  Agent agent(small_config(EntropyMode::slack));
  auto cfg = small_config(EntropyMode::slack);
  cfg.batch_max = 256;
  Agent big_batch(cfg);
  const auto stats = big_batch.train_on_episode_end(random_buffer(10, 3));
  EXPECT_EQ(stats.batches, 1u);
  const auto many = agent.train_on_episode_end(random_buffer(100, 3));
  EXPECT_EQ(many.batches, 4u);  // 50 samples in batches of 16
}

TEST(Agent, ConventionalModeNeverTouchesSlack) {
  Agent agent(small_config(EntropyMode::conventional));
  const auto before = flatten(agent.slack_net().params);
  const auto buffer = random_buffer(200, 4);
  for (int e = 0; e < 3; ++e) {
    const auto st = agent.train_on_episode_end(buffer);
    EXPECT_EQ(st.delta, 0.0);
    EXPECT_EQ(st.equality_fraction, 0.0);
  }
  EXPECT_EQ(flatten(agent.slack_net().params), before);
}

TEST(Agent, EmptyBufferIsCountedNoOp) {
  Agent agent(small_config(EntropyMode::slack));
  const Snapshot before(agent);
  const auto st = agent.train_on_episode_end(ReplayBuffer(10));
  EXPECT_EQ(st.batches, 0u);
  EXPECT_EQ(agent.empty_buffer_skips(), 1u);
  const auto c = diff(before, Snapshot(agent));
  EXPECT_FALSE(c.policy || c.q1 || c.q2 || c.slack || c.alpha);
}

TEST(Agent, AlphaStaysPositiveAndConsistentDuringTraining) {
  Agent agent(small_config(EntropyMode::slack));
  auto buffer = random_buffer(64, 5);
  for (int e = 0; e < 20; ++e) {
    const auto st = agent.train_on_episode_end(buffer);
    EXPECT_GT(agent.temperature().alpha, 0.0);
    EXPECT_EQ(agent.temperature().alpha, std::exp(agent.temperature().alpha_tilde));
    EXPECT_GE(st.delta, 0.0);
    EXPECT_LE(st.delta, agent.slack_config().delta_bar);
  }
}

TEST(Agent, SlackConfigFollowsEntropySettings) {
  const Agent agent(small_config(EntropyMode::slack));
  EXPECT_NEAR(agent.slack_config().delta_bar, 2 * std::log(2.0) + 2.0, 1e-12);
  EXPECT_NEAR(agent.slack_config().epsilon, 0.2, 1e-15);
}

TEST(Agent, InvalidConfigIsRejected) {
  auto c = small_config(EntropyMode::slack);
  c.gamma = 1.0;
  EXPECT_THROW(Agent{c}, ConfigError);
  c = small_config(EntropyMode::slack);
  c.tau = 0.0;
  EXPECT_THROW(Agent{c}, ConfigError);
  c = small_config(EntropyMode::slack);
  c.h_star = 5.0;  // above 2 ln 2
  EXPECT_THROW(Agent{c}, ConfigError);
}

TEST(Agent, CheckpointRoundTripAndResumeDeterminism) {
  Agent a(small_config(EntropyMode::slack, 9));
  const auto buffer = random_buffer(120, 6);
  a.train_on_episode_end(buffer);
  io::Checkpoint ck;
  a.save(ck);
  const auto bytes = ck.to_bytes();
  Agent b = Agent::load(io::Checkpoint::from_bytes(bytes));
  io::Checkpoint ck2;
  b.save(ck2);
  EXPECT_EQ(ck2.to_bytes(), bytes);

  a.train_on_episode_end(buffer);
  b.train_on_episode_end(buffer);
  io::Checkpoint x, y;
  a.save(x);
  b.save(y);
  EXPECT_EQ(x.to_bytes(), y.to_bytes());
}
