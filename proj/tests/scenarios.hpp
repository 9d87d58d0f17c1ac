#pragma once

// Check routines shared by the unit tests and the acceptance binary. Each
// returns a number the caller compares against its tolerance.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "slacksac/sac/agent.hpp"
#include "slacksac/sac/losses.hpp"
#include "slacksac/slack.hpp"
#include "test_util.hpp"

namespace scenarios {

using namespace slacksac;

/// A small random batch for a state_dim / action_dim problem.
inline sac::Batch random_batch(std::size_t state_dim, std::size_t action_dim, Eigen::Index n, std::uint64_t seed) {
  sac::Batch b;
  b.states = testutil::random_matrix(static_cast<Eigen::Index>(state_dim), n, seed);
  b.next_states = testutil::random_matrix(static_cast<Eigen::Index>(state_dim), n, seed + 1);
  b.actions = testutil::random_matrix(static_cast<Eigen::Index>(action_dim), n, seed + 2)
                  .unaryExpr([](double v) { return policy::squash(v); });
  b.rewards = testutil::random_matrix(n, 1, seed + 3);
  b.done = Eigen::VectorXd::Zero(n);
  if (n > 1) b.done(1) = 1.0;
  return b;
}

struct SmallProblem {
  policy::PolicyNet policy;
  sac::CriticPair critics;
  slack::SlackNet slack_net;
  sac::Batch batch;
};

/// Networks of at most three layers and width 16, with jittered biases/gains.
inline SmallProblem small_problem(std::uint64_t seed, policy::Family family = policy::Family::student_t) {
  const std::size_t ds = 3, da = 2;
  const std::vector<std::size_t> hidden{16, 16};
  SmallProblem p{policy::PolicyNet::init(ds, da, hidden, seed, family),
                 sac::CriticPair::init(ds, da, hidden, seed + 1, seed + 2),
                 slack::SlackNet::init(ds, hidden, seed + 3), random_batch(ds, da, 6, seed + 4)};
  testutil::jitter(p.policy.params, seed + 5);
  testutil::jitter(p.critics.q1, seed + 6);
  testutil::jitter(p.critics.q2, seed + 7);
  testutil::jitter(p.slack_net.params, seed + 8);
  // A non-trivial slack output layer so both switching branches appear.
  p.slack_net.params.layers.back().weight *= 1e3;
  return p;
}

/// Critic loss vs central differences over both online critics.
inline double critic_fd_error(std::uint64_t seed) {
  auto p = small_problem(seed);
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd y = sac::td_target(p.batch, p.critics, p.policy, 0.3, 0.9, rng);
  auto g1 = nn::MlpGrads::zeros_like(p.critics.q1);
  auto g2 = nn::MlpGrads::zeros_like(p.critics.q2);
  sac::critic_loss(p.batch, y, p.critics, g1, g2);
  auto loss = [&] {
    auto s1 = nn::MlpGrads::zeros_like(p.critics.q1);
    auto s2 = nn::MlpGrads::zeros_like(p.critics.q2);
    return sac::critic_loss(p.batch, y, p.critics, s1, s2);
  };
  return std::max(testutil::max_fd_error(p.critics.q1, g1, loss), testutil::max_fd_error(p.critics.q2, g2, loss));
}

/// Actor loss vs central differences over the policy, with the noise held fixed.
inline double actor_fd_error(std::uint64_t seed, policy::Family family = policy::Family::student_t) {
  auto p = small_problem(seed, family);
  std::mt19937_64 rng(seed);
  std::vector<policy::Noise> noise;
  for (const auto& h : p.policy.heads(p.batch.states)) noise.push_back(policy::draw_noise(h, rng));
  const double alpha = 0.7;
  auto g = nn::MlpGrads::zeros_like(p.policy.params);
  sac::actor_loss(p.batch.states, p.critics, p.policy, alpha, noise, g);
  return testutil::max_fd_error(p.policy.params, g, [&] {
    auto scratch = nn::MlpGrads::zeros_like(p.policy.params);
    return sac::actor_loss(p.batch.states, p.critics, p.policy, alpha, noise, scratch).loss;
  });
}

/// Temperature gradient vs the derivative of mean(-alpha (ln pi + H* + Delta)).
inline double alpha_fd_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> lp(17), d(17);
    for (auto& v : lp) v = n(rng);
    for (auto& v : d) v = u(rng);
    const double h_star = n(rng);
    for (bool with_delta : {false, true}) {
      auto objective = [&](double alpha) {
        double acc = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) acc += -alpha * (lp[i] + h_star + (with_delta ? d[i] : 0.0));
        return acc / static_cast<double>(lp.size());
      };
      const double g = with_delta ? sac::alpha_gradient(lp, h_star, d) : sac::alpha_gradient(lp, h_star);
      const double fd = (objective(0.5 + 1e-5) - objective(0.5 - 1e-5)) / 2e-5;
      worst = std::max(worst, testutil::rel_err(fd, g));
    }
  }
  return worst;
}

/// Mirror-descent slack surrogate vs central differences over the slack net.
/// The branch of every sample is locally constant, so the surrogate is smooth
/// around the evaluation point.
inline double slack_fd_error(std::uint64_t seed) {
  auto p = small_problem(seed);
  const auto cfg = slack::SlackConfig::make(slack::ActionSpaceKind::continuous, 2, -2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(-1.0, 1.5);
  std::vector<double> lp(static_cast<std::size_t>(p.batch.size()));
  for (auto& v : lp) v = n(rng);
  const double alpha = 0.4;
  auto g = nn::MlpGrads::zeros_like(p.slack_net.params);
  slack::slack_gradient(p.slack_net, p.batch.states, lp, alpha, cfg, g);
  return testutil::max_fd_error(p.slack_net.params, g, [&] {
    auto scratch = nn::MlpGrads::zeros_like(p.slack_net.params);
    return slack::slack_gradient(p.slack_net, p.batch.states, lp, alpha, cfg, scratch).mean_loss;
  });
}

// One-dimensional policy heads -------------------------------------------------

inline policy::PolicyHead head1(double mu, double sigma, double nu) {
  policy::PolicyHead h;
  h.location = Eigen::VectorXd::Constant(1, mu);
  h.scale = Eigen::VectorXd::Constant(1, sigma);
  h.dof = Eigen::VectorXd::Constant(1, nu);
  return h;
}

inline double inverse_squash(double a) { return 2.0 * a / std::sqrt((1.0 - a) * (1.0 + a)); }

/// Density of the squashed action at a in (-1, 1).
inline double density1(const policy::PolicyHead& h, double a) {
  if (!(std::abs(a) < 1.0)) return 0.0;
  return std::exp(policy::log_prob(h, Eigen::VectorXd::Constant(1, inverse_squash(a))));
}

/// Integrates g over (-1, 1), split at the mode so narrow peaks are resolved.
template <class G>
double integrate1(const policy::PolicyHead& h, G g) {
  boost::math::quadrature::tanh_sinh<double> q;
  const double mode = policy::squash(h.location(0));
  return q.integrate(g, -1.0, mode, 1e-12) + q.integrate(g, mode, 1.0, 1e-12);
}

/// Heads covering heavy tails, near-Gaussian, narrow and off-centre cases.
inline std::vector<std::tuple<double, double, double>> normalization_heads() {
  const double inf = std::numeric_limits<double>::infinity();
  return {{0.0, 1.0, 5.0},    {0.0, 1.0, 2.01}, {1.5, 0.3, 3.0},  {-2.0, 2.5, 30.0},
          {0.7, 0.05, 4.0},   {0.0, 1.0, 1e6},  {-0.4, 0.8, inf}, {4.0, 1.0, 2.5}};
}

/// Largest |1 - integral of the squashed density| over normalization_heads().
inline double worst_mass_error() {
  double worst = 0.0;
  for (const auto& [mu, sigma, nu] : normalization_heads()) {
    const auto h = head1(mu, sigma, nu);
    worst = std::max(worst, std::abs(1.0 - integrate1(h, [&](double a) { return density1(h, a); })));
  }
  return worst;
}

/// |ln pi - squashed Gaussian| at the origin for nu = 1e6.
inline double gaussian_limit_error() {
  const double gaussian = -0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * std::log(4.0);
  return std::abs(policy::log_prob(head1(0.0, 1.0, 1e6), Eigen::VectorXd::Zero(1)) - gaussian);
}

struct ScalarSlackRun {
  std::vector<double> residuals;  // e after every step
  double epsilon;
};

/// Gradient descent on a single free slack parameter d with ln pi held fixed.
/// Delta_bar = 2, H* = -1, eps = 0.1, ln pi = 0.85: the equilibrium e = -eps
/// sits at Delta = 0.05.
inline ScalarSlackRun scalar_slack_run(int steps = 2000, double lr = 0.05, double alpha = 0.2) {
  const double delta_bar = 2.0, h_star = -1.0, eps = 0.1, log_pi = 0.85;
  double d = 0.0;
  ScalarSlackRun run{{}, eps};
  for (int k = 0; k < steps; ++k) {
    const double delta = slack::map_to_delta(d, delta_bar);
    d -= lr * slack::slack_loss_mirror(log_pi, h_star, delta, alpha, eps, d).d_grad;
    run.residuals.push_back(slack::constraint_residual(log_pi, h_star, slack::map_to_delta(d, delta_bar)));
  }
  return run;
}

/// Largest |e + eps| over the last `window` steps.
inline double scalar_slack_gap(const ScalarSlackRun& run, std::size_t window = 100) {
  double worst = 0.0;
  for (std::size_t i = run.residuals.size() - window; i < run.residuals.size(); ++i)
    worst = std::max(worst, std::abs(run.residuals[i] + run.epsilon));
  return worst;
}

}  // namespace scenarios
