#pragma once

// State-dependent slack variable for the policy-entropy lower bound.
//
// The inequality H(pi) >= H* is handled as the equality
// H(pi) = H* + Delta(s), Delta in [0, Delta_bar]. Delta comes from a network
// output d via Delta = Delta_bar * squareplus_sigmoid(d), and d is trained with
// the switching loss
//
//   |e| >  eps : sign(e) * d      (satisfy the equality)
//   |e| <= eps : alpha   * d      (shrink Delta toward the lower bound)
//
// where e = ln pi + H* + Delta. The gradient w.r.t. Delta is applied to d
// directly (mirror descent), which avoids vanishing sigmoid gradients.

#include <cmath>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "slacksac/error.hpp"
#include "slacksac/nn/activations.hpp"
#include "slacksac/nn/adam.hpp"
#include "slacksac/nn/mlp.hpp"

namespace slacksac::slack {

enum class ActionSpaceKind { continuous, discrete };

/// Largest admissible slack: maximal entropy of the action space minus H*.
/// Continuous boxes [-1, 1]^n peak at n ln 2, discrete sets of n actions at ln n.
inline double delta_upper_bound(ActionSpaceKind kind, std::size_t size, double h_star) {
  if (size < 1) throw ConfigError("action space size must be at least 1");
  const double n = static_cast<double>(size);
  const double max_entropy = kind == ActionSpaceKind::continuous ? n * std::log(2.0) : std::log(n);
  const double bound = max_entropy - h_star;
  if (bound < 0.0)
    throw ConfigError("lower bound H* exceeds the maximal entropy of the action space");
  return bound;
}

struct SlackConfig {
  ActionSpaceKind action_space_kind = ActionSpaceKind::continuous;
  std::size_t action_size = 1;
  double h_star = -1.0;
  double epsilon = 0.1;
  double delta_bar = 0.0;

  /// Builds a config with delta_bar from delta_upper_bound and, when
  /// `epsilon` is negative, the default 0.1 |A|.
  static SlackConfig make(ActionSpaceKind kind, std::size_t size, double h_star, double epsilon = -1.0) {
    SlackConfig c;
    c.action_space_kind = kind;
    c.action_size = size;
    c.h_star = h_star;
    c.epsilon = epsilon < 0.0 ? 0.1 * static_cast<double>(size) : epsilon;
    c.delta_bar = delta_upper_bound(kind, size, h_star);
    return c;
  }
};

inline double map_to_delta(double d, double delta_bar) {
  return delta_bar * nn::squareplus_sigmoid(d);
}

inline double constraint_residual(double log_pi, double h_star, double delta) {
  return log_pi + h_star + delta;
}

/// Reference form of the switching loss, as a function of Delta.
inline double slack_loss_direct(double log_pi, double h_star, double delta, double alpha,
                                double epsilon) {
  const double e = constraint_residual(log_pi, h_star, delta);
  return std::abs(e) > epsilon ? std::abs(e) : alpha * delta;
}

struct MirrorLoss {
  double value;
  double d_grad;  // d(loss)/d(d)
  bool equality_branch;
};

inline MirrorLoss slack_loss_mirror(double log_pi, double h_star, double delta, double alpha,
                                    double epsilon, double d) {
  const double e = constraint_residual(log_pi, h_star, delta);
  if (std::abs(e) > epsilon) {
    const double s = e > 0.0 ? 1.0 : -1.0;
    return {s * d, s, true};
  }
  return {alpha * d, alpha, false};
}

/// Network producing the raw slack output d from the state.
struct SlackNet {
  nn::MlpParams params;

  static SlackNet init(std::size_t state_dim, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    std::vector<std::size_t> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    // Near-zero output layer: training starts from Delta ~ Delta_bar / 2.
    return SlackNet{nn::MlpParams::init(std::move(sizes), seed, 1e-3)};
  }

  Eigen::RowVectorXd raw(const Eigen::MatrixXd& states) const { return nn::forward(params, states).row(0); }

  Eigen::RowVectorXd delta(const Eigen::MatrixXd& states, double delta_bar) const {
    return raw(states).unaryExpr([delta_bar](double d) { return map_to_delta(d, delta_bar); });
  }
};

struct SlackStats {
  double mean_delta = 0.0;
  double mean_residual = 0.0;
  double equality_fraction = 0.0;  // share of samples on the |e| > eps branch
  double mean_loss = 0.0;
};

/// Batch-mean mirror-descent gradient of the slack loss w.r.t. the network
/// parameters. `log_pis` are detached samples, one per state column.
inline SlackStats slack_gradient(const SlackNet& net, const Eigen::MatrixXd& states,
                                 std::span<const double> log_pis, double alpha,
                                 const SlackConfig& config, nn::MlpGrads& grads) {
  const Eigen::Index batch = states.cols();
  if (static_cast<std::size_t>(batch) != log_pis.size())
    throw ConfigError("slack_gradient: one log-probability per state is required");
  SlackStats stats;
  if (batch == 0) return stats;
  nn::ForwardCache cache;
  const Eigen::MatrixXd d = nn::forward(net.params, states, &cache);
  Eigen::MatrixXd upstream(1, batch);
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double delta = map_to_delta(d(0, i), config.delta_bar);
    const auto loss = slack_loss_mirror(log_pis[i], config.h_star, delta, alpha, config.epsilon, d(0, i));
    upstream(0, i) = loss.d_grad * inv_b;
    stats.mean_delta += delta * inv_b;
    stats.mean_residual += constraint_residual(log_pis[i], config.h_star, delta) * inv_b;
    stats.equality_fraction += (loss.equality_branch ? 1.0 : 0.0) * inv_b;
    stats.mean_loss += loss.value * inv_b;
  }
  nn::backward(net.params, cache, upstream, grads);
  return stats;
}

/// One optimizer step of the slack network on a batch. Empty batches are a no-op.
inline SlackStats slack_update(SlackNet& net, nn::OptimizerState& optimizer, const Eigen::MatrixXd& states,
                               std::span<const double> log_pis, double alpha, const SlackConfig& config) {
  if (states.cols() == 0) return {};
  auto grads = nn::MlpGrads::zeros_like(net.params);
  const auto stats = slack_gradient(net, states, log_pis, alpha, config, grads);
  nn::optimizer_step(optimizer, net.params, grads);
  return stats;
}

}  // namespace slacksac::slack
