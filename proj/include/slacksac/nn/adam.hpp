#pragma once

#include <cmath>
#include <cstdint>

#include "slacksac/nn/mlp.hpp"

namespace slacksac::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double decay_1 = 0.9;
  double decay_2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::uint64_t skipped_tensors = 0;  // tensors left untouched because of non-finite grads

  static OptimizerState for_params(const MlpParams& params, AdamConfig config = {}) {
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.decay_1 > 0.0 && config.decay_1 < 1.0) ||
        !(config.decay_2 > 0.0 && config.decay_2 < 1.0))
      throw ConfigError("adam decay rates must lie in (0, 1)");
    OptimizerState s;
    s.config = config;
    s.first_moment = MlpGrads::zeros_like(params);
    s.second_moment = MlpGrads::zeros_like(params);
    return s;
  }
};

/// One bias-corrected Adam update.
inline void optimizer_step(OptimizerState& state, MlpParams& params, const MlpGrads& grads) {
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size())
    throw ConfigError("optimizer_step: tensor layouts differ");

  ++state.step_count;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction_1 = 1.0 - std::pow(c.decay_1, t);
  const double correction_2 = 1.0 - std::pow(c.decay_2, t);

  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size() != g[k].size()) throw ConfigError("optimizer_step: tensor sizes differ");
    bool finite = true;
    for (double gi : g[k]) finite = finite && std::isfinite(gi);
    if (!finite) {
      ++state.skipped_tensors;
      continue;
    }
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      m[k][i] = c.decay_1 * m[k][i] + (1.0 - c.decay_1) * g[k][i];
      v[k][i] = c.decay_2 * v[k][i] + (1.0 - c.decay_2) * g[k][i] * g[k][i];
      const double m_hat = m[k][i] / correction_1;
      const double v_hat = v[k][i] / correction_2;
      p[k][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace slacksac::nn
