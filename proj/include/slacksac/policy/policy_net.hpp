#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "slacksac/nn/mlp.hpp"
#include "slacksac/policy/student_t.hpp"

namespace slacksac::policy {

/// State -> [location; raw scale; raw dof]. The trunk is shared and only the
/// output layer separates the three parameter groups.
struct PolicyNet {
  nn::MlpParams params;
  Family family = Family::student_t;

  static PolicyNet init(std::size_t state_dim, std::size_t action_dim,
                        const std::vector<std::size_t>& hidden, std::uint64_t seed,
                        Family family = Family::student_t) {
    std::vector<std::size_t> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(3 * action_dim);
    return PolicyNet{nn::MlpParams::init(std::move(sizes), seed), family};
  }

  std::size_t action_dim() const { return params.output_dim() / 3; }

  PolicyHead head(const Eigen::VectorXd& state) const {
    return head_from_raw(nn::forward(params, state), family);
  }

  std::vector<PolicyHead> heads(const Eigen::MatrixXd& states, nn::ForwardCache* cache = nullptr,
                                Eigen::MatrixXd* raw_out = nullptr) const {
    Eigen::MatrixXd raw = nn::forward(params, states, cache);
    std::vector<PolicyHead> out;
    out.reserve(static_cast<std::size_t>(raw.cols()));
    for (Eigen::Index c = 0; c < raw.cols(); ++c) out.push_back(head_from_raw(raw.col(c), family));
    if (raw_out) *raw_out = std::move(raw);
    return out;
  }

  template <class Rng>
  SampledAction sample(const Eigen::VectorXd& state, Rng& rng) const {
    const auto h = head(state);
    return sample_reparam(h, draw_noise(h, rng));
  }
};

}  // namespace slacksac::policy
