#pragma once

// Fully connected networks: linear -> RMSNorm -> squareplus on each hidden
// layer, linear output. Samples are stored column-wise, so a batch of B
// inputs of width n is an n x B matrix.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slacksac/error.hpp"
#include "slacksac/nn/activations.hpp"

namespace slacksac::nn {

struct Layer {
  Eigen::MatrixXd weight;     // out x in
  Eigen::VectorXd bias;       // out
  Eigen::VectorXd norm_gain;  // out for hidden layers, empty for the output layer

  bool has_norm() const { return norm_gain.size() > 0; }
};

struct MlpParams {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  /// Uniform weights in +-sqrt(1/fan_in), zero biases, unit gains. The output
  /// layer weights are additionally multiplied by `output_scale`.
  static MlpParams init(std::vector<std::size_t> sizes, std::uint64_t seed,
                        double output_scale = 1.0) {
    if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
    for (auto s : sizes)
      if (s == 0) throw ConfigError("mlp layer sizes must be positive");
    MlpParams p;
    p.layer_sizes = std::move(sizes);
    p.seed = seed;
    std::mt19937_64 rng(seed);
    const std::size_t n_layers = p.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto fan_in = static_cast<Eigen::Index>(p.layer_sizes[l]);
      const auto fan_out = static_cast<Eigen::Index>(p.layer_sizes[l + 1]);
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Layer layer;
      layer.weight.resize(fan_out, fan_in);
      for (Eigen::Index c = 0; c < fan_in; ++c)
        for (Eigen::Index r = 0; r < fan_out; ++r) layer.weight(r, c) = dist(rng);
      layer.bias = Eigen::VectorXd::Zero(fan_out);
      if (l + 1 < n_layers) {
        layer.norm_gain = Eigen::VectorXd::Ones(fan_out);
      } else {
        layer.weight *= output_scale;
      }
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size() + l.norm_gain.size();
    return n;
  }
};

/// Same layout as the parameters it belongs to; used for gradients and
/// optimizer moments.
struct MlpGrads {
  std::vector<Layer> layers;

  static MlpGrads zeros_like(const MlpParams& p) {
    MlpGrads g;
    for (const auto& l : p.layers) {
      Layer z;
      z.weight = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
      z.bias = Eigen::VectorXd::Zero(l.bias.size());
      z.norm_gain = Eigen::VectorXd::Zero(l.norm_gain.size());
      g.layers.push_back(std::move(z));
    }
    return g;
  }

  void zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
      l.norm_gain.setZero();
    }
  }
};

/// Every parameter tensor as a flat span, in a fixed order (per layer:
/// weight, bias, norm_gain when present).
inline std::vector<std::span<double>> tensors(std::vector<Layer>& layers) {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.norm_gain.size() > 0)
      out.emplace_back(l.norm_gain.data(), static_cast<std::size_t>(l.norm_gain.size()));
  }
  return out;
}

inline std::vector<std::span<const double>> tensors(const std::vector<Layer>& layers) {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.norm_gain.size() > 0)
      out.emplace_back(l.norm_gain.data(), static_cast<std::size_t>(l.norm_gain.size()));
  }
  return out;
}

inline std::vector<std::span<double>> tensors(MlpParams& p) { return tensors(p.layers); }
inline std::vector<std::span<const double>> tensors(const MlpParams& p) { return tensors(p.layers); }
inline std::vector<std::span<double>> tensors(MlpGrads& g) { return tensors(g.layers); }
inline std::vector<std::span<const double>> tensors(const MlpGrads& g) { return tensors(g.layers); }

/// Intermediates recorded by a forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // input of every layer
  std::vector<Eigen::MatrixXd> linear;        // W x + b, hidden layers only
  std::vector<Eigen::RowVectorXd> inv_rms;    // per column, hidden layers only
  std::vector<Eigen::MatrixXd> normed;        // RMSNorm output, hidden layers only

  bool empty() const { return layer_inputs.empty(); }
  Eigen::Index batch_size() const { return empty() ? 0 : layer_inputs.front().cols(); }
};

inline Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input,
                               ForwardCache* cache = nullptr) {
  if (static_cast<std::size_t>(input.rows()) != params.input_dim())
    throw ConfigError("mlp input has " + std::to_string(input.rows()) + " rows, expected " +
                      std::to_string(params.input_dim()));
  if (cache) *cache = ForwardCache{};
  Eigen::MatrixXd x = input;
  const Eigen::Index batch = input.cols();
  for (const auto& layer : params.layers) {
    if (cache) cache->layer_inputs.push_back(x);
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    if (!layer.has_norm()) {
      x = std::move(z);
      continue;
    }
    const double n = static_cast<double>(z.rows());
    Eigen::RowVectorXd inv_rms(batch);
    for (Eigen::Index c = 0; c < batch; ++c)
      inv_rms(c) = 1.0 / std::sqrt(z.col(c).squaredNorm() / n + kRmsNormEps);
    Eigen::MatrixXd h = (z.array().rowwise() * inv_rms.array()).colwise() * layer.norm_gain.array();
    Eigen::MatrixXd a = h.unaryExpr([](double v) { return squareplus(v); });
    if (cache) {
      cache->linear.push_back(std::move(z));
      cache->inv_rms.push_back(std::move(inv_rms));
      cache->normed.push_back(std::move(h));
    }
    x = std::move(a);
  }
  return x;
}

inline Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return forward(params, Eigen::MatrixXd(input)).col(0);
}

/// Reverse-mode pass. Adds d(loss)/d(param) into `grads` and returns the
/// cotangent of the input. `upstream` is d(loss)/d(output), same shape as the
/// forward output.
inline Eigen::MatrixXd backward(const MlpParams& params, const ForwardCache& cache,
                                const Eigen::MatrixXd& upstream, MlpGrads& grads) {
  if (cache.empty()) throw StateError("backward called without a recorded forward pass");
  if (upstream.rows() != static_cast<Eigen::Index>(params.output_dim()) ||
      upstream.cols() != cache.batch_size())
    throw ConfigError("backward upstream shape does not match the forward output");
  if (grads.layers.size() != params.layers.size())
    throw ConfigError("gradient buffer does not match the network");

  Eigen::MatrixXd dx = upstream;
  std::size_t hidden = cache.linear.size();
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Layer& layer = params.layers[li];
    Layer& g = grads.layers[li];
    Eigen::MatrixXd dz;
    if (layer.has_norm()) {
      --hidden;
      const auto& h = cache.normed[hidden];
      const auto& z = cache.linear[hidden];
      const auto& inv_rms = cache.inv_rms[hidden];
      // squareplus'(h) = squareplus_sigmoid(h)
      Eigen::MatrixXd dh = dx.cwiseProduct(h.unaryExpr([](double v) { return squareplus_sigmoid(v); }));
      // h = gain * zhat, zhat = z * inv_rms
      Eigen::MatrixXd zhat = z.array().rowwise() * inv_rms.array();
      g.norm_gain += dh.cwiseProduct(zhat).rowwise().sum();
      Eigen::MatrixXd dzhat = dh.array().colwise() * layer.norm_gain.array();
      const double n = static_cast<double>(z.rows());
      Eigen::RowVectorXd proj = dzhat.cwiseProduct(zhat).colwise().sum() / n;
      dz = ((dzhat - (zhat.array().rowwise() * proj.array()).matrix()).array().rowwise() *
            inv_rms.array())
               .matrix();
    } else {
      dz = dx;
    }
    const auto& x = cache.layer_inputs[li];
    g.weight.noalias() += dz * x.transpose();
    g.bias += dz.rowwise().sum();
    dx = layer.weight.transpose() * dz;
  }
  return dx;
}

}  // namespace slacksac::nn
