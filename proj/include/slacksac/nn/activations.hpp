#pragma once

// Squareplus family: the activation, its derivative used as a heavy-tailed
// sigmoid, and RMS normalization.

#include <cmath>
#include <span>

#include <Eigen/Dense>

namespace slacksac::nn {

inline constexpr double kSquareplusB = 4.0;
inline constexpr double kRmsNormEps = 1e-8;

/// (x + sqrt(x^2 + b)) / 2. Positive, increasing, ~x for large x and ~b/(-4x)
/// for very negative x.
inline double squareplus(double x, double b = kSquareplusB) {
  // Rewritten for x < 0 to avoid cancellation in the left tail.
  const double r = std::sqrt(x * x + b);
  return x >= 0.0 ? 0.5 * (x + r) : 0.5 * b / (r - x);
}

/// d/dx squareplus(x, 4) = (1 + x / sqrt(x^2 + 4)) / 2, in (0, 1).
inline double squareplus_sigmoid(double x) {
  const double r = std::sqrt(x * x + kSquareplusB);
  // Same cancellation trick as above: 1 - |x|/r = 4 / (r (r + |x|)).
  if (x >= 0.0) return 1.0 - 0.5 * kSquareplusB / (r * (r + x));
  return 0.5 * kSquareplusB / (r * (r - x));
}

/// Derivative of squareplus_sigmoid: 2 / (x^2 + 4)^{3/2}.
inline double squareplus_sigmoid_grad(double x) {
  const double s = x * x + kSquareplusB;
  return 2.0 / (s * std::sqrt(s));
}

/// y_i = gain_i * x_i / sqrt(mean(x^2) + eps).
inline Eigen::VectorXd rms_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gain,
                                double eps = kRmsNormEps) {
  const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()) + eps);
  return gain.cwiseProduct(x) / rms;
}

}  // namespace slacksac::nn
