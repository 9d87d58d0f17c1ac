#pragma once

// Squashed diagonal Student-t policy.
//
// A pre-squash sample u = mu + sigma * g / sqrt(w), with g ~ N(0, 1) and
// w ~ Gamma(nu/2, rate nu/2), is mapped into (-1, 1) by u / sqrt(u^2 + 4).
// log_prob() is the density over the bounded action, i.e. the Student-t
// density minus the log-det-Jacobian of the squash.
//
// dof = +inf selects the Gaussian limit (w = 1).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "slacksac/error.hpp"
#include "slacksac/nn/activations.hpp"

namespace slacksac::policy {

inline constexpr double kMaxPreSquash = 1e8;
// Samples are kept where the squash is still distinguishable from +-1 in double.
inline constexpr double kSampleClamp = 1e6;

enum class Family { student_t, gaussian };

struct PolicyHead {
  Eigen::VectorXd location;
  Eigen::VectorXd scale;
  Eigen::VectorXd dof;

  Eigen::Index dim() const { return location.size(); }
  bool gaussian() const { return dof.size() > 0 && std::isinf(dof(0)); }
};

struct Noise {
  Eigen::VectorXd gauss;
  Eigen::VectorXd gamma_draw;
};

struct SampledAction {
  Eigen::VectorXd pre_squash;
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

inline double squash(double u) { return u / std::sqrt(u * u + 4.0); }

inline double squash_grad(double u) {
  const double s = u * u + 4.0;
  return 4.0 / (s * std::sqrt(s));
}

/// ln(d squash / du) = ln 4 - 1.5 ln(u^2 + 4).
inline double squash_log_det(double u) {
  u = std::clamp(u, -kMaxPreSquash, kMaxPreSquash);
  return std::log(4.0) - 1.5 * std::log(u * u + 4.0);
}

inline double squash_log_det_grad(double u) {
  if (std::abs(u) > kMaxPreSquash) return 0.0;
  return -3.0 * u / (u * u + 4.0);
}

inline Eigen::VectorXd squash(const Eigen::VectorXd& u) {
  return u.unaryExpr([](double v) { return squash(v); });
}

/// Raw network output [mu; sigma_raw; nu_raw] (3|A| rows) to a valid head.
inline PolicyHead head_from_raw(const Eigen::VectorXd& raw, Family family) {
  if (raw.size() % 3 != 0) throw ConfigError("policy raw output must have 3|A| entries");
  const Eigen::Index n = raw.size() / 3;
  PolicyHead h;
  h.location = raw.head(n);
  h.scale = raw.segment(n, n).unaryExpr([](double v) { return nn::squareplus(v); });
  if (family == Family::gaussian)
    h.dof = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  else
    h.dof = raw.tail(n).unaryExpr([](double v) { return 2.0 + nn::squareplus(v); });
  return h;
}

/// Chain rule through head_from_raw.
inline Eigen::VectorXd raw_gradient(const Eigen::VectorXd& raw, const Eigen::VectorXd& d_location,
                                    const Eigen::VectorXd& d_scale, const Eigen::VectorXd& d_dof,
                                    Family family) {
  const Eigen::Index n = raw.size() / 3;
  Eigen::VectorXd g(raw.size());
  g.head(n) = d_location;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(n + i) = d_scale(i) * nn::squareplus_sigmoid(raw(n + i));
    g(2 * n + i) = family == Family::gaussian ? 0.0 : d_dof(i) * nn::squareplus_sigmoid(raw(2 * n + i));
  }
  return g;
}

inline double log_prob(const PolicyHead& head, const Eigen::VectorXd& pre_squash) {
  const double log_pi = std::log(std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < head.dim(); ++i) {
    const double nu = head.dof(i);
    const double sigma = head.scale(i);
    const double u = pre_squash(i);
    const double z = (u - head.location(i)) / sigma;
    if (std::isinf(nu)) {
      lp += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) - 0.5 * z * z;
    } else {
      lp += std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * (std::log(nu) + log_pi) -
            std::log(sigma) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    lp -= squash_log_det(u);
  }
  return lp;
}

/// Partial derivatives of log_prob, holding the other arguments fixed.
struct LogProbGrad {
  Eigen::VectorXd d_pre_squash;
  Eigen::VectorXd d_location;
  Eigen::VectorXd d_scale;
  Eigen::VectorXd d_dof;
};

inline LogProbGrad log_prob_grad(const PolicyHead& head, const Eigen::VectorXd& pre_squash) {
  const Eigen::Index n = head.dim();
  LogProbGrad g{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nu = head.dof(i);
    const double sigma = head.scale(i);
    const double u = pre_squash(i);
    const double z = (u - head.location(i)) / sigma;
    double d_z;  // d(base log-density)/dz
    if (std::isinf(nu)) {
      d_z = -z;
    } else {
      d_z = -(nu + 1.0) * z / (nu + z * z);
      const double q = z * z / nu;
      using boost::math::digamma;
      g.d_dof(i) = 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu -
                   0.5 * std::log1p(q) + 0.5 * (nu + 1.0) * (q / nu) / (1.0 + q);
    }
    g.d_pre_squash(i) = d_z / sigma - squash_log_det_grad(u);
    g.d_location(i) = -d_z / sigma;
    g.d_scale(i) = -1.0 / sigma - d_z * z / sigma;
  }
  return g;
}

/// Standard normal and Gamma(dof/2, rate dof/2) draws for one action.
template <class Rng>
Noise draw_noise(const PolicyHead& head, Rng& rng) {
  Noise noise{Eigen::VectorXd(head.dim()), Eigen::VectorXd(head.dim())};
  for (Eigen::Index i = 0; i < head.dim(); ++i) {
    std::normal_distribution<double> normal(0.0, 1.0);
    noise.gauss(i) = normal(rng);
    const double nu = head.dof(i);
    if (std::isinf(nu)) {
      noise.gamma_draw(i) = 1.0;
    } else {
      std::gamma_distribution<double> gamma(0.5 * nu, 2.0 / nu);
      // Gamma draws can underflow to 0 for tiny shapes; dof > 2 keeps shape > 1.
      noise.gamma_draw(i) = std::max(gamma(rng), std::numeric_limits<double>::min());
    }
  }
  return noise;
}

/// The multiplier d(pre_squash)/d(scale) for a given noise draw.
inline Eigen::VectorXd noise_multiplier(const Noise& noise) {
  return noise.gauss.cwiseQuotient(noise.gamma_draw.cwiseSqrt());
}

inline SampledAction sample_reparam(const PolicyHead& head, const Noise& noise) {
  if (noise.gauss.size() != head.dim() || noise.gamma_draw.size() != head.dim())
    throw ConfigError("noise dimension does not match the policy head");
  for (Eigen::Index i = 0; i < head.dim(); ++i)
    if (!(noise.gamma_draw(i) > 0.0)) throw NumericError("gamma draw must be positive");
  SampledAction s;
  s.pre_squash = (head.location + head.scale.cwiseProduct(noise_multiplier(noise)))
                     .cwiseMax(-kSampleClamp)
                     .cwiseMin(kSampleClamp);
  s.action = squash(s.pre_squash);
  s.log_prob = log_prob(head, s.pre_squash);
  return s;
}

inline Eigen::VectorXd mode_action(const PolicyHead& head) { return squash(head.location); }

}  // namespace slacksac::policy
