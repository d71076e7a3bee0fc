#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string_view>

#include "plmc/potential.hpp"
#include "plmc/rng.hpp"

namespace plmc {

// Gaussian smoothing radius mu >= 0; mu = 0 disables smoothing.
class SmoothingRadius {
 public:
  constexpr SmoothingRadius() = default;
  explicit SmoothingRadius(double mu) : mu_(mu) {
    if (!(mu >= 0.0) || !std::isfinite(mu))
      throw ContractViolation("smoothing radius must be finite and >= 0");
  }
  double value() const { return mu_; }

 private:
  double mu_ = 0.0;
};

struct StochasticGradSample {
  Vector grad;
  Vector z;  // the standard-normal perturbation behind `grad`
};

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

enum class GradientEstimator {
  perturbed,  // G(x, z) = grad U_bar(x + mu z)
  shifted,    // G(x, z) = grad U_bar(x + mu z) - (mu / eta) z
};

namespace detail {

inline void perturbed_grad_into(const CompositePotential& pot, std::span<const double> x,
                                double mu, std::span<const double> z, std::span<double> shifted_x,
                                std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) shifted_x[i] = x[i] + mu * z[i];
  pot.subgrad(shifted_x, out);
}

}  // namespace detail

inline StochasticGradSample stochastic_grad(const CompositePotential& pot,
                                            std::span<const double> x, SmoothingRadius mu,
                                            NormalStream& rng) {
  require_dim(pot.dim(), x.size(), "stochastic_grad");
  StochasticGradSample s{Vector(x.size()), Vector(x.size())};
  Vector buf(x.size());
  rng.fill(s.z);
  detail::perturbed_grad_into(pot, x, mu.value(), s.z, buf, s.grad);
  return s;
}

inline StochasticGradSample shifted_stochastic_grad(const CompositePotential& pot,
                                                    std::span<const double> x, SmoothingRadius mu,
                                                    double eta, NormalStream& rng) {
  if (!(eta > 0.0)) throw ContractViolation("shifted gradient needs eta > 0");
  StochasticGradSample s = stochastic_grad(pot, x, mu, rng);
  const double c = mu.value() / eta;
  for (std::size_t i = 0; i < x.size(); ++i) s.grad[i] -= c * s.z[i];
  return s;
}

// Mean of U_bar(x + mu xi_i) over n draws, with its standard error.
inline MonteCarloEstimate smoothed_value_mc(const CompositePotential& pot,
                                            std::span<const double> x, SmoothingRadius mu,
                                            std::size_t n_samples, NormalStream& rng) {
  require_dim(pot.dim(), x.size(), "smoothed_value_mc");
  if (n_samples < 2) throw ContractViolation("smoothed_value_mc needs n_samples >= 2");
  if (mu.value() == 0.0) return {pot.value(x), 0.0};
  const std::size_t d = x.size();
  Vector z(d), q(d);
  // Welford
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    rng.fill(z);
    for (std::size_t j = 0; j < d; ++j) q[j] = x[j] + mu.value() * z[j];
    const double v = pot.value(q);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

enum class ClosedFormKind { quadratic, abs1d };

inline ClosedFormKind closed_form_kind_from_string(std::string_view s) {
  if (s == "quadratic") return ClosedFormKind::quadratic;
  if (s == "abs1d") return ClosedFormKind::abs1d;
  throw ContractViolation("unsupported closed-form smoothing kind: " + std::string(s));
}

struct ClosedFormParams {
  double a = 1.0;  // quadratic curvature
  Vector center;   // quadratic center; empty means origin
};

// Exact Gaussian smoothing for the two reference potentials:
//   quadratic  (a/2)||x - c||^2  ->  (a/2)||x - c||^2 + a mu^2 d / 2
//   abs1d      |x|               ->  x erf(x / (sqrt2 mu)) + mu sqrt(2/pi) exp(-x^2/(2 mu^2))
inline double smoothed_value_closed(ClosedFormKind kind, const ClosedFormParams& params,
                                    std::span<const double> x, double mu) {
  if (!(mu >= 0.0)) throw ContractViolation("smoothing radius must be >= 0");
  switch (kind) {
    case ClosedFormKind::quadratic: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = params.center.empty() ? 0.0 : params.center.at(i);
        s += (x[i] - c) * (x[i] - c);
      }
      return 0.5 * params.a * s + 0.5 * params.a * mu * mu * static_cast<double>(x.size());
    }
    case ClosedFormKind::abs1d: {
      if (x.size() != 1) throw ContractViolation("abs1d closed form is one-dimensional");
      const double t = x[0];
      if (mu == 0.0) return std::abs(t);
      return t * std::erf(t / (std::numbers::sqrt2 * mu)) +
             mu * std::sqrt(2.0 / std::numbers::pi) * std::exp(-t * t / (2.0 * mu * mu));
    }
  }
  throw ContractViolation("unsupported closed-form smoothing kind");
}

struct VarianceEstimate {
  double sigma2 = 0.0;  // (1/d) E||G - E G||^2
  double std_error = 0.0;
};

// Normalized variance of the stochastic gradient at x. `batch` averages that
// many independent draws per sample (diagnostic only; samplers use batch 1).
inline VarianceEstimate variance_estimate(const CompositePotential& pot, std::span<const double> x,
                                          SmoothingRadius mu, std::size_t n_samples,
                                          NormalStream& rng,
                                          GradientEstimator estimator = GradientEstimator::perturbed,
                                          double eta = 1.0, std::size_t batch = 1) {
  require_dim(pot.dim(), x.size(), "variance_estimate");
  if (n_samples < 2) throw ContractViolation("variance_estimate needs n_samples >= 2");
  if (batch < 1) throw ContractViolation("variance_estimate needs batch >= 1");
  if (estimator == GradientEstimator::shifted && !(eta > 0.0))
    throw ContractViolation("shifted gradient needs eta > 0");
  const std::size_t d = x.size();
  std::vector<double> samples(n_samples * d);
  Vector z(d), q(d), g(d);
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::span<double> row(samples.data() + i * d, d);
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      rng.fill(z);
      detail::perturbed_grad_into(pot, x, mu.value(), z, q, g);
      if (estimator == GradientEstimator::shifted) {
        for (std::size_t j = 0; j < d; ++j) g[j] -= mu.value() / eta * z[j];
      }
      for (std::size_t j = 0; j < d; ++j) row[j] += g[j];
    }
    for (auto& v : row) v /= static_cast<double>(batch);
  }
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples[i * d + j];
  for (auto& v : mean) v /= static_cast<double>(n_samples);
  // Per-sample squared deviations; their mean is the variance, their spread the stderr.
  const double n = static_cast<double>(n_samples);
  const double correction = n / (n - 1.0);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double dev = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = samples[i * d + j] - mean[j];
      dev += e * e;
    }
    dev = dev * correction / static_cast<double>(d);
    s += dev;
    s2 += dev * dev;
  }
  const double m = s / n;
  const double var = std::max(0.0, (s2 / n - m * m) * correction);
  return {m, std::sqrt(var / n)};
}

}  // namespace plmc
