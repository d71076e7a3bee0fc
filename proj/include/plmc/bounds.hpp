#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "plmc/potential.hpp"

namespace plmc {

struct ProblemConstants {
  std::size_t d = 1;
  double L = 0.0;
  double alpha = 1.0;
  double m = 1.0;       // regularizer smoothness
  double lambda = 1.0;  // strong convexity
  double x_star_norm = 0.0;
  double w2_init = 1.0;  // upper estimate of W2(p0, p*_mu)
  std::optional<double> m4;
};

struct PlanIntermediates {
  double M = 0.0;  // M_mu for stochastic plans, M(delta) for deterministic ones
  std::optional<double> M_mu;
  std::optional<double> sigma2;
  std::optional<double> beta;
  std::optional<double> bias;
  std::optional<double> C;
  std::optional<double> A;  // (24/(lambda eps))^((1-alpha)/alpha) L^(1/alpha), det-w2 only
  double eta_formula = 0.0;  // eta before halving into the strict step-size condition
  int halvings = 0;
  double eta_limit = 0.0;  // the strict upper limit eta was checked against
};

enum class PlanMode { w2, tv, regularized, det_w2, det_tv };

inline std::string to_string(PlanMode m) {
  switch (m) {
    case PlanMode::w2: return "w2";
    case PlanMode::tv: return "tv";
    case PlanMode::regularized: return "regularized";
    case PlanMode::det_w2: return "det-w2";
    case PlanMode::det_tv: return "det-tv";
  }
  return "?";
}

inline PlanMode plan_mode_from_string(const std::string& s) {
  if (s == "w2") return PlanMode::w2;
  if (s == "tv") return PlanMode::tv;
  if (s == "regularized") return PlanMode::regularized;
  if (s == "det-w2" || s == "det_w2") return PlanMode::det_w2;
  if (s == "det-tv" || s == "det_tv") return PlanMode::det_tv;
  throw ContractViolation("unknown plan mode: " + s);
}

inline bool is_deterministic(PlanMode m) { return m == PlanMode::det_w2 || m == PlanMode::det_tv; }

struct PlanReport {
  PlanMode mode = PlanMode::w2;
  double eps = 0.0;
  double eta = 0.0;
  double mu = 0.0;
  std::uint64_t K = 1;
  std::optional<double> eps_bar;
  std::optional<double> delta;
  std::optional<double> lambda_reg;
  PlanIntermediates intermediates;
};

namespace detail {

inline double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw std::range_error(std::string(what) + " is not finite in binary64");
  return v;
}

inline double checked_pow(double base, double exponent, const char* what) {
  return finite_or_throw(std::pow(base, exponent), what);
}

// Halve eta until eta < limit.
inline double shrink_below(double eta, double limit, int& halvings) {
  halvings = 0;
  while (!(eta < limit)) {
    eta *= 0.5;
    ++halvings;
  }
  return eta;
}

inline std::uint64_t ceil_count(double v) {
  finite_or_throw(v, "iteration count");
  if (v <= 1.0) return 1;
  if (v >= 1.8e19) throw std::range_error("iteration count overflows 64 bits");
  return static_cast<std::uint64_t>(std::ceil(v));
}

inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in [0, 1]");
}

inline void require_constants(const ProblemConstants& c) {
  if (c.d < 1) throw ContractViolation("dimension must be >= 1");
  if (!(c.L >= 0.0)) throw ContractViolation("L must be >= 0");
  require_alpha(c.alpha);
  if (!(c.lambda > 0.0)) throw ContractViolation("lambda must be > 0");
  if (!(c.m >= c.lambda)) throw ContractViolation("strong convexity exceeds smoothness");
  if (!(c.x_star_norm >= 0.0)) throw ContractViolation("x_star_norm must be >= 0");
}

}  // namespace detail

// Smoothness of the deterministic delta-approximation of an (L, alpha) function.
inline double smooth_approx_M(double L, double alpha, double delta) {
  if (!(delta > 0.0)) throw ContractViolation("smooth_approx_M needs delta > 0");
  if (!(L >= 0.0)) throw ContractViolation("smooth_approx_M needs L >= 0");
  detail::require_alpha(alpha);
  return detail::checked_pow(1.0 / delta, (1.0 - alpha) / (1.0 + alpha), "M(delta)") *
         std::pow(L, 2.0 / (1.0 + alpha));
}

// Gradient Lipschitz constant of the Gaussian smoothing U_mu.
inline double smoothing_smoothness_Mmu(double L, double alpha, double mu, std::size_t d) {
  detail::require_alpha(alpha);
  if (!(mu >= 0.0)) throw ContractViolation("smoothing radius must be >= 0");
  if (alpha == 1.0) return L;
  if (mu == 0.0) throw ContractViolation("M_mu is unbounded at mu = 0 for alpha < 1");
  const double dd = static_cast<double>(d);
  return L * std::pow(dd, (1.0 - alpha) / 2.0) /
         (std::pow(mu, 1.0 - alpha) * std::pow(1.0 + alpha, 1.0 - alpha));
}

// Upper bound on U_mu - U.
inline double smoothing_gap(double L, double alpha, double mu, std::size_t d) {
  detail::require_alpha(alpha);
  if (!(mu >= 0.0)) throw ContractViolation("smoothing radius must be >= 0");
  const double dd = static_cast<double>(d);
  return L * std::pow(mu, 1.0 + alpha) * std::pow(dd, (1.0 + alpha) / 2.0) / (1.0 + alpha);
}

// Normalized variance bound of the perturbed gradient. At mu = 0 and alpha = 0
// this is 4 L^2 / d, not 0: the formula is returned as is.
inline double variance_bound(double L, double alpha, double m, double mu, std::size_t d) {
  detail::require_alpha(alpha);
  if (!(mu >= 0.0)) throw ContractViolation("smoothing radius must be >= 0");
  const double dd = static_cast<double>(d);
  return 4.0 * std::pow(dd, alpha - 1.0) * std::pow(mu, 2.0 * alpha) * L * L + 4.0 * mu * mu * m * m;
}

inline double shifted_variance_bound(double L, double alpha, double m, double mu, double eta,
                                     std::size_t d) {
  if (!(eta > 0.0)) throw ContractViolation("shifted variance bound needs eta > 0");
  detail::require_alpha(alpha);
  if (mu == 0.0) return 0.0;
  const double dd = static_cast<double>(d);
  return 8.0 * std::pow(dd, alpha - 1.0) * std::pow(mu, 2.0 * alpha) * L * L +
         8.0 * mu * mu * m * m + 2.0 * mu * mu / (eta * eta);
}

inline double beta_mu(double L, double alpha, double m, double mu, std::size_t d) {
  detail::require_alpha(alpha);
  if (!(mu >= 0.0)) throw ContractViolation("smoothing radius must be >= 0");
  const double dd = static_cast<double>(d);
  return L * std::pow(mu, 1.0 + alpha) * std::pow(dd, (1.0 + alpha) / 2.0) /
             (std::numbers::sqrt2 * (1.0 + alpha)) +
         m * mu * mu * dd / 2.0;
}

// Bolley-Villani constant (8/lambda) (3/2 + (d/2) log(2 M_total / lambda))^(1/2).
inline double bolley_villani_constant(double lambda, double M_total, std::size_t d) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be > 0");
  const double arg = 2.0 * M_total / lambda;
  if (!(arg > 1.0)) throw ContractViolation("nonpositive log argument: need M + m > lambda / 2");
  return 8.0 / lambda * std::sqrt(1.5 + static_cast<double>(d) / 2.0 * std::log(arg));
}

inline double w2_smoothing_bias(const ProblemConstants& c, double M_mu, double beta) {
  if (!(beta >= 0.0)) throw ContractViolation("beta must be >= 0");
  return bolley_villani_constant(c.lambda, M_mu + c.m, c.d) * (beta + std::sqrt(beta / 2.0));
}

inline double w2_recursion_bound(double M_total, double lambda, double eta, std::size_t d,
                                 double sigma2, std::uint64_t K, double w2_init) {
  if (!(lambda > 0.0) || !(eta >= 0.0)) throw ContractViolation("need lambda > 0 and eta >= 0");
  if (!(eta <= 2.0 / (M_total + lambda))) throw ContractViolation("need eta <= 2/(M + lambda)");
  if (!(lambda * eta <= 1.0)) throw ContractViolation("need lambda * eta <= 1");
  if (!(sigma2 >= 0.0) || !(w2_init >= 0.0)) throw ContractViolation("negative sigma2 or w2_init");
  const double dd = static_cast<double>(d);
  const double contraction = std::pow(1.0 - lambda * eta, static_cast<double>(K) / 2.0);
  return contraction * w2_init + std::sqrt(2.0 * M_total * eta * dd / lambda) +
         std::sqrt(sigma2) * std::sqrt((1.0 + eta) * eta * dd / lambda);
}

inline double kl_from_w2(double M_total, double lambda, std::size_t d, double x_star_norm,
                         double w2) {
  if (!(M_total >= 0.0) || !(lambda > 0.0) || !(x_star_norm >= 0.0) || !(w2 >= 0.0))
    throw ContractViolation("kl_from_w2 inputs must be nonnegative (lambda > 0)");
  const double dd = static_cast<double>(d);
  const double xs2 = x_star_norm * x_star_norm;
  return (M_total * std::sqrt(2.0 * dd / lambda + 2.0 * xs2) / 2.0 +
          M_total * std::sqrt(4.0 * dd / lambda + 4.0 * xs2 + 2.0 * w2 * w2) / 2.0 +
          M_total * x_star_norm) *
         w2;
}

inline double pinsker_tv(double kl) {
  if (!(kl >= 0.0)) throw ContractViolation("KL must be >= 0");
  return std::sqrt(kl / 2.0);
}

// One-pass TV bound: W2 from the recursion, then KL, then Pinsker.
inline double tv_bound_from_recursion(const ProblemConstants& c, double M_total, double eta,
                                      double sigma2, std::uint64_t K) {
  const double w2 = w2_recursion_bound(M_total, c.lambda, eta, c.d, sigma2, K, c.w2_init);
  return pinsker_tv(kl_from_w2(M_total, c.lambda, c.d, c.x_star_norm, w2));
}

// Square root of the one-step squared-W2 discretization bound.
inline double discretization_w2_bound(double M, double m, double lambda, double delta, double eta,
                                      std::size_t d, double w2_init) {
  if (!(eta >= 0.0) || !(eta < 1.0 / (2.0 * lambda)))
    throw ContractViolation("discretization bound needs 0 <= eta < 1/(2 lambda)");
  if (!(delta >= 0.0)) throw ContractViolation("delta must be >= 0");
  const double dd = static_cast<double>(d);
  const double Mm = M + m;
  const double Mm2 = Mm * Mm, Mm4 = Mm2 * Mm2;
  const double e2 = eta * eta, e3 = e2 * eta, e4 = e2 * e2;
  return std::sqrt(8.0 * dd * Mm4 * e4 / lambda + 8.0 * Mm4 * e4 * w2_init * w2_init +
                   32.0 * delta * Mm2 * M * e4 + 4.0 * dd * Mm2 * e3 + 8.0 * delta * M * e2);
}

namespace detail {

inline void fill_stochastic_intermediates(PlanReport& r, const ProblemConstants& c) {
  auto& in = r.intermediates;
  in.M_mu = in.M;
  in.sigma2 = variance_bound(c.L, c.alpha, c.m, r.mu, c.d);
  in.beta = beta_mu(c.L, c.alpha, c.m, r.mu, c.d);
  in.C = bolley_villani_constant(c.lambda, in.M + c.m, c.d);
  in.bias = *in.C * (*in.beta + std::sqrt(*in.beta / 2.0));
}

inline void finish_stochastic_eta(PlanReport& r, const ProblemConstants& c, double eta) {
  auto& in = r.intermediates;
  in.eta_formula = eta;
  in.eta_limit = 2.0 / (in.M + c.m + c.lambda);
  r.eta = shrink_below(eta, in.eta_limit, in.halvings);
}

}  // namespace detail

// W2 recipe for P-LMC: boundary mu and eta, smallest admissible K.
inline PlanReport plan_w2(double eps, const ProblemConstants& c) {
  detail::require_constants(c);
  const double dd = static_cast<double>(c.d);
  if (!(eps > 0.0 && eps < std::pow(dd, 0.25)))
    throw ContractViolation("plan_w2 needs 0 < eps < d^(1/4)");
  if (!(c.w2_init > 0.0)) throw ContractViolation("plan_w2 needs w2_init > 0");
  const double a = c.alpha;
  const double log_arg = 10.0 + dd * std::log((c.m + c.L) * dd / (c.lambda * eps * eps));
  if (!(log_arg > 0.0)) throw std::range_error("plan_w2: negative square-root argument in mu");
  PlanReport r;
  r.mode = PlanMode::w2;
  r.eps = eps;
  r.mu = std::pow(eps, 2.0 / (1.0 + a)) * std::min(std::pow(c.lambda, 2.0 / (1.0 + a)), 1.0) /
         (300.0 * std::sqrt(dd) * (std::sqrt(c.m) + std::pow(c.L, 1.0 / (1.0 + a))) *
          std::sqrt(log_arg));
  detail::finite_or_throw(r.mu, "mu");
  if (!(r.mu > 0.0)) throw std::range_error("plan_w2: mu underflows to zero");
  const double eta = eps * eps * std::pow(r.mu, 1.0 - a) * c.lambda /
                     (1000.0 * (c.L + c.m) * std::pow(dd, (3.0 - a) / 2.0));
  r.intermediates.M = smoothing_smoothness_Mmu(c.L, a, r.mu, c.d);
  detail::finish_stochastic_eta(r, c, eta);
  r.K = detail::ceil_count(std::log(3.0 * c.w2_init / eps) / (c.lambda * r.eta));
  detail::fill_stochastic_intermediates(r, c);
  return r;
}

// TV recipe for P-LMC.
inline PlanReport plan_tv(double eps, const ProblemConstants& c) {
  detail::require_constants(c);
  if (!(eps > 0.0 && eps <= 1.0)) throw ContractViolation("plan_tv needs eps in (0, 1]");
  if (!(c.w2_init > 0.0)) throw ContractViolation("plan_tv needs w2_init > 0");
  const double dd = static_cast<double>(c.d);
  const double a = c.alpha;
  PlanReport r;
  r.mode = PlanMode::tv;
  r.eps = eps;
  r.mu = std::min(std::pow(eps, 1.0 / (1.0 + a)) /
                      (4.0 * std::max(1.0, std::pow(c.L, 1.0 / (1.0 + a))) * std::sqrt(dd)),
                  std::sqrt(eps * c.lambda / (2.0 * c.m * c.m * dd)));
  auto& in = r.intermediates;
  in.M = smoothing_smoothness_Mmu(c.L, a, r.mu, c.d);
  const double Mm = in.M + c.m;
  const double xs2 = c.x_star_norm * c.x_star_norm;
  const double eb =
      eps * eps /
      (4.0 * std::max(Mm * (std::sqrt(2.0 * dd / c.lambda + 2.0 * xs2) + 2.0 * xs2), 1.0));
  r.eps_bar = eb;
  detail::finish_stochastic_eta(r, c, eb * eb * c.lambda / (64.0 * dd * Mm));
  r.K = detail::ceil_count(std::log(2.0 * c.w2_init / eb) / (c.lambda * r.eta));
  detail::fill_stochastic_intermediates(r, c);
  return r;
}

// Regularization strength lambda = 4 eps' / (sqrt(M4) + ||x' - x*||^2).
inline double plan_regularized(double eps_prime, double m4, double dist_xprime_xstar) {
  if (!(eps_prime > 0.0 && eps_prime <= 1.0))
    throw ContractViolation("regularized plan needs eps' in (0, 1]");
  if (!(m4 > 0.0)) throw ContractViolation("regularized plan needs a positive fourth moment");
  if (!(dist_xprime_xstar >= 0.0)) throw ContractViolation("distance must be >= 0");
  return 4.0 * eps_prime / (std::sqrt(m4) + dist_xprime_xstar * dist_xprime_xstar);
}

// Full regularized recipe: lambda from the fourth moment, then the TV plan at
// eps'/2. The smoothness in excess of the regularizer's own curvature,
// c.m - c.lambda, is kept and the curvature replaced by the new lambda.
inline PlanReport plan_regularized_tv(double eps_prime, double dist_xprime_xstar,
                                      const ProblemConstants& c) {
  if (!c.m4) throw ContractViolation("regularized plan needs the fourth moment m4");
  if (!(c.m >= c.lambda)) throw ContractViolation("strong convexity exceeds smoothness");
  const double lam = plan_regularized(eps_prime, *c.m4, dist_xprime_xstar);
  ProblemConstants rc = c;
  rc.m = (c.m - c.lambda) + lam;
  rc.lambda = lam;
  PlanReport r = plan_tv(eps_prime / 2.0, rc);
  r.mode = PlanMode::regularized;
  r.eps = eps_prime;
  r.lambda_reg = lam;
  return r;
}

namespace detail {

inline void require_det(const ProblemConstants& c) {
  require_constants(c);
  if (c.alpha == 0.0)
    throw ContractViolation(
        "deterministic plans are undefined at alpha=0: the smooth-approximation bias stays "
        "constant for every delta");
  if (!(c.L > 0.0)) throw ContractViolation("deterministic plans need L > 0");
}

}  // namespace detail

// W2 recipe for plain LMC on the deterministic smooth approximation.
inline PlanReport plan_det_w2(double eps, const ProblemConstants& c) {
  detail::require_det(c);
  if (!(eps > 0.0)) throw ContractViolation("plan_det_w2 needs eps > 0");
  if (!(c.w2_init > 0.0)) throw ContractViolation("plan_det_w2 needs w2_init > 0");
  const double a = c.alpha, lam = c.lambda, dd = static_cast<double>(c.d);
  PlanReport r;
  r.mode = PlanMode::det_w2;
  r.eps = eps;
  const double delta = detail::checked_pow(lam * eps / (24.0 * std::pow(c.L, 1.0 / (1.0 + a))),
                                           (1.0 + a) / a, "delta");
  if (!(delta > 0.0)) throw std::range_error("delta underflows to zero in binary64");
  r.delta = delta;
  auto& in = r.intermediates;
  in.M = smooth_approx_M(c.L, a, delta);
  const double A = detail::checked_pow(24.0 / (lam * eps), (1.0 - a) / a, "(24/(lambda eps)) power") *
                   detail::checked_pow(c.L, 1.0 / a, "L^(1/alpha)");
  in.A = A;
  const double eta = std::min({std::min(lam, lam * lam) * eps * eps / (90000.0 * dd) / (A + c.m),
                               1.0 / (2.0 * lam), lam / (36.0 * (in.M + c.m))});
  in.eta_formula = eta;
  in.eta_limit = 1.0 / (2.0 * lam);
  r.eta = detail::shrink_below(eta, in.eta_limit, in.halvings);
  r.K = detail::ceil_count(720000.0 * dd / (std::min(1.0, lam) * eps * eps * lam * lam) *
                           (A + c.m) * std::log(c.w2_init / eps));
  return r;
}

// TV recipe for plain LMC from N(x*, (M+m)^{-1} I). delta appears on both
// sides of its own definition (through M(delta)); it is resolved by
// fixed-point iteration from delta = 1.
inline PlanReport plan_det_tv(double eps, double beta_floor, const ProblemConstants& c) {
  detail::require_det(c);
  if (!(eps > 0.0)) throw ContractViolation("plan_det_tv needs eps > 0");
  if (!(beta_floor >= 1.0)) throw ContractViolation("plan_det_tv needs beta >= 1");
  const double a = c.alpha, lam = c.lambda, dd = static_cast<double>(c.d);
  const double L_pow = std::pow(c.L, 2.0 / (1.0 + a));
  auto log_ratio = [&](double M) {
    const double v = std::log((M + c.m) / lam);
    if (!(v > 0.0)) throw std::range_error("plan_det_tv needs (M + m) / lambda > 1");
    return v;
  };
  double delta = 1.0;
  for (int it = 0; it < 1000; ++it) {
    const double M = smooth_approx_M(c.L, a, delta);
    const double g = detail::checked_pow(lam * eps * eps / (8.0 * dd * log_ratio(M) * L_pow),
                                         (1.0 + a) / (2.0 * a), "delta");
    const double next = std::min(g, 1.0);
    if (!(next > 0.0)) throw std::range_error("delta underflows to zero in binary64");
    const bool done = std::abs(next - delta) <= 4.0 * std::numeric_limits<double>::epsilon() * delta;
    delta = next;
    if (done) break;
  }
  PlanReport r;
  r.mode = PlanMode::det_tv;
  r.eps = eps;
  r.delta = delta;
  auto& in = r.intermediates;
  in.M = smooth_approx_M(c.L, a, delta);
  const double Mm = in.M + c.m;
  const double lg = log_ratio(in.M);
  const double eta = std::min({1.0, 1.0 / (2.0 * beta_floor * Mm),
                               lam * eps * eps / (32.0 * dd * dd * Mm * Mm * lg)});
  in.eta_formula = eta;
  in.eta_limit = 1.0 / (2.0 * Mm);
  r.eta = detail::shrink_below(eta, in.eta_limit, in.halvings);
  r.K = detail::ceil_count(
      std::max(beta_floor, dd / (4.0 * r.eta * lam) * lg + delta / (4.0 * r.eta * lam)));
  return r;
}

}  // namespace plmc
