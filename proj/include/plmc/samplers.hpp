#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "plmc/bounds.hpp"
#include "plmc/potential.hpp"
#include "plmc/rng.hpp"
#include "plmc/sample_set.hpp"
#include "plmc/smoothing.hpp"

namespace plmc {

enum class Variant { LMC, SLMC, PLMC };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::LMC: return "LMC";
    case Variant::SLMC: return "SLMC";
    case Variant::PLMC: return "PLMC";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  u.erase(std::remove(u.begin(), u.end(), '-'), u.end());
  if (u == "LMC") return Variant::LMC;
  if (u == "SLMC") return Variant::SLMC;
  if (u == "PLMC") return Variant::PLMC;
  throw ContractViolation("unknown sampler variant: " + s);
}

struct SamplerConfig {
  Variant variant = Variant::PLMC;
  double eta = 0.01;
  SmoothingRadius mu{};
  std::uint64_t K = 0;
  std::uint64_t seed = 0;
  std::size_t n_chains = 1;
  std::size_t record_every = 1;
  // LMC only: consume (and discard) the omega draws a perturbed chain would
  // use, so LMC and P-LMC/S-LMC at mu = 0 see the same xi sequence.
  bool matched_noise = false;
  std::uint64_t config_hash = 0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t step, std::size_t chain)
      : std::runtime_error("chain " + std::to_string(chain) + " diverged at step " +
                           std::to_string(step)),
        step_(step),
        chain_(chain) {}
  std::uint64_t step() const { return step_; }
  std::size_t chain_index() const { return chain_; }

 private:
  std::uint64_t step_;
  std::size_t chain_;
};

struct Chain {
  std::vector<Vector> iterates;  // steps K, K - r, ... thinned; always ends with step K
  std::vector<std::uint64_t> recorded_steps;
  Vector final_state;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t grad_calls = 0;
  std::uint64_t normal_draws = 0;  // d-vector draws from the dynamics stream
};

enum class InitKind { gaussian_at_min, point, custom };

struct InitStrategy {
  InitKind kind = InitKind::point;
  Vector center;                // point: the start; gaussian_at_min: ignored (x-hat used)
  std::optional<double> scale;  // gaussian_at_min: variance override for s
  // custom: fills the start from the chain's init stream.
  std::function<void(NormalStream&, std::span<double>)> custom;
};

// Per-chain initial-point sampler produced by make_init.
class InitSampler {
 public:
  InitSampler() = default;
  InitSampler(InitKind kind, Vector center, double variance,
              std::function<void(NormalStream&, std::span<double>)> custom, bool converged)
      : kind_(kind),
        center_(std::move(center)),
        variance_(variance),
        custom_(std::move(custom)),
        minimizer_converged_(converged) {}

  // Draw for the chain whose key is `chain_key`, from its init stream.
  Vector draw(std::uint64_t chain_key) const {
    Vector x = center_;
    if (kind_ == InitKind::point) return x;
    NormalStream rng(chain_key, StreamId::init);
    if (kind_ == InitKind::custom) {
      custom_(rng, x);
      return x;
    }
    Vector z(x.size());
    rng.fill(z);
    const double sd = std::sqrt(variance_);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += sd * z[i];
    return x;
  }

  InitKind kind() const { return kind_; }
  const Vector& center() const { return center_; }
  double variance() const { return variance_; }
  // False when gaussian_at_min could not certify its minimizer.
  bool minimizer_converged() const { return minimizer_converged_; }

 private:
  InitKind kind_ = InitKind::point;
  Vector center_;
  double variance_ = 0.0;
  std::function<void(NormalStream&, std::span<double>)> custom_;
  bool minimizer_converged_ = true;
};

// gaussian_at_min draws N(x_hat, s I) with s = 1 / (M_mu + m). At mu = 0 with
// alpha < 1, M_mu is unbounded and L stands in for it.
inline InitSampler make_init(const CompositePotential& pot, const InitStrategy& strategy,
                             SmoothingRadius mu = SmoothingRadius{}) {
  const std::size_t d = pot.dim();
  switch (strategy.kind) {
    case InitKind::point: {
      Vector c = strategy.center.empty() ? Vector(d, 0.0) : strategy.center;
      require_dim(d, c.size(), "init point");
      return InitSampler(InitKind::point, std::move(c), 0.0, {}, true);
    }
    case InitKind::custom: {
      if (!strategy.custom) throw ContractViolation("custom init needs a callback");
      return InitSampler(InitKind::custom, Vector(d, 0.0), 0.0, strategy.custom, true);
    }
    case InitKind::gaussian_at_min: {
      const MinimizerResult mr = approximate_minimizer(pot);
      double s = 0.0;
      if (strategy.scale) {
        s = *strategy.scale;
      } else {
        const double a = pot.holder_alpha();
        const double M = (mu.value() == 0.0 && a < 1.0)
                             ? pot.holder_L()
                             : smoothing_smoothness_Mmu(pot.holder_L(), a, mu.value(), d);
        s = 1.0 / (M + pot.smooth_m());
      }
      if (!(s > 0.0) || !std::isfinite(s))
        throw ContractViolation("gaussian_at_min needs a finite variance s > 0");
      return InitSampler(InitKind::gaussian_at_min, mr.x, s, {}, mr.converged);
    }
  }
  throw ContractViolation("unknown init kind");
}

namespace detail {

inline void check_config(const SamplerConfig& cfg, Variant expected) {
  if (cfg.variant != expected)
    throw ContractViolation("sampler config variant is " + to_string(cfg.variant) + ", expected " +
                            to_string(expected));
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta))
    throw ContractViolation("step size must be finite and >= 0");
  if (expected == Variant::SLMC && !(cfg.eta > 0.0))
    throw ContractViolation("S-LMC divides by eta: eta must be > 0");
  if (cfg.record_every < 1) throw ContractViolation("record_every must be >= 1");
}

inline bool diverged(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) return true;
    s += v * v;
  }
  return !(s <= 1e24);
}

class Recorder {
 public:
  Recorder(Chain& chain, std::uint64_t K, std::size_t every, bool keep)
      : chain_(chain), K_(K), every_(every), keep_(keep) {
    if (keep_) {
      chain_.iterates.reserve(static_cast<std::size_t>(K / every) + 1);
      chain_.recorded_steps.reserve(static_cast<std::size_t>(K / every) + 1);
    }
  }
  void operator()(std::uint64_t k, std::span<const double> x) {
    if (!keep_ || (K_ - k) % every_ != 0) return;
    chain_.iterates.emplace_back(x.begin(), x.end());
    chain_.recorded_steps.push_back(k);
  }

 private:
  Chain& chain_;
  std::uint64_t K_;
  std::size_t every_;
  bool keep_;
};

// One chain of any variant from x0, with noise from (key, dynamics stream).
inline Chain run_chain(const CompositePotential& pot, const SamplerConfig& cfg, Vector x0,
                       std::uint64_t key, std::size_t chain_index, bool keep_iterates) {
  const std::size_t d = pot.dim();
  require_dim(d, x0.size(), "initial point");
  Chain chain;
  chain.config_hash = cfg.config_hash;
  chain.seed = cfg.seed;
  Recorder record(chain, cfg.K, cfg.record_every, keep_iterates);
  NormalStream rng(key, StreamId::dynamics);
  Vector y = std::move(x0), g(d), xi(d), q(d), omega_prev(d), omega_next(d);
  const double eta = cfg.eta;
  const double s = std::sqrt(2.0 * eta);
  const double mu = cfg.mu.value();
  const bool perturbed = cfg.variant != Variant::LMC;
  const bool draw_omega = perturbed || cfg.matched_noise;
  const double shift = cfg.variant == Variant::SLMC ? mu / eta : 0.0;

  if (diverged(y)) throw DivergenceError(0, chain_index);
  record(0, y);
  if (draw_omega && cfg.K > 0) rng.fill(omega_prev);
  for (std::uint64_t k = 0; k < cfg.K; ++k) {
    if (perturbed) {
      for (std::size_t i = 0; i < d; ++i) q[i] = y[i] + mu * omega_prev[i];
      pot.subgrad(q, g);
      if (cfg.variant == Variant::SLMC)
        for (std::size_t i = 0; i < d; ++i) g[i] -= shift * omega_prev[i];
    } else {
      pot.subgrad(y, g);
    }
    if (draw_omega) rng.fill(omega_next);
    rng.fill(xi);
    for (std::size_t i = 0; i < d; ++i) y[i] = y[i] - eta * g[i] + s * xi[i];
    std::swap(omega_prev, omega_next);
    if (diverged(y)) throw DivergenceError(k + 1, chain_index);
    record(k + 1, y);
  }
  chain.grad_calls = cfg.K;
  chain.normal_draws = rng.vector_draws();
  chain.final_state = std::move(y);
  return chain;
}

inline Chain run_single(const CompositePotential& pot, const SamplerConfig& cfg,
                        const InitSampler& init, Variant expected) {
  check_config(cfg, expected);
  const std::uint64_t key = derive_seed(cfg.seed, 0);
  return run_chain(pot, cfg, init.draw(key), key, 0, true);
}

}  // namespace detail

inline Chain run_lmc(const CompositePotential& pot, const SamplerConfig& cfg,
                     const InitSampler& init) {
  return detail::run_single(pot, cfg, init, Variant::LMC);
}

inline Chain run_plmc(const CompositePotential& pot, const SamplerConfig& cfg,
                      const InitSampler& init) {
  return detail::run_single(pot, cfg, init, Variant::PLMC);
}

inline Chain run_slmc(const CompositePotential& pot, const SamplerConfig& cfg,
                      const InitSampler& init) {
  return detail::run_single(pot, cfg, init, Variant::SLMC);
}

inline Chain run(const CompositePotential& pot, const SamplerConfig& cfg, const InitSampler& init) {
  return detail::run_single(pot, cfg, init, cfg.variant);
}

// Chain `chain_index` of the ensemble defined by cfg, with its recorded iterates.
inline Chain run_chain_at(const CompositePotential& pot, const SamplerConfig& cfg,
                          const InitSampler& init, std::size_t chain_index) {
  detail::check_config(cfg, cfg.variant);
  const std::uint64_t key = derive_seed(cfg.seed, chain_index);
  return detail::run_chain(pot, cfg, init.draw(key), key, chain_index, true);
}

// Worker count: SAMPLE_THREADS if set and positive, else the hardware count.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("SAMPLE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs f(i) for i in [0, n) on up to `workers` threads. If any call throws,
// the exception of the smallest failing index is rethrown.
template <class F>
void parallel_for_index(std::size_t n, std::size_t workers, F&& f) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::mutex mtx;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(mtx);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct EnsembleStats {
  std::uint64_t grad_calls = 0;
};

// Final iterates of n_chains independent chains, chain i keyed by
// derive_seed(seed, i). Row order is chain order.
inline SampleSet run_ensemble(const CompositePotential& pot, const SamplerConfig& cfg,
                              const InitSampler& init, EnsembleStats* stats = nullptr) {
  detail::check_config(cfg, cfg.variant);
  if (cfg.n_chains < 1) throw ContractViolation("n_chains must be >= 1");
  const std::size_t d = pot.dim();
  std::vector<double> data(cfg.n_chains * d);
  parallel_for_index(cfg.n_chains, worker_count(), [&](std::size_t i) {
    const std::uint64_t key = derive_seed(cfg.seed, i);
    Chain c = detail::run_chain(pot, cfg, init.draw(key), key, i, false);
    std::copy(c.final_state.begin(), c.final_state.end(), data.begin() + i * d);
  });
  if (stats) stats->grad_calls = cfg.K * cfg.n_chains;
  return SampleSet(cfg.n_chains, d, std::move(data),
                   SampleMeta{cfg.config_hash, cfg.seed, to_string(cfg.variant)});
}

}  // namespace plmc
