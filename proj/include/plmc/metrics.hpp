#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "plmc/format.hpp"
#include "plmc/potential.hpp"
#include "plmc/rng.hpp"
#include "plmc/sample_set.hpp"

namespace plmc {

// Pairwise (cascade) summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

namespace detail {

inline void require_nonempty(const SampleSet& a, const char* what) {
  if (a.size() == 0) throw ContractViolation(std::string(what) + ": empty sample set");
}

// Sorted values of the larger set reduced to n points at mid-quantiles.
inline std::vector<double> quantile_match(std::vector<double> sorted, std::size_t n) {
  if (sorted.size() == n) return sorted;
  std::vector<double> out(n);
  const double N = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * N / static_cast<double>(n));
    out[i] = sorted[std::min(idx, sorted.size() - 1)];
  }
  return out;
}

inline double w2_1d_sq(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() > b.size()) a = quantile_match(std::move(a), b.size());
  if (b.size() > a.size()) b = quantile_match(std::move(b), a.size());
  std::vector<double> sq(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sq[i] = (a[i] - b[i]) * (a[i] - b[i]);
  return pairwise_sum(sq) / static_cast<double>(a.size());
}

}  // namespace detail

// Exact in 1-D for equal sizes; with unequal sizes the larger set is
// quantile-matched down, which makes it an estimator.
inline double w2_1d(const SampleSet& a, const SampleSet& b) {
  detail::require_nonempty(a, "w2_1d");
  detail::require_nonempty(b, "w2_1d");
  if (a.dim() != 1 || b.dim() != 1) throw ContractViolation("w2_1d needs one-dimensional samples");
  return std::sqrt(detail::w2_1d_sq(a.data(), b.data()));
}

inline constexpr std::size_t kW2ExactMaxSize = 4096;

// Minimum-cost perfect matching on an n x n dense cost matrix (shortest
// augmenting paths with dual potentials). Returns row -> column.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Exact empirical W2 between equal-size sets via linear assignment.
inline double w2_exact(const SampleSet& a, const SampleSet& b) {
  detail::require_nonempty(a, "w2_exact");
  if (a.size() != b.size()) throw ContractViolation("w2_exact needs equal sample sizes");
  if (a.dim() != b.dim()) throw ContractViolation("w2_exact needs equal dimensions");
  const std::size_t n = a.size();
  if (n > kW2ExactMaxSize) throw ContractViolation("w2_exact is capped at n <= 4096");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) s += (ai[k] - bj[k]) * (ai[k] - bj[k]);
      cost[i * n + j] = s;
    }
  }
  const auto match = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  return std::sqrt(total / static_cast<double>(n));
}

// Unit directions, uniform on the sphere, from normalized Gaussian draws.
inline std::vector<Vector> sphere_directions(std::size_t d, std::size_t n_proj, std::uint64_t seed) {
  NormalStream rng(seed, StreamId::aux);
  std::vector<Vector> dirs(n_proj, Vector(d));
  for (auto& u : dirs) {
    double nrm = 0.0;
    do {
      rng.fill(u);
      nrm = norm2(u);
    } while (!(nrm > 0.0));
    for (auto& x : u) x /= nrm;
  }
  return dirs;
}

inline std::vector<double> project(const SampleSet& s, std::span<const double> u) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = dot(s.row(i), u);
  return out;
}

// sqrt of the mean over random directions u of w2_1d(a.u, b.u)^2.
inline double w2_sliced(const SampleSet& a, const SampleSet& b, std::size_t n_proj,
                        std::uint64_t seed) {
  detail::require_nonempty(a, "w2_sliced");
  detail::require_nonempty(b, "w2_sliced");
  if (a.dim() != b.dim()) throw ContractViolation("w2_sliced needs equal dimensions");
  if (n_proj < 1) throw ContractViolation("w2_sliced needs n_proj >= 1");
  const auto dirs = sphere_directions(a.dim(), n_proj, seed);
  std::vector<double> per(n_proj);
  for (std::size_t p = 0; p < n_proj; ++p) per[p] = detail::w2_1d_sq(project(a, dirs[p]), project(b, dirs[p]));
  return std::sqrt(pairwise_sum(per) / static_cast<double>(n_proj));
}

// Tabulated 1-D density on [edges.front(), edges.back()].
struct DensityGrid {
  std::vector<double> edges;      // n_cells + 1, strictly increasing
  std::vector<double> midpoints;  // cell midpoints
  std::vector<double> density;    // normalized density at the midpoints
  std::vector<double> cell_mass;  // sums to 1
  double mode = 0.0;
  double tail_mass_bound = 0.0;  // mass outside the span, Gaussian-envelope bound

  std::size_t n_cells() const { return cell_mass.size(); }
  double lo() const { return edges.front(); }
  double hi() const { return edges.back(); }
};

inline void write_csv(std::ostream& os, const DensityGrid& g) {
  os << "x,density,cell_mass\n";
  for (std::size_t i = 0; i < g.n_cells(); ++i)
    os << format_double(g.midpoints[i]) << ',' << format_double(g.density[i]) << ','
       << format_double(g.cell_mass[i]) << '\n';
}

inline double standard_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Only composite potentials carry the strong convexity that makes e^{-U}
// integrable, so bare weakly smooth potentials are rejected at compile time.
template <class P>
concept QuadratureTarget = std::same_as<std::remove_cvref_t<P>, CompositePotential>;

inline constexpr double kMaxTailMass = 1e-6;

// Composite Simpson rule (one panel per cell) for p ∝ exp(-U) on [lo, hi].
template <QuadratureTarget P>
DensityGrid quadrature_density_1d(const P& pot, double lo, double hi, std::size_t n_cells) {
  if (pot.dim() != 1) throw ContractViolation("quadrature_density_1d needs a one-dimensional target");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ContractViolation("quadrature span must be finite with lo < hi");
  if (n_cells < 1) throw ContractViolation("quadrature needs n_cells >= 1");
  const double h = (hi - lo) / static_cast<double>(n_cells);
  // Energies on the 2 n_cells + 1 Simpson nodes.
  std::vector<double> u(2 * n_cells + 1);
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double x = k == u.size() - 1 ? hi : lo + 0.5 * h * static_cast<double>(k);
    u[k] = pot.value(std::span<const double>(&x, 1));
    if (std::isnan(u[k])) throw std::range_error("potential is NaN on the quadrature span");
    umin = std::min(umin, u[k]);
  }
  if (!std::isfinite(umin)) throw std::range_error("potential is not finite on the quadrature span");
  DensityGrid g;
  g.edges.resize(n_cells + 1);
  g.midpoints.resize(n_cells);
  g.density.resize(n_cells);
  g.cell_mass.resize(n_cells);
  for (std::size_t i = 0; i <= n_cells; ++i)
    g.edges[i] = i == n_cells ? hi : lo + h * static_cast<double>(i);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < n_cells; ++i) {
    const double f0 = std::exp(umin - u[2 * i]), f1 = std::exp(umin - u[2 * i + 1]),
                 f2 = std::exp(umin - u[2 * i + 2]);
    g.cell_mass[i] = (g.edges[i + 1] - g.edges[i]) / 6.0 * (f0 + 4.0 * f1 + f2);
    g.midpoints[i] = 0.5 * (g.edges[i] + g.edges[i + 1]);
    g.density[i] = f1;
    if (u[2 * i + 1] < u[2 * argmax + 1]) argmax = i;
  }
  const double z = pairwise_sum(g.cell_mass);
  if (!(z > 0.0) || !std::isfinite(z)) throw std::range_error("density does not normalize");
  for (auto& m : g.cell_mass) m /= z;
  for (auto& d : g.density) d /= z;
  g.mode = g.midpoints[argmax];
  // p(x) <= p(mode) exp(-lambda (x - mode)^2 / 2) for lambda-strongly log-concave p.
  const double lam = pot.strong_lambda();
  const double s = std::sqrt(lam);
  const double peak = g.density[argmax] * std::sqrt(2.0 * std::numbers::pi / lam);
  g.tail_mass_bound =
      peak * (standard_normal_sf(s * (hi - g.mode)) + standard_normal_sf(s * (g.mode - lo)));
  if (g.tail_mass_bound > kMaxTailMass)
    throw ContractViolation("quadrature span leaves more than 1e-6 of the mass outside");
  return g;
}

// Span centered at x_hat of half-width 10 / sqrt(lambda).
template <QuadratureTarget P>
DensityGrid quadrature_density_1d(const P& pot, std::size_t n_cells) {
  const MinimizerResult mr = approximate_minimizer(pot);
  const double half = 10.0 / std::sqrt(pot.strong_lambda());
  return quadrature_density_1d(pot, mr.x[0] - half, mr.x[0] + half, n_cells);
}

// n points at the mid-quantiles (i + 1/2)/n of the tabulated law, inverting
// the piecewise-linear CDF.
inline SampleSet quantile_points(const DensityGrid& g, std::size_t n) {
  if (n < 1) throw ContractViolation("quantile_points needs n >= 1");
  std::vector<double> out(n);
  std::size_t cell = 0;
  double below = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    while (cell + 1 < g.n_cells() && below + g.cell_mass[cell] < q) below += g.cell_mass[cell++];
    const double m = g.cell_mass[cell];
    const double t = m > 0.0 ? std::clamp((q - below) / m, 0.0, 1.0) : 0.5;
    out[i] = g.edges[cell] + t * (g.edges[cell + 1] - g.edges[cell]);
  }
  return SampleSet::from_values(std::move(out));
}

namespace detail {

// Equal-width bin index on [lo, hi]; n_bins for values outside.
inline std::size_t bin_of(double x, double lo, double hi, std::size_t n_bins) {
  if (!(x >= lo && x <= hi)) return n_bins;
  const auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(n_bins));
  return std::min(b, n_bins - 1);
}

inline std::vector<double> histogram(const SampleSet& s, double lo, double hi, std::size_t n_bins) {
  std::vector<double> h(n_bins + 1, 0.0);
  for (double x : s.data()) h[bin_of(x, lo, hi, n_bins)] += 1.0;
  for (auto& v : h) v /= static_cast<double>(s.size());
  return h;
}

inline double half_l1(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> diff(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) diff[i] = std::abs(p[i] - q[i]);
  return std::clamp(0.5 * pairwise_sum(diff), 0.0, 1.0);
}

inline void require_tv_inputs(const SampleSet& a, std::size_t n_bins) {
  require_nonempty(a, "tv_histogram");
  if (a.dim() != 1) throw ContractViolation("tv_histogram is one-dimensional");
  if (n_bins < 2) throw ContractViolation("tv_histogram needs n_bins >= 2");
}

}  // namespace detail

// Histogram TV against a tabulated truth. Bins are equal-width over the
// truth's span; samples outside it fall in an overflow bucket whose truth
// mass is zero.
inline double tv_histogram(const SampleSet& a, const DensityGrid& truth, std::size_t n_bins) {
  detail::require_tv_inputs(a, n_bins);
  const double lo = truth.lo(), hi = truth.hi();
  const double w = (hi - lo) / static_cast<double>(n_bins);
  std::vector<double> p(n_bins + 1, 0.0);
  // Cell masses are spread over the bins they overlap, uniformly within a cell.
  for (std::size_t c = 0; c < truth.n_cells(); ++c) {
    const double c0 = truth.edges[c], c1 = truth.edges[c + 1];
    auto b = static_cast<std::size_t>(std::max(0.0, std::floor((c0 - lo) / w)));
    for (; b < n_bins; ++b) {
      const double b0 = lo + w * static_cast<double>(b);
      const double b1 = b + 1 == n_bins ? hi : lo + w * static_cast<double>(b + 1);
      if (b0 >= c1) break;
      const double overlap = std::min(c1, b1) - std::max(c0, b0);
      if (overlap > 0.0) p[b] += truth.cell_mass[c] * overlap / (c1 - c0);
    }
  }
  return detail::half_l1(detail::histogram(a, lo, hi, n_bins), p);
}

// Histogram TV between two sample sets, binned over the union of their ranges.
inline double tv_histogram(const SampleSet& a, const SampleSet& b, std::size_t n_bins) {
  detail::require_tv_inputs(a, n_bins);
  detail::require_tv_inputs(b, n_bins);
  const auto [amin, amax] = std::minmax_element(a.data().begin(), a.data().end());
  const auto [bmin, bmax] = std::minmax_element(b.data().begin(), b.data().end());
  double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  if (!(hi > lo)) return 0.0;  // both sets are one identical atom
  return detail::half_l1(detail::histogram(a, lo, hi, n_bins), detail::histogram(b, lo, hi, n_bins));
}

// (1/n) sum ||x_i - center||^4
inline double moment4(const SampleSet& a, std::span<const double> center) {
  if (a.size() < 2) throw ContractViolation("moment4 needs n >= 2");
  require_dim(a.dim(), center.size(), "moment4 center");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += (r[j] - center[j]) * (r[j] - center[j]);
    v[i] = s * s;
  }
  return pairwise_sum(v) / static_cast<double>(a.size());
}

// n i.i.d. draws of N(mean, scale^2 I) from the aux stream of `seed`.
inline SampleSet gaussian_samples(std::size_t n, std::span<const double> mean, double scale,
                                  std::uint64_t seed) {
  if (n < 1) throw ContractViolation("gaussian_samples needs n >= 1");
  const std::size_t d = mean.size();
  NormalStream rng(seed, StreamId::aux);
  std::vector<double> data(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> row(data.data() + i * d, d);
    rng.fill(row);
    for (std::size_t j = 0; j < d; ++j) row[j] = mean[j] + scale * row[j];
  }
  return SampleSet(n, d, std::move(data), SampleMeta{0, seed, "gaussian"});
}

}  // namespace plmc
