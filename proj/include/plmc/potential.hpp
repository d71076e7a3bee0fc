#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "plmc/rng.hpp"

namespace plmc {

using Vector = std::vector<double>;

class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ContractViolation(std::string(what) + ": dimension mismatch (expected " +
                            std::to_string(expected) + ", got " + std::to_string(got) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// (L, alpha) Hoelder certificate for subgradients:
//   ||g(x) - g(y)|| <= L ||x - y||^alpha.
struct Certificate {
  double L = 0.0;
  double alpha = 1.0;
};

// Convex potential with a subgradient oracle and a declared certificate.
class WeaklySmoothPotential {
 public:
  virtual ~WeaklySmoothPotential() = default;

  std::size_t dim() const { return dim_; }
  const Certificate& certificate() const { return cert_; }
  double holder_L() const { return cert_.L; }
  double holder_alpha() const { return cert_.alpha; }

  virtual double value(std::span<const double> x) const = 0;
  // Overwrites `out`. At kinks the minimum-norm subgradient is returned.
  virtual void subgrad(std::span<const double> x, std::span<double> out) const = 0;
  virtual std::string kind() const = 0;

 protected:
  WeaklySmoothPotential(std::size_t dim, Certificate cert) : dim_(dim), cert_(cert) {
    if (dim == 0) throw ContractViolation("potential dimension must be >= 1");
    if (!(cert.alpha >= 0.0 && cert.alpha <= 1.0))
      throw ContractViolation("Hoelder exponent must lie in [0, 1]");
    if (!(cert.L >= 0.0) || !std::isfinite(cert.L))
      throw ContractViolation("Hoelder constant must be finite and >= 0");
  }

 private:
  std::size_t dim_;
  Certificate cert_;
};

class ZeroPotential final : public WeaklySmoothPotential {
 public:
  explicit ZeroPotential(std::size_t dim) : WeaklySmoothPotential(dim, {0.0, 1.0}) {}
  double value(std::span<const double>) const override { return 0.0; }
  void subgrad(std::span<const double>, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  std::string kind() const override { return "zero"; }
};

// U(x) = scale * sum_i |x_i|. Sign jumps give ||g(x) - g(y)|| <= 2 scale sqrt(d).
class L1Potential final : public WeaklySmoothPotential {
 public:
  explicit L1Potential(std::size_t dim, double scale = 1.0)
      : L1Potential(dim, scale, {2.0 * scale * std::sqrt(static_cast<double>(dim)), 0.0}) {}

  // Declared certificate override, for probing certificate checks.
  L1Potential(std::size_t dim, double scale, Certificate declared)
      : WeaklySmoothPotential(dim, declared), scale_(scale) {
    if (!(scale >= 0.0)) throw ContractViolation("l1 scale must be >= 0");
  }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return scale_ * s;
  }
  void subgrad(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = x[i] > 0.0 ? scale_ : (x[i] < 0.0 ? -scale_ : 0.0);
  }
  std::string kind() const override { return "l1"; }

 private:
  double scale_;
};

// U(x) = (a/2) ||x - c||^2, certificate (a, 1).
class QuadraticPotential final : public WeaklySmoothPotential {
 public:
  QuadraticPotential(double a, Vector center)
      : WeaklySmoothPotential(center.size(), {a, 1.0}), a_(a), center_(std::move(center)) {}

  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
    return 0.5 * a_ * s;
  }
  void subgrad(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a_ * (x[i] - center_[i]);
  }
  std::string kind() const override { return "quadratic"; }
  double curvature() const { return a_; }
  const Vector& center() const { return center_; }

 private:
  double a_;
  Vector center_;
};

// Hoelder constant (exponent alpha) of the scalar map t -> sign(t)|t|^alpha.
// The ratio is scale-invariant, so fix t = 1 and scan u = r over a log grid of
// both signs; r = -1 is on the grid.
inline double scalar_power_holder_constant(double alpha) {
  if (alpha <= 0.0) return 2.0;
  if (alpha >= 1.0) return 1.0;
  auto s = [alpha](double t) { return t == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(t), alpha), t); };
  double best = 0.0;
  constexpr int kPerDecade = 400;
  for (int sign : {-1, 1}) {
    for (int k = -8 * kPerDecade; k <= 8 * kPerDecade; ++k) {
      const double r = sign * std::pow(10.0, static_cast<double>(k) / kPerDecade);
      if (r == 1.0) continue;
      best = std::max(best, std::abs(s(1.0) - s(r)) / std::pow(std::abs(1.0 - r), alpha));
    }
  }
  best = std::max(best, 1.0);  // u = 0
  return best;
}

// U(x) = gamma * sum_i |x_i|^(1+alpha). Gradient gamma (1+alpha) sign(x)|x|^alpha,
// certificate L = gamma (1+alpha) c_alpha d^((1-alpha)/2).
class BridgePenalty final : public WeaklySmoothPotential {
 public:
  BridgePenalty(std::size_t dim, double gamma, double alpha)
      : WeaklySmoothPotential(dim, make_certificate(dim, gamma, alpha)),
        gamma_(gamma),
        alpha_(alpha) {}

  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v), 1.0 + alpha_);
    return gamma_ * s;
  }
  void subgrad(std::span<const double> x, std::span<double> out) const override {
    const double c = gamma_ * (1.0 + alpha_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) {
        out[i] = 0.0;
      } else {
        out[i] = std::copysign(c * std::pow(std::abs(x[i]), alpha_), x[i]);
      }
    }
  }
  std::string kind() const override { return "bridge"; }
  double gamma() const { return gamma_; }
  double exponent() const { return alpha_; }

 private:
  static Certificate make_certificate(std::size_t dim, double gamma, double alpha) {
    if (!(gamma >= 0.0)) throw ContractViolation("bridge gamma must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("bridge alpha must lie in [0, 1]");
    if (gamma == 0.0) return {0.0, 1.0};
    const double c = scalar_power_holder_constant(alpha);
    return {gamma * (1.0 + alpha) * c * std::pow(static_cast<double>(dim), (1.0 - alpha) / 2.0),
            alpha};
  }

  double gamma_;
  double alpha_;
};

// m-smooth, lambda-strongly convex part psi of a composite potential.
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  std::size_t dim() const { return center_.size(); }
  double smooth_m() const { return m_; }
  double strong_lambda() const { return lambda_; }
  const Vector& center() const { return center_; }

  virtual double value(std::span<const double> x) const = 0;
  // out += grad psi(x)
  virtual void add_gradient(std::span<const double> x, std::span<double> out) const = 0;

 protected:
  Regularizer(double m, double lambda, Vector center)
      : m_(m), lambda_(lambda), center_(std::move(center)) {
    if (center_.empty()) throw ContractViolation("regularizer dimension must be >= 1");
    if (!(lambda > 0.0)) throw ContractViolation("regularizer strong convexity must be > 0");
    if (!(lambda <= m)) throw ContractViolation("strong convexity exceeds smoothness");
  }

 private:
  double m_;
  double lambda_;
  Vector center_;
};

// psi(x) = (lambda/2) ||x - x'||^2; declared smoothness m defaults to lambda.
class QuadraticRegularizer final : public Regularizer {
 public:
  QuadraticRegularizer(double lambda, Vector center)
      : QuadraticRegularizer(lambda, std::move(center), lambda) {}
  QuadraticRegularizer(double lambda, Vector center, double declared_m)
      : Regularizer(declared_m, lambda, std::move(center)), curvature_(lambda) {}

  double value(std::span<const double> x) const override {
    const Vector& c = center();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return 0.5 * curvature_ * s;
  }
  void add_gradient(std::span<const double> x, std::span<double> out) const override {
    const Vector& c = center();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += curvature_ * (x[i] - c[i]);
  }

 private:
  double curvature_;
};

// psi(x) + ||A x - b||^2. The least-squares term only adds smoothness
// 2 ||A||_2^2 to m; strong convexity still comes from psi alone.
class LeastSquaresAugmented final : public Regularizer {
 public:
  LeastSquaresAugmented(std::shared_ptr<const Regularizer> base, Eigen::MatrixXd A,
                        Eigen::VectorXd b)
      : Regularizer(base->smooth_m() + 2.0 * spectral_norm_sq(A), base->strong_lambda(),
                    base->center()),
        base_(std::move(base)),
        A_(std::move(A)),
        b_(std::move(b)) {
    if (A_.cols() != static_cast<Eigen::Index>(dim()))
      throw ContractViolation("least-squares matrix has wrong column count");
    if (A_.rows() != b_.size()) throw ContractViolation("least-squares shapes inconsistent");
  }

  double value(std::span<const double> x) const override {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    return base_->value(x) + (A_ * xv - b_).squaredNorm();
  }
  void add_gradient(std::span<const double> x, std::span<double> out) const override {
    base_->add_gradient(x, out);
    if (A_.rows() == 0) return;
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd> ov(out.data(), static_cast<Eigen::Index>(out.size()));
    ov.noalias() += 2.0 * (A_.transpose() * (A_ * xv - b_));
  }

  static double spectral_norm_sq(const Eigen::MatrixXd& A) {
    if (A.rows() == 0 || A.cols() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
  }

 private:
  std::shared_ptr<const Regularizer> base_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

// U_bar = U + psi.
class CompositePotential {
 public:
  CompositePotential(std::shared_ptr<const WeaklySmoothPotential> base,
                     std::shared_ptr<const Regularizer> reg,
                     std::optional<Vector> minimizer_hint = std::nullopt)
      : base_(std::move(base)), reg_(std::move(reg)), hint_(std::move(minimizer_hint)) {
    if (!base_ || !reg_) throw ContractViolation("composite potential needs both parts");
    require_dim(base_->dim(), reg_->dim(), "composite potential");
    if (hint_) require_dim(base_->dim(), hint_->size(), "minimizer hint");
  }

  std::size_t dim() const { return base_->dim(); }
  double holder_L() const { return base_->holder_L(); }
  double holder_alpha() const { return base_->holder_alpha(); }
  double smooth_m() const { return reg_->smooth_m(); }
  double strong_lambda() const { return reg_->strong_lambda(); }
  const WeaklySmoothPotential& base() const { return *base_; }
  const Regularizer& regularizer() const { return *reg_; }
  const std::optional<Vector>& minimizer_hint() const { return hint_; }

  double value(std::span<const double> x) const { return base_->value(x) + reg_->value(x); }
  void subgrad(std::span<const double> x, std::span<double> out) const {
    base_->subgrad(x, out);
    reg_->add_gradient(x, out);
  }

 private:
  std::shared_ptr<const WeaklySmoothPotential> base_;
  std::shared_ptr<const Regularizer> reg_;
  std::optional<Vector> hint_;
};

inline double eval(const CompositePotential& pot, std::span<const double> x) {
  require_dim(pot.dim(), x.size(), "eval");
  return pot.value(x);
}

inline Vector subgrad(const CompositePotential& pot, std::span<const double> x) {
  require_dim(pot.dim(), x.size(), "subgrad");
  Vector g(x.size());
  pot.subgrad(x, g);
  return g;
}

// Quadratic target 0.5 a ||x - c||^2 expressed as U = 0, psi quadratic.
inline CompositePotential make_gaussian_target(std::size_t dim, double lambda = 1.0,
                                               Vector center = {}) {
  if (center.empty()) center.assign(dim, 0.0);
  Vector hint = center;
  return CompositePotential(std::make_shared<ZeroPotential>(dim),
                            std::make_shared<QuadraticRegularizer>(lambda, std::move(center)),
                            std::move(hint));
}

// U(x) = ||A x - b||^2 + gamma sum |x_i|^(1+alpha), composed with `reg`.
inline CompositePotential make_bridge_posterior(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                                double gamma, double alpha,
                                                std::shared_ptr<const Regularizer> reg) {
  if (A.cols() == 0) throw ContractViolation("bridge posterior: empty design matrix");
  if (!(gamma >= 0.0)) throw ContractViolation("bridge posterior: gamma must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ContractViolation("bridge posterior: alpha must lie in [0, 1]");
  if (A.rows() != b.size()) throw ContractViolation("bridge posterior: A and b shapes differ");
  if (!reg) throw ContractViolation("bridge posterior: regularizer required");
  const auto d = static_cast<std::size_t>(A.cols());
  require_dim(d, reg->dim(), "bridge posterior regularizer");
  auto smooth = std::make_shared<LeastSquaresAugmented>(std::move(reg), A, b);
  std::shared_ptr<const WeaklySmoothPotential> penalty;
  if (gamma == 0.0) {
    penalty = std::make_shared<ZeroPotential>(d);
  } else {
    penalty = std::make_shared<BridgePenalty>(d, gamma, alpha);
  }
  return CompositePotential(std::move(penalty), std::move(smooth));
}

struct CertificateReport {
  double max_ratio = 0.0;      // max ||g(x)-g(y)|| / ||x-y||^alpha
  double worst_violation = 0;  // max relative subgradient-inequality violation
  std::size_t n_pairs = 0;
  bool pass = false;
};

// Samples pairs in the box [-radius, radius]^d (independent, reflected, and
// nearby pairs) and checks both the Hoelder certificate and the subgradient
// inequality.
template <class Potential>
CertificateReport verify_certificate(const Potential& pot, Certificate declared,
                                     std::size_t n_pairs, double radius, NormalStream& rng,
                                     double tol = 1e-9) {
  const std::size_t d = pot.dim();
  Vector x(d), y(d), gx(d), gy(d);
  CertificateReport rep;
  rep.n_pairs = n_pairs;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (auto& v : x) v = rng.uniform(-radius, radius);
    switch (p % 3) {
      case 0:
        for (auto& v : y) v = rng.uniform(-radius, radius);
        break;
      case 1:
        for (std::size_t i = 0; i < d; ++i) y[i] = -x[i];
        break;
      default: {
        const double scale = radius * std::pow(10.0, -rng.uniform(0.0, 6.0));
        for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + scale * rng.uniform(-1.0, 1.0);
      }
    }
    pot.subgrad(x, gx);
    pot.subgrad(y, gy);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      num += (gx[i] - gy[i]) * (gx[i] - gy[i]);
      den += (x[i] - y[i]) * (x[i] - y[i]);
    }
    num = std::sqrt(num);
    den = std::sqrt(den);
    if (den > 0.0) {
      const double ratio = num / std::pow(den, declared.alpha);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    const double ux = pot.value(x), uy = pot.value(y);
    double lin = 0.0;
    for (std::size_t i = 0; i < d; ++i) lin += gx[i] * (y[i] - x[i]);
    const double gap = uy - ux - lin;
    const double scale = std::max({1.0, std::abs(ux), std::abs(uy)});
    rep.worst_violation = std::max(rep.worst_violation, -gap / scale);
  }
  rep.pass = rep.max_ratio <= declared.L * (1.0 + tol) + tol && rep.worst_violation <= tol;
  return rep;
}

inline CertificateReport verify_certificate(const WeaklySmoothPotential& pot, std::size_t n_pairs,
                                            double radius, NormalStream& rng, double tol = 1e-9) {
  return verify_certificate(pot, pot.certificate(), n_pairs, radius, rng, tol);
}

struct MinimizerResult {
  Vector x;
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

// Subgradient descent with steps k^{-1/2}/(m + lambda) started at the
// regularizer center; converged iff some iterate has ||subgrad|| <= tol. On
// non-convergence the best iterate by value is returned with converged = false.
inline MinimizerResult approximate_minimizer(const CompositePotential& pot,
                                             std::size_t max_iter = 10000, double tol = 1e-6) {
  if (pot.minimizer_hint()) {
    return {*pot.minimizer_hint(), pot.value(*pot.minimizer_hint()), true, 0};
  }
  const double base_step = 1.0 / (pot.smooth_m() + pot.strong_lambda());
  Vector x = pot.regularizer().center();
  Vector g(x.size());
  MinimizerResult best{x, pot.value(x), false, 0};
  for (std::size_t k = 1; k <= max_iter; ++k) {
    pot.subgrad(x, g);
    if (norm2(g) <= tol) return {x, pot.value(x), true, k - 1};
    const double step = base_step / std::sqrt(static_cast<double>(k));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step * g[i];
    const double v = pot.value(x);
    if (v < best.value) best = {x, v, false, k};
  }
  best.iterations = max_iter;
  return best;
}

}  // namespace plmc
