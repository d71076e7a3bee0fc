#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "plmc/bounds.hpp"
#include "plmc/format.hpp"
#include "plmc/metrics.hpp"
#include "plmc/potential.hpp"
#include "plmc/samplers.hpp"

namespace plmc {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Keys come out sorted and without whitespace, so this is a canonical form.
inline std::string canonical_json(const json& j) { return j.dump(); }

inline std::uint64_t config_hash(const json& j) { return fnv1a64(canonical_json(j)); }

struct Diagnostic {
  std::string path;
  std::string message;
};

inline std::string format_diagnostics(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) out += d.path + ": " + d.message + "\n";
  return out;
}

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<Diagnostic> ds)
      : std::invalid_argument(format_diagnostics(ds)), diagnostics_(std::move(ds)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

struct PotentialSpec {
  std::string kind = "zero";  // zero | l1 | quadratic | bridge
  std::size_t dim = 1;
  double scale = 1.0;  // l1
  double a = 1.0;      // quadratic curvature
  Vector center;       // quadratic center
  Eigen::MatrixXd A;   // bridge design
  Eigen::VectorXd b;
  double gamma = 1.0;
  double alpha = 1.0;  // bridge exponent
  std::optional<Certificate> certificate;
};

struct RegularizerSpec {
  double lambda = 1.0;
  std::optional<double> m;
  Vector center;
};

struct PlanSpec {
  PlanMode mode = PlanMode::tv;
  double eps = 0.5;
  std::optional<double> w2_init;
  double beta = 1.0;  // det-tv floor
  std::optional<double> m4;
  std::optional<double> xprime_dist;
};

struct SamplerSpec {
  Variant variant = Variant::PLMC;
  std::optional<double> eta;
  double mu = 0.0;
  std::optional<std::uint64_t> K;
  std::size_t record_every = 1;
  std::optional<PlanSpec> plan;
};

struct InitSpec {
  InitKind kind = InitKind::point;
  Vector center;
  std::optional<double> scale;
};

struct TruthSpec {
  std::string kind = "none";  // none | quadrature | gaussian
  std::optional<std::pair<double, double>> span;
  std::size_t n_cells = 4000;
  std::size_t n = 4096;
  std::uint64_t seed = 0;
  Vector mean;
  double scale = 1.0;
};

struct MetricsSpec {
  TruthSpec truth;
  std::vector<std::string> distances;
  std::size_t n_bins = 100;
  std::size_t n_proj = 64;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  json raw;
  std::uint64_t hash = 0;
  PotentialSpec potential;
  RegularizerSpec regularizer;
  SamplerSpec sampler;
  InitSpec init;
  std::size_t n_chains = 1;
  std::uint64_t seed = 0;
  MetricsSpec metrics;
  std::optional<std::string> output_dir;
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"w2_1d", "w2_exact", "w2_sliced", "tv_histogram",
                                              "moment4"};
  return names;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  std::vector<Diagnostic> diags;

  void error(const std::string& path, const std::string& msg) { diags.push_back({path, msg}); }

  static std::string join(const std::string& path, const std::string& key) {
    return path == "$" ? key : path + "." + key;
  }

  const json* child(const json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<double> number(const json& j, const std::string& key, const std::string& path) {
    const json* c = child(j, key);
    if (!c) return std::nullopt;
    if (!c->is_number()) {
      error(join(path, key), "expected a number");
      return std::nullopt;
    }
    return c->get<double>();
  }

  std::optional<std::uint64_t> count(const json& j, const std::string& key, const std::string& path) {
    const json* c = child(j, key);
    if (!c) return std::nullopt;
    if (c->is_number_unsigned()) return c->get<std::uint64_t>();
    if (c->is_number_integer() && c->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(c->get<std::int64_t>());
    if (c->is_number_float()) {
      const double v = c->get<double>();
      if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
    }
    error(join(path, key), "expected a nonnegative integer");
    return std::nullopt;
  }

  std::optional<std::string> string(const json& j, const std::string& key, const std::string& path) {
    const json* c = child(j, key);
    if (!c) return std::nullopt;
    if (!c->is_string()) {
      error(join(path, key), "expected a string");
      return std::nullopt;
    }
    return c->get<std::string>();
  }

  std::optional<Vector> vector(const json& j, const std::string& key, const std::string& path) {
    const json* c = child(j, key);
    if (!c) return std::nullopt;
    if (c->is_number()) return Vector{c->get<double>()};
    if (!c->is_array()) {
      error(join(path, key), "expected an array of numbers");
      return std::nullopt;
    }
    Vector v;
    for (const auto& e : *c) {
      if (!e.is_number()) {
        error(join(path, key), "expected an array of numbers");
        return std::nullopt;
      }
      v.push_back(e.get<double>());
    }
    return v;
  }

  std::optional<Eigen::MatrixXd> matrix(const json& j, const std::string& key,
                                        const std::string& path) {
    if (const json* c = child(j, key)) {
      if (!c->is_array()) {
        error(join(path, key), "expected an array of rows");
        return std::nullopt;
      }
      std::vector<Vector> rows;
      for (std::size_t r = 0; r < c->size(); ++r) {
        auto row = vector(*c, r, join(path, key));
        if (!row) return std::nullopt;
        rows.push_back(*row);
      }
      return to_matrix(rows, join(path, key));
    }
    if (auto file = string(j, key + "_csv", path)) return read_matrix_csv(*file, join(path, key) + "_csv");
    return std::nullopt;
  }

 private:
  std::optional<Vector> vector(const json& arr, std::size_t r, const std::string& path) {
    const json& e = arr[r];
    Vector v;
    if (e.is_number()) return Vector{e.get<double>()};
    if (!e.is_array()) {
      error(path, "row " + std::to_string(r) + " is not an array");
      return std::nullopt;
    }
    for (const auto& x : e) {
      if (!x.is_number()) {
        error(path, "row " + std::to_string(r) + " holds a non-number");
        return std::nullopt;
      }
      v.push_back(x.get<double>());
    }
    return v;
  }

  std::optional<Eigen::MatrixXd> to_matrix(const std::vector<Vector>& rows, const std::string& path) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols) {
        error(path, "ragged rows");
        return std::nullopt;
      }
      for (std::size_t c = 0; c < cols; ++c)
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return M;
  }

  std::optional<Eigen::MatrixXd> read_matrix_csv(const std::string& file, const std::string& path) {
    std::filesystem::path p(file);
    if (p.is_relative()) p = base_dir_ / p;
    std::ifstream in(p);
    if (!in) {
      error(path, "cannot open " + p.string());
      return std::nullopt;
    }
    std::vector<Vector> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      Vector row;
      std::size_t start = 0;
      try {
        while (true) {
          const auto comma = line.find(',', start);
          row.push_back(parse_double(std::string_view(line).substr(start, comma - start)));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      } catch (const std::invalid_argument& e) {
        error(path, std::string(e.what()));
        return std::nullopt;
      }
      rows.push_back(std::move(row));
    }
    return to_matrix(rows, path);
  }

  std::filesystem::path base_dir_;
};

inline void parse_potential(Reader& rd, const json& j, ExperimentConfig& cfg) {
  auto& p = cfg.potential;
  const std::string path = "potential";
  if (!j.is_object()) {
    rd.error(path, "missing potential section");
    return;
  }
  p.kind = rd.string(j, "kind", path).value_or("");
  if (p.kind != "zero" && p.kind != "l1" && p.kind != "quadratic" && p.kind != "bridge") {
    rd.error(path + ".kind", "expected one of zero, l1, quadratic, bridge");
    return;
  }
  const auto dim = rd.count(j, "dim", path);
  if (p.kind == "bridge") {
    auto A = rd.matrix(j, "A", path);
    if (!A) {
      rd.error(path + ".A", "bridge potential needs A or A_csv");
      return;
    }
    p.A = *A;
    if (p.A.cols() == 0) rd.error(path + ".A", "design matrix has no columns");
    auto b = rd.matrix(j, "b", path);
    if (b) {
      if (b->cols() == 1) {
        p.b = b->col(0);
      } else if (b->rows() == 1) {
        p.b = b->row(0).transpose();
      } else if (b->size() == 0) {
        p.b = Eigen::VectorXd(0);
      } else {
        rd.error(path + ".b", "b must be a vector");
      }
    } else {
      p.b = Eigen::VectorXd::Zero(p.A.rows());
    }
    if (p.b.size() != p.A.rows())
      rd.error(path + ".b", "length " + std::to_string(p.b.size()) + " differs from A's " +
                                std::to_string(p.A.rows()) + " rows");
    p.gamma = rd.number(j, "gamma", path).value_or(1.0);
    p.alpha = rd.number(j, "alpha", path).value_or(1.0);
    if (!(p.gamma >= 0.0)) rd.error(path + ".gamma", "must be >= 0");
    if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) rd.error(path + ".alpha", "must lie in [0, 1]");
    p.dim = static_cast<std::size_t>(p.A.cols());
    if (dim && *dim != p.dim) rd.error(path + ".dim", "differs from the number of columns of A");
  } else {
    if (!dim || *dim < 1) {
      rd.error(path + ".dim", "positive dimension required");
      return;
    }
    p.dim = *dim;
  }
  if (p.kind == "l1") {
    p.scale = rd.number(j, "scale", path).value_or(1.0);
    if (!(p.scale >= 0.0)) rd.error(path + ".scale", "must be >= 0");
  }
  if (p.kind == "quadratic") {
    p.a = rd.number(j, "a", path).value_or(1.0);
    if (!(p.a >= 0.0)) rd.error(path + ".a", "curvature must be >= 0");
    p.center = rd.vector(j, "center", path).value_or(Vector(p.dim, 0.0));
    if (p.center.size() != p.dim) rd.error(path + ".center", "length differs from dim");
  }
  if (const json* c = rd.child(j, "certificate")) {
    Certificate cert;
    cert.L = rd.number(*c, "L", path + ".certificate").value_or(-1.0);
    cert.alpha = rd.number(*c, "alpha", path + ".certificate").value_or(-1.0);
    if (!(cert.L >= 0.0)) rd.error(path + ".certificate.L", "must be given and >= 0");
    if (!(cert.alpha >= 0.0 && cert.alpha <= 1.0))
      rd.error(path + ".certificate.alpha", "must be given and lie in [0, 1]");
    p.certificate = cert;
  }
}

inline void parse_regularizer(Reader& rd, const json& j, ExperimentConfig& cfg) {
  auto& r = cfg.regularizer;
  const std::string path = "regularizer";
  if (!j.is_object()) {
    rd.error(path, "missing regularizer section (a strongly convex term is required)");
    return;
  }
  r.lambda = rd.number(j, "lambda", path).value_or(0.0);
  r.m = rd.number(j, "m", path);
  r.center = rd.vector(j, "center", path).value_or(Vector(cfg.potential.dim, 0.0));
  if (!(r.lambda > 0.0)) rd.error(path + ".lambda", "strong convexity lambda must be > 0");
  if (r.m && r.lambda > 0.0 && r.lambda > *r.m)
    rd.error(path, "strong convexity exceeds smoothness");
  if (r.center.size() != cfg.potential.dim) rd.error(path + ".center", "length differs from dim");
}

inline void parse_sampler(Reader& rd, const json& j, ExperimentConfig& cfg) {
  auto& s = cfg.sampler;
  const std::string path = "sampler";
  if (!j.is_object()) {
    rd.error(path, "missing sampler section");
    return;
  }
  try {
    s.variant = variant_from_string(rd.string(j, "variant", path).value_or("PLMC"));
  } catch (const ContractViolation& e) {
    rd.error(path + ".variant", e.what());
  }
  s.eta = rd.number(j, "eta", path);
  s.mu = rd.number(j, "mu", path).value_or(0.0);
  s.K = rd.count(j, "K", path);
  s.record_every = rd.count(j, "record_every", path).value_or(1);
  if (s.record_every < 1) rd.error(path + ".record_every", "must be >= 1");
  if (!(s.mu >= 0.0)) rd.error(path + ".mu", "smoothing radius must be >= 0");
  const json* pj = rd.child(j, "plan");
  const bool explicit_params = s.eta.has_value() || s.K.has_value();
  if (pj && explicit_params)
    rd.error(path, "give either explicit eta/K or a plan, not both");
  if (!pj && !(s.eta && s.K)) rd.error(path, "explicit parameters need both eta and K (or give a plan)");
  if (s.eta && !(*s.eta >= 0.0)) rd.error(path + ".eta", "step size must be >= 0");
  if (s.eta && s.variant == Variant::SLMC && !(*s.eta > 0.0))
    rd.error(path + ".eta", "S-LMC divides by eta: eta must be > 0");
  if (!pj) return;
  const std::string pp = path + ".plan";
  PlanSpec plan;
  try {
    plan.mode = plan_mode_from_string(rd.string(*pj, "mode", pp).value_or(""));
  } catch (const ContractViolation& e) {
    rd.error(pp + ".mode", "expected one of w2, tv, det-w2, det-tv, regularized");
  }
  plan.eps = rd.number(*pj, "eps", pp).value_or(-1.0);
  if (!(plan.eps > 0.0)) rd.error(pp + ".eps", "target accuracy eps must be given and > 0");
  plan.w2_init = rd.number(*pj, "w2_init", pp);
  plan.beta = rd.number(*pj, "beta", pp).value_or(1.0);
  plan.m4 = rd.number(*pj, "m4", pp);
  plan.xprime_dist = rd.number(*pj, "xprime_dist", pp);
  if (is_deterministic(plan.mode) && s.variant != Variant::LMC)
    rd.error(pp + ".mode", "deterministic plans drive plain LMC; set variant to LMC");
  if (!is_deterministic(plan.mode) && s.variant != Variant::PLMC)
    rd.error(pp + ".mode", "stochastic plans drive P-LMC; set variant to PLMC");
  if (plan.mode == PlanMode::regularized && !plan.m4)
    rd.error(pp + ".m4", "regularized plan needs the fourth moment m4");
  s.plan = plan;
}

inline void parse_init(Reader& rd, const json* j, ExperimentConfig& cfg) {
  auto& in = cfg.init;
  const std::string path = "init";
  in.center = Vector(cfg.potential.dim, 0.0);
  if (!j) return;
  const std::string kind = rd.string(*j, "kind", path).value_or("point");
  if (kind == "point") {
    in.kind = InitKind::point;
  } else if (kind == "gaussian_at_min") {
    in.kind = InitKind::gaussian_at_min;
  } else {
    rd.error(path + ".kind", "expected point or gaussian_at_min");
  }
  in.center = rd.vector(*j, "center", path).value_or(in.center);
  in.scale = rd.number(*j, "scale", path);
  if (in.center.size() != cfg.potential.dim) rd.error(path + ".center", "length differs from dim");
  if (in.scale && !(*in.scale > 0.0)) rd.error(path + ".scale", "must be > 0");
}

inline void parse_metrics(Reader& rd, const json* j, ExperimentConfig& cfg) {
  auto& m = cfg.metrics;
  const std::string path = "metrics";
  if (!j) return;
  m.n_bins = rd.count(*j, "n_bins", path).value_or(100);
  m.n_proj = rd.count(*j, "n_proj", path).value_or(64);
  m.seed = rd.count(*j, "seed", path).value_or(0);
  if (m.n_bins < 2) rd.error(path + ".n_bins", "must be >= 2");
  if (m.n_proj < 1) rd.error(path + ".n_proj", "must be >= 1");
  if (const json* t = rd.child(*j, "truth")) {
    const std::string tp = path + ".truth";
    auto& tr = m.truth;
    tr.kind = rd.string(*t, "kind", tp).value_or("");
    if (tr.kind == "quadrature") {
      if (auto span = rd.vector(*t, "span", tp)) {
        if (span->size() != 2 || !((*span)[0] < (*span)[1]))
          rd.error(tp + ".span", "expected [lo, hi] with lo < hi");
        else
          tr.span = std::pair{(*span)[0], (*span)[1]};
      }
      tr.n_cells = rd.count(*t, "n_cells", tp).value_or(4000);
      if (tr.n_cells < 1) rd.error(tp + ".n_cells", "must be >= 1");
      if (cfg.potential.dim != 1) rd.error(tp, "quadrature truth is one-dimensional");
    } else if (tr.kind == "gaussian") {
      tr.n = rd.count(*t, "n", tp).value_or(4096);
      tr.seed = rd.count(*t, "seed", tp).value_or(0);
      tr.mean = rd.vector(*t, "mean", tp).value_or(Vector(cfg.potential.dim, 0.0));
      tr.scale = rd.number(*t, "scale", tp).value_or(1.0);
      if (tr.n < 1) rd.error(tp + ".n", "must be >= 1");
      if (tr.mean.size() != cfg.potential.dim) rd.error(tp + ".mean", "length differs from dim");
      if (!(tr.scale > 0.0)) rd.error(tp + ".scale", "must be > 0");
    } else {
      rd.error(tp + ".kind", "expected quadrature or gaussian");
    }
  }
  if (const json* d = rd.child(*j, "distances")) {
    if (!d->is_array()) {
      rd.error(path + ".distances", "expected an array of metric names");
      return;
    }
    for (const auto& e : *d) {
      if (!e.is_string() || std::find(known_metrics().begin(), known_metrics().end(),
                                       e.get<std::string>()) == known_metrics().end()) {
        rd.error(path + ".distances", "unknown metric " + e.dump());
        continue;
      }
      m.distances.push_back(e.get<std::string>());
    }
  }
  const bool has_truth = m.truth.kind != "none";
  for (const auto& name : m.distances) {
    if (name == "moment4") continue;
    if (!has_truth) rd.error(path + ".distances", name + " needs a truth section");
    if ((name == "w2_1d" || name == "tv_histogram") && cfg.potential.dim != 1)
      rd.error(path + ".distances", name + " is one-dimensional");
    if (name == "w2_exact" && cfg.n_chains > kW2ExactMaxSize)
      rd.error(path + ".distances", "w2_exact is capped at 4096 chains");
  }
}

inline ExperimentConfig parse_into(const json& j, const std::filesystem::path& base_dir,
                                   std::vector<Diagnostic>& out) {
  Reader rd(base_dir);
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.hash = config_hash(j);
  if (!j.is_object()) {
    out.push_back({"$", "config must be a JSON object"});
    return cfg;
  }
  const auto ver = rd.count(j, "schema_version", "$");
  if (!ver || *ver != static_cast<std::uint64_t>(kSchemaVersion))
    rd.error("schema_version", "expected schema_version " + std::to_string(kSchemaVersion));
  static const json empty = json::object();
  const json* ens = rd.child(j, "ensemble");
  const auto seed = ens ? rd.count(*ens, "seed", "ensemble") : std::nullopt;
  if (!seed) rd.error("ensemble.seed", "seed is mandatory");
  cfg.seed = seed.value_or(0);
  cfg.n_chains = ens ? rd.count(*ens, "n_chains", "ensemble").value_or(1) : 1;
  if (cfg.n_chains < 1) rd.error("ensemble.n_chains", "must be >= 1");

  const json* pj = rd.child(j, "potential");
  parse_potential(rd, pj ? *pj : empty, cfg);
  const json* rj = rd.child(j, "regularizer");
  parse_regularizer(rd, rj ? *rj : json(), cfg);
  const json* sj = rd.child(j, "sampler");
  parse_sampler(rd, sj ? *sj : json(), cfg);
  parse_init(rd, rd.child(j, "init"), cfg);
  parse_metrics(rd, rd.child(j, "metrics"), cfg);
  if (const json* o = rd.child(j, "output")) cfg.output_dir = rd.string(*o, "dir", "output");
  out.insert(out.end(), rd.diags.begin(), rd.diags.end());
  return cfg;
}

}  // namespace detail

// Parses and checks the schema; throws ConfigError listing every problem.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = ".") {
  std::vector<Diagnostic> ds;
  ExperimentConfig cfg = detail::parse_into(j, base_dir, ds);
  if (!ds.empty()) throw ConfigError(std::move(ds));
  return cfg;
}

inline json load_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return json::parse(in);
}

// Potential with the configured regularizer; `lambda_override` replaces the
// regularizer curvature while keeping its excess smoothness m - lambda.
inline CompositePotential build_potential(const ExperimentConfig& cfg,
                                          std::optional<double> lambda_override = std::nullopt) {
  const auto& p = cfg.potential;
  const auto& r = cfg.regularizer;
  double lambda = r.lambda;
  double m = r.m.value_or(r.lambda);
  if (lambda_override) {
    m = (m - lambda) + *lambda_override;
    lambda = *lambda_override;
  }
  auto reg = std::make_shared<QuadraticRegularizer>(lambda, r.center, m);
  if (p.kind == "bridge") return make_bridge_posterior(p.A, p.b, p.gamma, p.alpha, std::move(reg));
  if (p.kind == "l1")
    return CompositePotential(std::make_shared<L1Potential>(p.dim, p.scale), std::move(reg));
  if (p.kind == "quadratic") {
    // Minimizer of (a/2)||x - c||^2 + (lambda/2)||x - x'||^2.
    Vector hint(p.dim);
    for (std::size_t i = 0; i < p.dim; ++i)
      hint[i] = (p.a * p.center[i] + lambda * r.center[i]) / (p.a + lambda);
    return CompositePotential(std::make_shared<QuadraticPotential>(p.a, p.center), std::move(reg),
                              std::move(hint));
  }
  return CompositePotential(std::make_shared<ZeroPotential>(p.dim), std::move(reg), r.center);
}

inline Certificate effective_certificate(const ExperimentConfig& cfg, const CompositePotential& pot) {
  return cfg.potential.certificate.value_or(pot.base().certificate());
}

// Everything the planners need, with the W2(p0, p*) surrogate
// ||x0_mean - x_hat|| + sqrt(d / lambda) when no estimate is configured.
struct ResolvedConstants {
  ProblemConstants consts;
  Vector x_hat;
  bool minimizer_converged = true;
  double w2_init_surrogate = 0.0;
  double xprime_dist = 0.0;
};

inline ResolvedConstants resolve_constants(const ExperimentConfig& cfg, const CompositePotential& pot) {
  ResolvedConstants rc;
  const MinimizerResult mr = approximate_minimizer(pot);
  rc.x_hat = mr.x;
  rc.minimizer_converged = mr.converged;
  const Certificate cert = effective_certificate(cfg, pot);
  auto& c = rc.consts;
  c.d = pot.dim();
  c.L = cert.L;
  c.alpha = cert.alpha;
  c.m = pot.smooth_m();
  c.lambda = pot.strong_lambda();
  c.x_star_norm = norm2(rc.x_hat);
  const Vector& x0 = cfg.init.kind == InitKind::gaussian_at_min ? rc.x_hat : cfg.init.center;
  double dist = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) dist += (x0[i] - rc.x_hat[i]) * (x0[i] - rc.x_hat[i]);
  rc.w2_init_surrogate = std::sqrt(dist) + std::sqrt(static_cast<double>(c.d) / c.lambda);
  c.w2_init = rc.w2_init_surrogate;
  double xd = 0.0;
  const Vector& xp = cfg.regularizer.center;
  for (std::size_t i = 0; i < xp.size(); ++i) xd += (xp[i] - rc.x_hat[i]) * (xp[i] - rc.x_hat[i]);
  rc.xprime_dist = std::sqrt(xd);
  if (cfg.sampler.plan) {
    if (cfg.sampler.plan->w2_init) c.w2_init = *cfg.sampler.plan->w2_init;
    c.m4 = cfg.sampler.plan->m4;
    if (cfg.sampler.plan->xprime_dist) rc.xprime_dist = *cfg.sampler.plan->xprime_dist;
  }
  return rc;
}

inline PlanReport make_plan(const PlanSpec& spec, const ResolvedConstants& rc) {
  switch (spec.mode) {
    case PlanMode::w2: return plan_w2(spec.eps, rc.consts);
    case PlanMode::tv: return plan_tv(spec.eps, rc.consts);
    case PlanMode::regularized: return plan_regularized_tv(spec.eps, rc.xprime_dist, rc.consts);
    case PlanMode::det_w2: return plan_det_w2(spec.eps, rc.consts);
    case PlanMode::det_tv: return plan_det_tv(spec.eps, spec.beta, rc.consts);
  }
  throw ContractViolation("unknown plan mode");
}

inline json to_json(const PlanReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const auto& in = r.intermediates;
  json inter = {{"M", in.M},           {"M_mu", opt(in.M_mu)},  {"sigma2", opt(in.sigma2)},
                {"beta", opt(in.beta)}, {"bias", opt(in.bias)}, {"C", opt(in.C)},
                {"A", opt(in.A)},       {"eta_formula", in.eta_formula},
                {"eta_limit", in.eta_limit}, {"halvings", in.halvings}};
  return {{"mode", to_string(r.mode)},   {"eps", r.eps},
          {"eta", r.eta},                {"mu", r.mu},
          {"K", r.K},                    {"eps_bar", opt(r.eps_bar)},
          {"delta", opt(r.delta)},       {"lambda_reg", opt(r.lambda_reg)},
          {"intermediates", inter}};
}

// Static checks plus planner preconditions, without running anything.
inline std::vector<Diagnostic> validate(const json& j, const std::filesystem::path& base_dir = ".") {
  std::vector<Diagnostic> ds;
  ExperimentConfig cfg = detail::parse_into(j, base_dir, ds);
  if (!ds.empty()) return ds;
  try {
    const CompositePotential pot = build_potential(cfg);
    const Certificate cert = effective_certificate(cfg, pot);
    if (pot.strong_lambda() > pot.smooth_m())
      ds.push_back({"regularizer", "strong convexity exceeds smoothness"});
    if (cfg.sampler.plan) {
      const PlanSpec& plan = *cfg.sampler.plan;
      if (is_deterministic(plan.mode) && cert.alpha == 0.0) {
        ds.push_back({"sampler.plan.mode",
                      "deterministic plans are undefined at alpha=0: the smooth-approximation "
                      "bias stays constant for every delta"});
      } else {
        try {
          make_plan(plan, resolve_constants(cfg, pot));
        } catch (const std::exception& e) {
          ds.push_back({"sampler.plan", e.what()});
        }
      }
    }
  } catch (const std::exception& e) {
    ds.push_back({"potential", e.what()});
  }
  return ds;
}

struct MetricResult {
  std::string name;
  double value = 0.0;
  json estimator;  // n, bins, n_proj, seed, reference
};

struct RunOptions {
  bool plan_only = false;
  bool write_outputs = true;
  std::optional<std::filesystem::path> out_dir;
  // Applied after plan resolution.
  std::optional<std::uint64_t> K;
  std::optional<double> eta;
  std::optional<double> mu;
};

struct RunReport {
  std::uint64_t config_hash = 0;
  std::optional<PlanReport> plan;
  SamplerConfig sampler;
  ResolvedConstants constants;
  double init_variance = 0.0;
  std::vector<MetricResult> metrics;
  std::uint64_t grad_calls = 0;
  double wall_seconds = 0.0;
  std::optional<SampleSet> samples;

  const MetricResult* metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return &m;
    return nullptr;
  }
};

inline json to_json(const RunReport& r) {
  json metrics = json::object();
  for (const auto& m : r.metrics) {
    json e = m.estimator;
    e["value"] = m.value;
    metrics[m.name] = e;
  }
  json j = {{"config_hash", format_hex64(r.config_hash)},
            {"variant", to_string(r.sampler.variant)},
            {"eta", r.sampler.eta},
            {"mu", r.sampler.mu.value()},
            {"K", r.sampler.K},
            {"n_chains", r.sampler.n_chains},
            {"seed", r.sampler.seed},
            {"plan", r.plan ? to_json(*r.plan) : json(nullptr)},
            {"constants",
             {{"d", r.constants.consts.d},
              {"L", r.constants.consts.L},
              {"alpha", r.constants.consts.alpha},
              {"m", r.constants.consts.m},
              {"lambda", r.constants.consts.lambda},
              {"x_star_norm", r.constants.consts.x_star_norm},
              {"w2_init", r.constants.consts.w2_init},
              {"w2_init_surrogate", r.constants.w2_init_surrogate}}},
            {"minimizer", {{"x", r.constants.x_hat}, {"converged", r.constants.minimizer_converged}}},
            {"init_variance", r.init_variance},
            {"metrics", metrics},
            {"grad_calls", r.grad_calls},
            {"wall_clock_seconds", r.wall_seconds}};
  return j;
}

namespace detail {

inline std::vector<MetricResult> compute_metrics(const ExperimentConfig& cfg,
                                                 const CompositePotential& pot,
                                                 const SampleSet& samples, const Vector& x_hat) {
  std::vector<MetricResult> out;
  const auto& ms = cfg.metrics;
  const std::size_t n = samples.size();
  std::optional<DensityGrid> grid;
  std::optional<SampleSet> truth;
  json ref;
  if (ms.truth.kind == "quadrature") {
    grid = ms.truth.span
               ? quadrature_density_1d(pot, ms.truth.span->first, ms.truth.span->second,
                                       ms.truth.n_cells)
               : quadrature_density_1d(pot, ms.truth.n_cells);
    truth = quantile_points(*grid, n);
    ref = {{"truth", "quadrature"}, {"span", {grid->lo(), grid->hi()}}, {"n_cells", grid->n_cells()}};
  } else if (ms.truth.kind == "gaussian") {
    truth = gaussian_samples(ms.truth.n, ms.truth.mean, ms.truth.scale, ms.truth.seed);
    ref = {{"truth", "gaussian"}, {"truth_n", ms.truth.n}, {"truth_seed", ms.truth.seed}};
  }
  for (const auto& name : ms.distances) {
    MetricResult r;
    r.name = name;
    r.estimator = ref;
    r.estimator["n"] = n;
    if (name == "w2_1d") {
      r.value = w2_1d(samples, *truth);
    } else if (name == "w2_exact") {
      if (truth->size() != n) {
        // Equal sizes are required; the gaussian truth is regenerated at n.
        truth = gaussian_samples(n, ms.truth.mean, ms.truth.scale, ms.truth.seed);
        r.estimator["truth_n"] = n;
      }
      r.value = w2_exact(samples, *truth);
    } else if (name == "w2_sliced") {
      r.value = w2_sliced(samples, *truth, ms.n_proj, ms.seed);
      r.estimator["n_proj"] = ms.n_proj;
      r.estimator["seed"] = ms.seed;
    } else if (name == "tv_histogram") {
      r.value = grid ? tv_histogram(samples, *grid, ms.n_bins) : tv_histogram(samples, *truth, ms.n_bins);
      r.estimator["bins"] = ms.n_bins;
    } else if (name == "moment4") {
      r.value = moment4(samples, x_hat);
      r.estimator = {{"n", n}, {"center", x_hat}};
    }
    out.push_back(std::move(r));
    if (name == "w2_sliced" && ms.truth.kind == "gaussian") {
      // Self-distance of two independent truth draws under the same estimator.
      const SampleSet other =
          gaussian_samples(ms.truth.n, ms.truth.mean, ms.truth.scale, derive_seed(ms.truth.seed, 1));
      MetricResult b;
      b.name = "w2_sliced_baseline";
      b.value = w2_sliced(*truth, other, ms.n_proj, ms.seed);
      b.estimator = {{"n", ms.truth.n}, {"n_proj", ms.n_proj}, {"seed", ms.seed},
                     {"truth_seeds", {ms.truth.seed, derive_seed(ms.truth.seed, 1)}}};
      out.push_back(std::move(b));
    }
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace detail

// Resolves the plan, runs the ensemble, evaluates metrics, and writes
// samples.csv and report.json into the output directory.
inline RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config_hash = cfg.hash;
  CompositePotential pot = build_potential(cfg);
  rep.constants = resolve_constants(cfg, pot);
  SamplerConfig sc;
  sc.variant = cfg.sampler.variant;
  sc.seed = cfg.seed;
  sc.n_chains = cfg.n_chains;
  sc.record_every = cfg.sampler.record_every;
  sc.config_hash = cfg.hash;
  std::optional<double> init_scale = cfg.init.scale;
  if (cfg.sampler.plan) {
    rep.plan = make_plan(*cfg.sampler.plan, rep.constants);
    sc.eta = rep.plan->eta;
    sc.mu = SmoothingRadius(rep.plan->mu);
    sc.K = rep.plan->K;
    if (rep.plan->lambda_reg) pot = build_potential(cfg, rep.plan->lambda_reg);
    // Deterministic plans start from N(x*, (M(delta) + m)^{-1} I).
    if (is_deterministic(rep.plan->mode) && !init_scale)
      init_scale = 1.0 / (rep.plan->intermediates.M + pot.smooth_m());
  } else {
    sc.eta = *cfg.sampler.eta;
    sc.mu = SmoothingRadius(cfg.sampler.mu);
    sc.K = *cfg.sampler.K;
  }
  if (opt.K) sc.K = *opt.K;
  if (opt.eta) sc.eta = *opt.eta;
  if (opt.mu) sc.mu = SmoothingRadius(*opt.mu);
  rep.sampler = sc;
  if (opt.plan_only) {
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }
  InitStrategy strategy;
  strategy.kind = cfg.init.kind;
  strategy.center = cfg.init.center;
  strategy.scale = init_scale;
  const InitSampler init = make_init(pot, strategy, sc.mu);
  rep.init_variance = init.variance();
  EnsembleStats stats;
  SampleSet samples = run_ensemble(pot, sc, init, &stats);
  rep.grad_calls = stats.grad_calls;
  rep.metrics = detail::compute_metrics(cfg, pot, samples, rep.constants.x_hat);
  rep.samples = std::move(samples);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opt.write_outputs) {
    const std::filesystem::path dir = opt.out_dir ? *opt.out_dir
                                                  : std::filesystem::path(cfg.output_dir.value_or("out"));
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_csv(csv, *rep.samples);
    detail::write_text_file(dir / "samples.csv", csv.str());
    detail::write_text_file(dir / "report.json", to_json(rep).dump(2) + "\n");
  }
  return rep;
}

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"K", "eta", "mu", "alpha", "n_chains"};
  return axes;
}

struct SweepTable {
  std::string axis;
  std::vector<double> values;
  std::vector<std::string> metric_names;
  std::vector<RunReport> rows;
};

// One run per value. K, eta and mu override the resolved sampler
// parameters; alpha edits the bridge exponent and n_chains the ensemble size.
inline SweepTable sweep(const ExperimentConfig& base, const std::string& axis,
                        const std::vector<double>& values,
                        const std::filesystem::path& base_dir = ".") {
  if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end())
    throw ContractViolation("invalid sweep axis '" + axis + "': expected K, eta, mu, alpha or n_chains");
  if (values.empty()) throw ContractViolation("sweep needs at least one value");
  SweepTable t;
  t.axis = axis;
  t.values = values;
  for (double v : values) {
    RunOptions opt;
    opt.write_outputs = false;
    ExperimentConfig cfg = base;
    if (axis == "K") {
      if (!(v >= 0.0) || v != std::floor(v)) throw ContractViolation("K values must be integers >= 0");
      opt.K = static_cast<std::uint64_t>(v);
    } else if (axis == "eta") {
      opt.eta = v;
    } else if (axis == "mu") {
      opt.mu = v;
    } else {
      json raw = base.raw;
      if (axis == "alpha") {
        if (base.potential.kind != "bridge")
          throw ContractViolation("the alpha axis needs a bridge potential");
        raw["potential"]["alpha"] = v;
      } else {
        if (!(v >= 1.0) || v != std::floor(v)) throw ContractViolation("n_chains values must be integers >= 1");
        raw["ensemble"]["n_chains"] = static_cast<std::uint64_t>(v);
      }
      cfg = parse_config(raw, base_dir);
    }
    t.rows.push_back(run_experiment(cfg, opt));
  }
  for (const auto& m : t.rows.front().metrics) t.metric_names.push_back(m.name);
  return t;
}

// axis,value,<metrics...>,eta,mu,K,grad_calls
inline void write_csv(std::ostream& os, const SweepTable& t) {
  os << "axis,value";
  for (const auto& n : t.metric_names) os << ',' << n;
  os << ",eta,mu,K,grad_calls\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const RunReport& r = t.rows[i];
    os << t.axis << ',' << format_double(t.values[i]);
    for (const auto& n : t.metric_names) {
      const MetricResult* m = r.metric(n);
      os << ',' << (m ? format_double(m->value) : "");
    }
    os << ',' << format_double(r.sampler.eta) << ',' << format_double(r.sampler.mu.value()) << ','
       << r.sampler.K << ',' << r.grad_calls << '\n';
  }
}

}  // namespace plmc
