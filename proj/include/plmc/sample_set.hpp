#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "plmc/format.hpp"
#include "plmc/potential.hpp"

namespace plmc {

struct SampleMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string variant;
};

// n x d matrix of draws, row-major, one row per chain.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(std::size_t n, std::size_t d, std::vector<double> data, SampleMeta meta = {})
      : n_(n), d_(d), data_(std::move(data)), meta_(std::move(meta)) {
    if (n_ < 1 || d_ < 1) throw ContractViolation("sample set needs n >= 1 and d >= 1");
    if (data_.size() != n_ * d_) throw ContractViolation("sample set data size is not n * d");
    for (double v : data_)
      if (!std::isfinite(v)) throw ContractViolation("sample set entries must be finite");
  }

  static SampleSet from_rows(const std::vector<Vector>& rows, SampleMeta meta = {}) {
    if (rows.empty()) throw ContractViolation("sample set needs n >= 1");
    const std::size_t d = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
      require_dim(d, r.size(), "sample set row");
      data.insert(data.end(), r.begin(), r.end());
    }
    return SampleSet(rows.size(), d, std::move(data), std::move(meta));
  }

  static SampleSet from_values(std::vector<double> values, SampleMeta meta = {}) {
    const std::size_t n = values.size();
    return SampleSet(n, 1, std::move(values), std::move(meta));
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  const std::vector<double>& data() const { return data_; }
  const SampleMeta& meta() const { return meta_; }
  SampleMeta& meta() { return meta_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(n_);
    for (std::size_t i = 0; i < n_; ++i) c[i] = data_[i * d_ + j];
    return c;
  }

  Vector mean() const {
    Vector mu(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < d_; ++j) mu[j] += data_[i * d_ + j];
    for (auto& v : mu) v /= static_cast<double>(n_);
    return mu;
  }

  friend bool operator==(const SampleSet& a, const SampleSet& b) {
    return a.n_ == b.n_ && a.d_ == b.d_ && a.data_ == b.data_;
  }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> data_;
  SampleMeta meta_;
};

// `# config_hash=<hex> seed=<n> variant=<tag>` then `x0,...,x{d-1}` then rows.
inline void write_csv(std::ostream& os, const SampleSet& s) {
  os << "# config_hash=" << format_hex64(s.meta().config_hash) << " seed=" << s.meta().seed
     << " variant=" << (s.meta().variant.empty() ? "none" : s.meta().variant) << '\n';
  for (std::size_t j = 0; j < s.dim(); ++j) os << (j ? "," : "") << 'x' << j;
  os << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = s.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << format_double(r[j]);
    os << '\n';
  }
}

inline SampleSet read_csv(std::istream& is) {
  std::string line;
  SampleMeta meta;
  std::size_t d = 0;
  std::vector<double> data;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream ms(line.substr(1));
      std::string tok;
      while (ms >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "config_hash") meta.config_hash = std::stoull(val, nullptr, 16);
        if (key == "seed") meta.seed = std::stoull(val);
        if (key == "variant") meta.variant = val;
      }
      continue;
    }
    if (d == 0) {
      d = 1;
      for (char c : line) d += (c == ',');
      continue;
    }
    std::size_t start = 0, count = 0;
    while (true) {
      const auto comma = line.find(',', start);
      data.push_back(parse_double(std::string_view(line).substr(start, comma - start)));
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (count != d) throw ContractViolation("csv row width differs from header");
  }
  if (d == 0) throw ContractViolation("csv has no header");
  const std::size_t n = data.size() / d;
  return SampleSet(n, d, std::move(data), std::move(meta));
}

}  // namespace plmc
