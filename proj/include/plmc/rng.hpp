#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace plmc {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every
// (key, stream) pair addresses an independent sequence, so per-chain streams
// are derived from a seed instead of being split off a shared engine.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  explicit Philox4x32(std::uint64_t key = 0, std::uint32_t stream = 0)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream) {}

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = encrypt({static_cast<std::uint32_t>(block_),
                         static_cast<std::uint32_t>(block_ >> 32), stream_, 0u},
                        key_);
      ++block_;
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  void discard(unsigned long long n) {
    for (; n > 0; --n) (*this)();
  }

  // Ten-round bijection of a 128-bit counter under a 64-bit key.
  static Block encrypt(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  Key key_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int pos_ = 4;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// seed_i = hash(seed, i)
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

// Stream ids carved out of each per-chain key.
enum class StreamId : std::uint32_t { dynamics = 0, init = 1, aux = 2 };

// Standard-normal d-vector source with draw accounting.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key, StreamId stream = StreamId::dynamics)
      : engine_(key, static_cast<std::uint32_t>(stream)) {}

  void fill(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
    ++vector_draws_;
  }

  double scalar() { return normal_(engine_); }

  template <class Real = double>
  Real uniform(Real lo, Real hi) {
    return std::uniform_real_distribution<Real>(lo, hi)(engine_);
  }

  // Number of fill() calls so far.
  std::uint64_t vector_draws() const { return vector_draws_; }

  Philox4x32& engine() { return engine_; }

 private:
  Philox4x32 engine_;
  std::normal_distribution<double> normal_;
  std::uint64_t vector_draws_ = 0;
};

}  // namespace plmc
