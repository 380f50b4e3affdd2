#pragma once

#include <cmath>
#include <cstdint>

namespace lqmf {

// Counter-based random streams. Every consumer derives its own stream key
// from (master seed, role tag, index); draw i of a stream is a pure function
// of (key, i). Batches of rollouts can therefore run on any number of
// threads and still produce bit-identical results.

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

namespace stream_tag {
constexpr std::uint64_t init_common = 1;   // epsilon^0_0
constexpr std::uint64_t init_agent = 2;    // epsilon^1_0 (agent n)
constexpr std::uint64_t step_common = 3;   // epsilon^0_t
constexpr std::uint64_t step_agent = 4;    // epsilon^1_t (agent n)
constexpr std::uint64_t perturb_v1 = 5;    // sphere direction for K
constexpr std::uint64_t perturb_v2 = 6;    // sphere direction for L
constexpr std::uint64_t rollout = 7;       // cost sample i inside an estimator call
constexpr std::uint64_t q_variation = 8;   // heterogeneity draws
constexpr std::uint64_t seed_repeat = 9;   // repetition r of an experiment
constexpr std::uint64_t iteration = 10;    // PG iteration k
constexpr std::uint64_t agent = 11;        // agent substream inside a population rollout
constexpr std::uint64_t index = 12;        // generic per-index fan-out
}  // namespace stream_tag

inline std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag, std::uint64_t index = 0) {
  return mix64(key ^ mix64(tag ^ 0xA5A5A5A55A5A5A5Aull) ^ mix64(index + 0x6A09E667F3BCC909ull));
}

class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  RngStream derive(std::uint64_t tag, std::uint64_t index = 0) const {
    return RngStream(derive_key(key_, tag, index));
  }

  std::uint64_t next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ull * counter_++); }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // standard normal via Box-Muller; the spare value is cached
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lqmf
