#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace spring {

/// Independent random streams used by one solver run. Each purpose draws from
/// its own stream so that, e.g., enabling Lipschitz refresh does not perturb the
/// batch sequence.
enum class Stream : std::uint64_t {
  batch_x = 1,
  batch_y = 2,
  sarah_coin = 3,
  power_method = 4,
  lipschitz_batch = 5,
  init = 6,
  data = 7,
  test = 8,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: the k-th output is a keyed hash of (seed, stream, k).
/// Satisfies UniformRandomBitGenerator. Output is fully determined by the key and
/// the counter, so `discard` is O(1).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() : CounterRng(0, Stream::test) {}
  CounterRng(std::uint64_t seed, Stream stream)
      : CounterRng(seed, static_cast<std::uint64_t>(stream)) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(detail::mix64(seed + detail::kGolden) ^
             detail::mix64(detail::mix64(stream) + 0x632BE59BD9B4E019ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  void discard(std::uint64_t n) noexcept { counter_ += n; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("CounterRng::below: empty range");
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (one value per two uniforms; no caching so
  /// that the stream position stays a pure function of the number of draws).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double prob) noexcept { return uniform() < prob; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniform b-subset of {0, ..., n-1}, returned sorted (Floyd's algorithm).
inline std::vector<std::size_t> sample_subset(CounterRng& rng, std::size_t n, std::size_t b) {
  if (b == 0 || b > n) throw std::invalid_argument("sample_subset: need 1 <= b <= n");
  std::vector<std::size_t> out;
  out.reserve(b);
  if (b == n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t j = n - b; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(out.begin(), out.end(), t) == out.end()) {
      out.push_back(t);
    } else {
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace spring
