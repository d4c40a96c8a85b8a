#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dsm {

/// Counter-based 64-bit generator.
///
/// The n-th value of a stream is `mix64(key + (n + 1) * 0x9E3779B97F4A7C15)`, where
/// `mix64` is the SplitMix64 finalizer and `key = mix64(seed) ^ fnv1a64(stream_id)`.
/// Values depend only on (seed, stream id, n), so sequences match across runs and
/// platforms. Every stochastic routine takes an explicit Rng; there is no global one.
class Rng {
public:
  Rng(std::uint64_t seed, std::string stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& stream_id() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return counter_; }

  /// Independent child stream named `<stream_id>/<name>`; does not advance this stream.
  Rng fork(std::string_view name) const;
  Rng fork(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  int uniform_int(int lo, int hi_inclusive);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Gamma(shape, 1) by Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape);
  /// Beta(a, b) from two gamma draws.
  double beta(double a, double b);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

private:
  std::uint64_t seed_;
  std::string stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace dsm
