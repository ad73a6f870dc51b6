#ifndef GLSMUL_RANDOM_HPP_
#define GLSMUL_RANDOM_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace glsmul {

/// Counter-based generator: output k of stream s under seed x is
/// splitmix64_mix(key(x, s) + (k + 1) * 0x9E3779B97F4A7C15). Every value is a
/// pure function of (seed, stream, counter), so draws are portable across
/// compilers and standard libraries, unlike std::normal_distribution.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Named substream; the name is hashed with FNV-1a.
  CounterRng(std::uint64_t seed, std::string_view stream_name);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (both outputs used).
  double normal();

  /// Index drawn with probability proportional to `weights`.
  int categorical(std::span<const double> weights);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);
std::uint64_t fnv1a(std::string_view s);

}  // namespace glsmul

#endif  // GLSMUL_RANDOM_HPP_
