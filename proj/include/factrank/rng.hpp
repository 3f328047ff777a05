#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace factrank {

/// Derives an independent seed for a named random substream, e.g.
/// "negatives/Q123". Stages seeded this way can be re-run in isolation.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

/// mt19937_64 has a standard-mandated output sequence; the helpers below
/// avoid std::uniform_int_distribution and std::shuffle, whose outputs are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t base, std::string_view stream)
      : engine_(derive_seed(base, stream)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool coin() { return (engine_() >> 63) != 0; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace factrank
