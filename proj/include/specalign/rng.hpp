#pragma once

#include <cstdint>
#include <string_view>

namespace specalign {

/// Counter-based pseudo-random generator: draw n is the splitmix64
/// finalizer applied to seed + n * golden ratio increment. No global
/// state; identical seeds give bitwise-identical streams, and child
/// streams are derived by hashing (seed, domain, counter).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double normal();                     // standard normal, Box-Muller
  int uniform_int(int lo, int hi);     // inclusive bounds
  double rademacher();                 // -1 or +1

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t x);
  static std::uint64_t derive(std::uint64_t seed, std::string_view domain,
                              std::uint64_t counter);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace specalign
