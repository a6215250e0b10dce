#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hgo {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Throws hgo::Error with a streamed message when cond is false. The message
// should name the offending value, e.g. HGO_CHECK(c % g == 0, "channels " << c
// << " not divisible by groups " << g).
#define HGO_CHECK(cond, msg)              \
  do {                                    \
    if (!(cond)) {                        \
      std::ostringstream oss_;            \
      oss_ << msg;                        \
      throw ::hgo::Error(oss_.str());     \
    }                                     \
  } while (0)

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// splitmix64: tiny, seed-stable across platforms. All determinism claims
// (weight init, synth data, sampling) route through this generator.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool coin(double p = 0.5) { return uniform() < p; }
};

std::uint64_t fnv1a(std::string_view s);

// ceil to the nearest multiple of divisor, never below divisor
int make_divisible(double v, int divisor = 8);

}  // namespace hgo
