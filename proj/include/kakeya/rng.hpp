#pragma once

#include <cstdint>
#include <string_view>

namespace kakeya {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based generator: every draw is a pure function of
// (seed, stream, index, slot), so results do not depend on evaluation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(seed ^ splitmix64(stream))) {}
  CounterRng(std::uint64_t seed, std::string_view stream) : CounterRng(seed, stream_id(stream)) {}

  std::uint64_t bits(std::uint64_t index, std::uint64_t slot = 0) const {
    return splitmix64(key_ ^ splitmix64(index * 0x2545f4914f6cdd1dULL + slot));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t index, std::uint64_t slot = 0) const {
    return static_cast<double>(bits(index, slot) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t index, std::uint64_t slot, double lo, double hi) const {
    return lo + (hi - lo) * uniform(index, slot);
  }

 private:
  std::uint64_t key_;
};

}  // namespace kakeya
