#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace specemu {

// All randomness flows from one root seed through named sub-streams.
// Stream ids are mixed with splitmix64 so that (seed, "fit", 3) and
// (seed, "fit", 4) give unrelated engines.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t root_seed, std::string_view name,
                    std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(root_seed);
    s = splitmix64(s ^ hash_str(name));
    s = splitmix64(s ^ index);
    return Rng(s);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace specemu
