#ifndef SECTRA_RNG_HPP_
#define SECTRA_RNG_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

namespace sectra {

// splitmix64 step. Small, fast, and stable across platforms, which is what
// the determinism contracts need (std::mt19937 distributions are
// implementation-defined).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seeded FNV-1a over the bytes with a final avalanche. Used for token
// hashing, cache keys, and deriving per-item RNG streams. Never use
// std::hash here: its values are not stable across builds.
inline std::uint64_t stable_hash64(std::string_view text, std::uint64_t seed) {
  std::uint64_t s = seed;
  std::uint64_t h = 0xcbf29ce484222325ull ^ splitmix64(s);
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

// Derives an independent stream seed from a base seed and a textual tag, so
// per-item sampling does not depend on processing order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t s = seed;
  return splitmix64(s) ^ stable_hash64(tag, seed + 0x5851f42d4c957f2dull);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased draw in [0, bound). bound must be > 0.
  std::size_t index(std::size_t bound) {
    const std::uint64_t b = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return static_cast<std::size_t>(v % b);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  // Draws k distinct elements from pool, preserving no particular order.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t k) {
    std::vector<T> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && !pool.empty(); ++i) {
      const std::size_t j = index(pool.size());
      out.push_back(std::move(pool[j]));
      pool[j] = std::move(pool.back());
      pool.pop_back();
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace sectra

#endif  // SECTRA_RNG_HPP_
