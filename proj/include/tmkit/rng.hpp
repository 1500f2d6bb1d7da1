#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

// Deterministic seeded randomness. splitmix64 is tiny and its output is
// pinned by the algorithm alone, unlike std::uniform_int_distribution whose
// draws vary across standard libraries. Split membership and random
// demonstration picks must be byte-reproducible from the seed, so every
// sampling decision in the toolkit goes through this generator.

namespace tmkit::rng {

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, n) via rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("below(0)");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

 private:
  uint64_t state_;
};

// Collapses two seeds into one, e.g. a run seed and a record id, so each
// record gets an independent, reproducible stream.
inline uint64_t mix(uint64_t a, uint64_t b) {
  SplitMix64 gen(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
  return gen.next();
}

// Fisher-Yates over indices [0, n); returned order is fully seed-determined.
inline std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  SplitMix64 gen(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(gen.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// First k entries of the seeded shuffle, i.e. a uniform sample without
// replacement. k may not exceed n.
inline std::vector<size_t> sample_indices(size_t n, size_t k, uint64_t seed) {
  if (k > n) throw std::invalid_argument("sample larger than population");
  std::vector<size_t> idx = shuffled_indices(n, seed);
  idx.resize(k);
  return idx;
}

}  // namespace tmkit::rng
