#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

// Exact fuzzy-match-score arithmetic. A score is the rational
// 1 - distance/length kept as its integer parts, so threshold and bucket
// comparisons at decimal boundaries (0.2, 0.4, ...) never suffer binary
// rounding: 1 - 4/5 compared against 0.2 must be an exact tie.

namespace tmkit::fms {

// Non-negative rational; den > 0. Only used for small values, so the
// cross-multiplications below stay far from overflow.
struct Rational {
  long long num = 0;
  long long den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Parses a plain decimal like "0.2", "1", ".75" exactly (num/10^digits).
// Scientific notation and signs are rejected: thresholds and histogram
// inputs are decimal fractions in [0, 1] by contract.
inline Rational parse_decimal(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty decimal");
  long long num = 0;
  long long den = 1;
  bool seen_digit = false;
  bool seen_dot = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("bad decimal: " + std::string(s));
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw std::invalid_argument("bad decimal: " + std::string(s));
    if (num > (1LL << 50)) throw std::invalid_argument("decimal too long: " + std::string(s));
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
    seen_digit = true;
  }
  if (!seen_digit) throw std::invalid_argument("bad decimal: " + std::string(s));
  return {num, den};
}

struct Score {
  int distance = 0;  // word-level edit distance
  int length = 1;    // max token count of the two sides, >= 1

  // Both sides empty normalizes to 0/1 (identical, score 1); the formula's
  // 0/0 case is pinned that way.
  static Score from_counts(int distance, int max_len) {
    if (max_len == 0) return {0, 1};
    return {distance, max_len};
  }

  double value() const {
    return 1.0 - static_cast<double>(distance) / static_cast<double>(length);
  }

  long long matched() const { return length - distance; }  // numerator of the score
};

inline bool score_eq(Score a, Score b) {
  return a.matched() * b.length == b.matched() * a.length;
}

inline bool score_lt(Score a, Score b) {
  return a.matched() * b.length < b.matched() * a.length;
}

// score < r, exactly.
inline bool below(Score s, Rational r) { return s.matched() * r.den < r.num * s.length; }

// Bucket layout shared by histograms and per-bucket reporting:
// [0,0.2) [0.2,0.4) [0.4,0.6) [0.6,0.8) [0.8,1.0], last bucket closed.
inline constexpr int kBucketCount = 5;

inline int bucket_index(Score s) {
  // Largest i with i/5 <= score, capped so 1.0 lands in the last bucket.
  long long m = s.matched();
  int i = static_cast<int>((5 * m) / s.length);
  return i >= kBucketCount ? kBucketCount - 1 : i;
}

inline int bucket_index(Rational r) {
  if (r.num < 0 || r.num > r.den) throw std::invalid_argument("score outside [0,1]");
  long long i = (5 * r.num) / r.den;
  return i >= kBucketCount ? kBucketCount - 1 : static_cast<int>(i);
}

}  // namespace tmkit::fms
