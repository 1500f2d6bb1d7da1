#pragma once

#include <cstdint>
#include <string>
#include <string_view>

// FNV-1a 64-bit fingerprints. Used for corpus/index integrity checks and for
// naming experiment runs by configuration; not cryptographic.

namespace tmkit::hash {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

struct Fnv1a {
  uint64_t state = kFnvOffset;

  void update(std::string_view bytes) {
    for (unsigned char b : bytes) {
      state ^= b;
      state *= kFnvPrime;
    }
  }
  // Length-prefixes each field so ("ab","c") and ("a","bc") differ.
  void update_field(std::string_view bytes) {
    update_u64(bytes.size());
    update(bytes);
  }
  void update_u64(uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    update(std::string_view(buf, 8));
  }
  uint64_t digest() const { return state; }
};

inline uint64_t fnv1a(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.digest();
}

inline std::string to_hex(uint64_t v) {
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline uint64_t parse_hex(std::string_view s) {
  uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<uint64_t>(c - 'A' + 10);
  }
  return v;
}

}  // namespace tmkit::hash
