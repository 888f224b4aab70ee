#ifndef IGEN_DIGEST_HPP_
#define IGEN_DIGEST_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace igen {

// 64-bit FNV-1a. Used for content digests and for deriving rng streams
// from string tags. Not cryptographic.
class Fnv1a64 {
 public:
  static constexpr uint64_t kOffset = 1469598103934665603ull;
  static constexpr uint64_t kPrime = 1099511628211ull;

  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= kPrime;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  uint64_t value() const { return state_; }

 private:
  uint64_t state_ = kOffset;
};

inline uint64_t fnv1a64(std::string_view s) {
  Fnv1a64 h;
  h.update(s);
  return h.value();
}

inline uint64_t fnv1a64(const void* data, size_t n) {
  Fnv1a64 h;
  h.update(data, n);
  return h.value();
}

// splitmix64 finalizer; mixes ids into well-spread stream identifiers.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace igen

#endif  // IGEN_DIGEST_HPP_
