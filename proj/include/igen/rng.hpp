#ifndef IGEN_RNG_HPP_
#define IGEN_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <string_view>

#include "igen/digest.hpp"

namespace igen {

// PCG32 (XSH RR 64/32, O'Neill's published constants). Every stochastic
// call site owns an explicit (seed, stream) pair; there is no global
// generator. Uniform draws use only integer arithmetic and exact f64
// scaling, so sequences replay bit-identically everywhere.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream)
      : state_(0), inc_((stream << 1u) | 1u), seed_id_(seed), stream_id_(stream) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  uint64_t uniform_below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Inclusive range [lo, hi].
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(
                    uniform_below(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, cosine branch. Two uniforms per draw, no cached spare, so
  // the draw count per call is fixed.
  double normal();

  void normal_fill(double* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = normal();
  }

  // Independent generator for parallel work item `i`, derived from this
  // rng's construction identity (not its current position).
  Rng substream(uint64_t i) const {
    return Rng(seed_id_, mix64(stream_id_ ^ mix64(i + 1)));
  }

  uint64_t seed_id() const { return seed_id_; }
  uint64_t stream_id() const { return stream_id_; }

 private:
  uint64_t state_;
  uint64_t inc_;
  uint64_t seed_id_;
  uint64_t stream_id_;
};

// Canonical way to mint a stream from human-readable tags, e.g.
// make_rng(seed, {"gen", "rearrangement", label}).
inline Rng make_rng(uint64_t seed,
                    std::initializer_list<std::string_view> tags) {
  Fnv1a64 h;
  for (auto t : tags) {
    h.update(t);
    h.update("/", 1);
  }
  return Rng(seed, h.value());
}

}  // namespace igen

#endif  // IGEN_RNG_HPP_
