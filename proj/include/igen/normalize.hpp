#ifndef IGEN_NORMALIZE_HPP_
#define IGEN_NORMALIZE_HPP_

#include "igen/tensor.hpp"

namespace igen {

// Fixed per-coordinate affine map into roughly [-1, 1], derived from the
// domain's declared bounds (never from data), so checkpoints need no
// dataset statistics. normalized = raw * a + b.
struct Normalizer {
  Tensor a;
  Tensor b;

  Tensor normalize(const Tensor& raw) const {
    Tensor out(raw.shape());
    for (int64_t i = 0; i < raw.size(); ++i) out[i] = raw[i] * a[i] + b[i];
    return out;
  }
  Tensor denormalize(const Tensor& norm) const {
    Tensor out(norm.shape());
    for (int64_t i = 0; i < norm.size(); ++i) out[i] = (norm[i] - b[i]) / a[i];
    return out;
  }

  static Normalizer identity(int64_t width) {
    Normalizer n{Tensor({width}), Tensor({width})};
    n.a.fill(1.0);
    return n;
  }
};

// Maps [lo, hi] to [-1, 1] on the given index range.
void set_range(Normalizer& n, int64_t begin, int64_t end, double lo, double hi);

Normalizer rearrange_normalizer();
Normalizer nav2d_state_normalizer();
Normalizer nav2d_traj_normalizer();

}  // namespace igen

#endif  // IGEN_NORMALIZE_HPP_
