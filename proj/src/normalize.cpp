#include "igen/normalize.hpp"

#include <cmath>

#include "igen/nav2d.hpp"
#include "igen/rearrange.hpp"

namespace igen {

void set_range(Normalizer& n, int64_t begin, int64_t end, double lo, double hi) {
  double a = 2.0 / (hi - lo);
  double b = -(hi + lo) / (hi - lo);
  for (int64_t i = begin; i < end; ++i) {
    n.a[i] = a;
    n.b[i] = b;
  }
}

Normalizer rearrange_normalizer() {
  Normalizer n = Normalizer::identity(Scene::kFlatWidth);
  for (int slot = 0; slot < 3; ++slot) {
    int64_t base = 7 * slot;
    set_range(n, base + 0, base + 2, 0.0, 5.0);          // x, y
    set_range(n, base + 2, base + 3, 0.3, 1.0);          // radius
    set_range(n, base + 3, base + 4, 0.0, 2.0 * M_PI);   // angle
    set_range(n, base + 4, base + 7, 0.0, 1.0);          // one-hot
  }
  return n;
}

Normalizer nav2d_state_normalizer() {
  Normalizer n = Normalizer::identity(Nav2dEpisode::kStateWidth);
  set_range(n, 0, 2, 0.0, 5.0);  // agent
  for (int obj = 0; obj < 2; ++obj) {
    int64_t base = 2 + 10 * obj;
    set_range(n, base + 0, base + 2, 0.0, 5.0);   // position
    set_range(n, base + 2, base + 10, 0.0, 1.0);  // color + shape one-hots
  }
  return n;
}

Normalizer nav2d_traj_normalizer() {
  Normalizer n = Normalizer::identity(Nav2dEpisode::kTrajWidth);
  set_range(n, 0, Nav2dEpisode::kTrajWidth, 0.0, 5.0);
  return n;
}

}  // namespace igen
