#ifndef IGEN_SCHEDULE_HPP_
#define IGEN_SCHEDULE_HPP_

#include <cstdint>
#include <vector>

#include "igen/error.hpp"

namespace igen {

// Variance schedule tables. Index convention: step t in [1, T] maps to
// table index t-1. alpha_bar is the running product of (1 - beta) and
// posterior_var is the closed-form reverse-step variance
// (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t (zero at t = 1).
struct DiffusionSchedule {
  int64_t total_steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_var;

  static DiffusionSchedule linear(int64_t steps, double beta_start,
                                  double beta_end);
  static DiffusionSchedule from_beta(std::vector<double> beta);

  double beta_at(int64_t t) const { return beta[static_cast<size_t>(t - 1)]; }
  double alpha_bar_at(int64_t t) const {
    return alpha_bar[static_cast<size_t>(t - 1)];
  }
  double posterior_var_at(int64_t t) const {
    return posterior_var[static_cast<size_t>(t - 1)];
  }

  void check_step(int64_t t) const {
    if (t < 1 || t > total_steps) {
      throw NumericError("diffusion step out of range");
    }
  }

  // Enforces the table invariants; throws NumericError on violation.
  void validate() const;
};

// Default config: 100 steps, beta linear 1e-4 .. 8.5e-2. Short chains need
// the steeper ramp to still destroy the signal (alpha_bar_T ~ 0.013).
inline DiffusionSchedule default_schedule() {
  return DiffusionSchedule::linear(100, 1e-4, 8.5e-2);
}

}  // namespace igen

#endif  // IGEN_SCHEDULE_HPP_
