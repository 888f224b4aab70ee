#include "igen/schedule.hpp"

#include <cmath>

namespace igen {

DiffusionSchedule DiffusionSchedule::linear(int64_t steps, double beta_start,
                                            double beta_end) {
  if (steps < 1) throw ConfigError("schedule: steps must be >= 1");
  std::vector<double> beta(static_cast<size_t>(steps));
  for (int64_t i = 0; i < steps; ++i) {
    double f = steps == 1 ? 0.0
                          : static_cast<double>(i) / static_cast<double>(steps - 1);
    beta[static_cast<size_t>(i)] = beta_start + f * (beta_end - beta_start);
  }
  return from_beta(std::move(beta));
}

DiffusionSchedule DiffusionSchedule::from_beta(std::vector<double> beta) {
  DiffusionSchedule s;
  s.total_steps = static_cast<int64_t>(beta.size());
  s.beta = std::move(beta);
  s.alpha_bar.resize(s.beta.size());
  s.posterior_var.resize(s.beta.size());
  double prod = 1.0;
  double prev_bar = 1.0;  // alpha_bar_0 := 1
  for (size_t i = 0; i < s.beta.size(); ++i) {
    prod *= 1.0 - s.beta[i];
    s.alpha_bar[i] = prod;
    s.posterior_var[i] = (1.0 - prev_bar) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    prev_bar = prod;
  }
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (total_steps < 1) throw NumericError("schedule: empty");
  double prod = 1.0;
  double prev_beta = 0.0;
  double prev_bar = 1.0;
  for (int64_t t = 1; t <= total_steps; ++t) {
    double b = beta_at(t);
    if (!(b > 0.0 && b < 1.0)) throw NumericError("schedule: beta out of (0,1)");
    if (b < prev_beta) throw NumericError("schedule: beta must be nondecreasing");
    prev_beta = b;
    prod *= 1.0 - b;
    if (std::fabs(prod - alpha_bar_at(t)) > 1e-12) {
      throw NumericError("schedule: alpha_bar product identity violated");
    }
    if (alpha_bar_at(t) >= prev_bar) {
      throw NumericError("schedule: alpha_bar must be strictly decreasing");
    }
    prev_bar = alpha_bar_at(t);
  }
}

}  // namespace igen
