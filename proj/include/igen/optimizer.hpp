#ifndef IGEN_OPTIMIZER_HPP_
#define IGEN_OPTIMIZER_HPP_

#include <cstdint>
#include <vector>

#include "igen/tensor.hpp"

namespace igen {

// AdamW with decoupled weight decay. Decay defaults to zero, in which case
// the update is plain Adam.
class AdamW {
 public:
  struct Opts {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;
  explicit AdamW(Opts opts) : opts_(opts) {}

  // params and grads must keep the same shapes across calls; state is
  // allocated lazily on the first step.
  void step(std::vector<Tensor*> params, const std::vector<Tensor>& grads);

  const Opts& opts() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }
  int64_t step_count() const { return step_count_; }

 private:
  Opts opts_;
  int64_t step_count_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace igen

#endif  // IGEN_OPTIMIZER_HPP_
