#include "igen/optimizer.hpp"

#include <cmath>

namespace igen {

void AdamW::step(std::vector<Tensor*> params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw NumericError("AdamW: param/grad count mismatch");
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(Tensor(p->shape()));
      v_.push_back(Tensor(p->shape()));
    }
  }
  ++step_count_;
  double t = static_cast<double>(step_count_);
  double bc1 = 1.0 - std::pow(opts_.beta1, t);
  double bc2 = 1.0 - std::pow(opts_.beta2, t);

  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& x = *params[p];
    const Tensor& g = grads[p];
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (int64_t i = 0; i < x.size(); ++i) {
      double gi = g[i];
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi;
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      x[i] -= opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                          opts_.weight_decay * x[i]);
    }
  }
}

}  // namespace igen
