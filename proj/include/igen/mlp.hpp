#ifndef IGEN_MLP_HPP_
#define IGEN_MLP_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "igen/parallel.hpp"
#include "igen/rng.hpp"
#include "igen/tensor.hpp"

namespace igen {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Fully-connected net, ReLU between linear layers, linear output. Forward
// and reverse passes are hand-rolled so gradients are exact for both
// parameters and inputs (the input path drives concept optimization).
class Mlp {
 public:
  Mlp() = default;
  Mlp(int64_t in_width, std::vector<int64_t> hidden, int64_t out_width);

  static Mlp he_init(int64_t in_width, std::vector<int64_t> hidden,
                     int64_t out_width, Rng& rng);

  int64_t in_width() const { return widths_.front(); }
  int64_t out_width() const { return widths_.back(); }
  const std::vector<int64_t>& widths() const { return widths_; }
  int64_t layer_count() const {
    return static_cast<int64_t>(widths_.size()) - 1;
  }

  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<NamedTensor>& mutable_params() { return params_; }
  std::vector<Tensor> zero_grads() const;
  int64_t param_count() const;

  // Per-row scratch: post-ReLU hidden activations plus two delta buffers.
  struct Workspace {
    std::vector<std::vector<double>> hidden;
    std::vector<double> delta_a;
    std::vector<double> delta_b;
  };
  Workspace make_workspace() const;

  void forward_row(const double* x, double* y, Workspace& ws) const;

  // upstream is dL/dy for the row previously run through forward_row with
  // this workspace. Accumulates into param_grads when non-null and writes
  // dL/dx into x_grad when non-null.
  void backward_row(const double* x, const double* upstream,
                    std::vector<Tensor>* param_grads, double* x_grad,
                    Workspace& ws) const;

 private:
  const Tensor& weight(int64_t layer) const {
    return params_[static_cast<size_t>(2 * layer)].value;
  }
  const Tensor& bias(int64_t layer) const {
    return params_[static_cast<size_t>(2 * layer + 1)].value;
  }

  std::vector<int64_t> widths_;
  std::vector<NamedTensor> params_;  // layerN.weight {out,in}, layerN.bias {out}
};

struct GradRequest {
  bool params = false;
  bool input = false;
};

struct BatchLoss {
  double loss = 0.0;               // mean squared error over rows * out dims
  std::vector<Tensor> param_grads;  // same order as Mlp::params()
  Tensor input_grads;               // {rows, in_width} when requested
  int64_t rows = 0;
};

// inputs {rows, in}, outputs {rows, out}. Rows are independent, so the
// parallel path is a plain row split.
Tensor mlp_batch_forward(const Mlp& net, const Tensor& inputs, Exec exec);

// Mean squared error against targets plus requested gradients. Gradient
// and loss accumulation use the fixed-block reduction from parallel.hpp:
// Serial and Parallel agree bitwise.
BatchLoss mlp_batch_mse(const Mlp& net, const Tensor& inputs,
                        const Tensor& targets, GradRequest req, Exec exec);

// Sinusoidal features of the diffusion step index: [sin(t*w_0), cos(t*w_0),
// sin(t*w_1), ...] with geometrically spaced frequencies. dim must be even
// and positive; t must be >= 0 (t = 0 is a reserved probe value).
Tensor time_embed(int64_t t, int64_t dim);

struct SegmentLayout {
  int64_t x_width = 0;
  int64_t concept_width = 0;
  int64_t s0_width = 0;  // 0 when the domain has no initial-state conditioning
  int64_t time_width = 0;

  int64_t total() const { return x_width + concept_width + s0_width + time_width; }
  int64_t x_offset() const { return 0; }
  int64_t concept_offset() const { return x_width; }
  int64_t s0_offset() const { return x_width + concept_width; }
  int64_t time_offset() const { return x_width + concept_width + s0_width; }
  bool has_s0() const { return s0_width > 0; }
};

// Noise-prediction network. Input rows are x_t | concept | s0 | time
// embedding; output has the width of x_t. Parameters are owned here and
// treated as immutable by everything except the trainer.
class MlpDenoiser {
 public:
  MlpDenoiser() = default;
  MlpDenoiser(SegmentLayout layout, std::vector<int64_t> hidden);

  static MlpDenoiser random_init(SegmentLayout layout,
                                 std::vector<int64_t> hidden, Rng& rng);

  const SegmentLayout& layout() const { return layout_; }
  const std::vector<int64_t>& hidden() const { return hidden_; }
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }

  // Writes one assembled input row (layout().total() wide).
  void assemble_row(const Tensor& x_t, const Tensor& concept_vec,
                    const Tensor* s0, int64_t t, double* row) const;

  // Predicted noise, shaped like x_t. Pure in inputs and parameters.
  Tensor forward(const Tensor& x_t, const Tensor& concept_vec,
                 const Tensor* s0, int64_t t) const;

  // FNV-1a over parameter names and raw little-endian payloads, in order.
  uint64_t param_digest() const;

 private:
  SegmentLayout layout_;
  std::vector<int64_t> hidden_;
  Mlp net_;
};

}  // namespace igen

#endif  // IGEN_MLP_HPP_
