#include "igen/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "igen/digest.hpp"

namespace igen {

Mlp::Mlp(int64_t in_width, std::vector<int64_t> hidden, int64_t out_width) {
  widths_.push_back(in_width);
  for (int64_t h : hidden) widths_.push_back(h);
  widths_.push_back(out_width);
  for (int64_t l = 0; l + 1 < static_cast<int64_t>(widths_.size()); ++l) {
    int64_t in = widths_[static_cast<size_t>(l)];
    int64_t out = widths_[static_cast<size_t>(l + 1)];
    std::string base = "layer" + std::to_string(l);
    params_.push_back({base + ".weight", Tensor({out, in})});
    params_.push_back({base + ".bias", Tensor({out})});
  }
}

Mlp Mlp::he_init(int64_t in_width, std::vector<int64_t> hidden,
                 int64_t out_width, Rng& rng) {
  Mlp net(in_width, std::move(hidden), out_width);
  int64_t layers = net.layer_count();
  for (int64_t l = 0; l < layers; ++l) {
    Tensor& w = net.params_[static_cast<size_t>(2 * l)].value;
    int64_t fan_in = w.extent(1);
    // He scaling for the ReLU layers, plain 1/sqrt(fan_in) for the linear head.
    double std = (l + 1 < layers) ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                  : std::sqrt(1.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
  }
  return net;
}

std::vector<Tensor> Mlp::zero_grads() const {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(Tensor(p.value.shape()));
  return grads;
}

int64_t Mlp::param_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Mlp::Workspace Mlp::make_workspace() const {
  Workspace ws;
  int64_t max_width = 0;
  for (int64_t l = 1; l + 1 < static_cast<int64_t>(widths_.size()); ++l) {
    ws.hidden.emplace_back(static_cast<size_t>(widths_[static_cast<size_t>(l)]));
  }
  for (int64_t w : widths_) max_width = std::max(max_width, w);
  ws.delta_a.resize(static_cast<size_t>(max_width));
  ws.delta_b.resize(static_cast<size_t>(max_width));
  return ws;
}

namespace {

inline void linear_forward(const double* w, const double* b, const double* x,
                           double* y, int64_t out, int64_t in) {
  // Four fixed-order accumulator lanes; the reduction order never depends
  // on alignment or thread count, so results are bit-stable.
  int64_t in4 = in & ~int64_t{3};
  for (int64_t i = 0; i < out; ++i) {
    const double* row = w + i * in;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (int64_t j = 0; j < in4; j += 4) {
      a0 += row[j] * x[j];
      a1 += row[j + 1] * x[j + 1];
      a2 += row[j + 2] * x[j + 2];
      a3 += row[j + 3] * x[j + 3];
    }
    double acc = b[i] + ((a0 + a1) + (a2 + a3));
    for (int64_t j = in4; j < in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

inline void relu_inplace(double* v, int64_t n) {
  for (int64_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

}  // namespace

void Mlp::forward_row(const double* x, double* y, Workspace& ws) const {
  int64_t layers = layer_count();
  const double* cur = x;
  for (int64_t l = 0; l < layers; ++l) {
    int64_t in = widths_[static_cast<size_t>(l)];
    int64_t out = widths_[static_cast<size_t>(l + 1)];
    double* dst = (l + 1 == layers) ? y : ws.hidden[static_cast<size_t>(l)].data();
    linear_forward(weight(l).data(), bias(l).data(), cur, dst, out, in);
    if (l + 1 != layers) {
      relu_inplace(dst, out);
      cur = dst;
    }
  }
}

void Mlp::backward_row(const double* x, const double* upstream,
                       std::vector<Tensor>* param_grads, double* x_grad,
                       Workspace& ws) const {
  int64_t layers = layer_count();
  double* g = ws.delta_a.data();
  double* g_prev = ws.delta_b.data();
  std::memcpy(g, upstream, sizeof(double) * static_cast<size_t>(out_width()));

  for (int64_t l = layers - 1; l >= 0; --l) {
    int64_t in = widths_[static_cast<size_t>(l)];
    int64_t out = widths_[static_cast<size_t>(l + 1)];
    const double* h_prev = (l == 0) ? x : ws.hidden[static_cast<size_t>(l - 1)].data();

    if (param_grads != nullptr) {
      Tensor& dw = (*param_grads)[static_cast<size_t>(2 * l)];
      Tensor& db = (*param_grads)[static_cast<size_t>(2 * l + 1)];
      for (int64_t i = 0; i < out; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        double* dwrow = dw.data() + i * in;
        for (int64_t j = 0; j < in; ++j) dwrow[j] += gi * h_prev[j];
        db[i] += gi;
      }
    }

    bool need_input = (l > 0) || (x_grad != nullptr);
    if (!need_input) break;

    const double* w = weight(l).data();
    std::memset(g_prev, 0, sizeof(double) * static_cast<size_t>(in));
    for (int64_t i = 0; i < out; ++i) {
      double gi = g[i];
      if (gi == 0.0) continue;
      const double* wrow = w + i * in;
      for (int64_t j = 0; j < in; ++j) g_prev[j] += gi * wrow[j];
    }
    if (l > 0) {
      // ReLU mask from the stored post-activation: h > 0 iff preact > 0.
      const double* h = ws.hidden[static_cast<size_t>(l - 1)].data();
      for (int64_t j = 0; j < in; ++j) {
        if (h[j] <= 0.0) g_prev[j] = 0.0;
      }
    }
    std::swap(g, g_prev);
  }
  if (x_grad != nullptr) {
    std::memcpy(x_grad, g, sizeof(double) * static_cast<size_t>(in_width()));
  }
}

Tensor mlp_batch_forward(const Mlp& net, const Tensor& inputs, Exec exec) {
  if (inputs.rank() != 2 || inputs.extent(1) != net.in_width()) {
    throw NumericError("mlp_batch_forward: input shape mismatch");
  }
  int64_t rows = inputs.extent(0);
  int64_t in = net.in_width();
  int64_t out = net.out_width();
  Tensor outputs({rows, out});
  int64_t nblocks = reduce_block_count(rows);
  parallel_for(nblocks, exec, [&](int64_t b) {
    Mlp::Workspace ws = net.make_workspace();
    int64_t lo = b * kReduceBlockRows;
    int64_t hi = std::min(rows, lo + kReduceBlockRows);
    for (int64_t r = lo; r < hi; ++r) {
      net.forward_row(inputs.data() + r * in, outputs.data() + r * out, ws);
    }
  });
  return outputs;
}

BatchLoss mlp_batch_mse(const Mlp& net, const Tensor& inputs,
                        const Tensor& targets, GradRequest req, Exec exec) {
  if (inputs.rank() != 2 || targets.rank() != 2 ||
      inputs.extent(0) != targets.extent(0) ||
      inputs.extent(1) != net.in_width() ||
      targets.extent(1) != net.out_width()) {
    throw NumericError("mlp_batch_mse: shape mismatch");
  }
  int64_t rows = inputs.extent(0);
  int64_t in = net.in_width();
  int64_t out = net.out_width();
  int64_t nblocks = reduce_block_count(rows);
  double inv_n = 1.0 / static_cast<double>(rows * out);

  BatchLoss result;
  result.rows = rows;
  if (req.input) result.input_grads = Tensor({rows, in});

  std::vector<double> block_loss(static_cast<size_t>(nblocks), 0.0);
  std::vector<std::vector<Tensor>> block_grads;
  if (req.params) {
    block_grads.resize(static_cast<size_t>(nblocks));
    for (auto& g : block_grads) g = net.zero_grads();
  }

  parallel_for(nblocks, exec, [&](int64_t b) {
    Mlp::Workspace ws = net.make_workspace();
    std::vector<double> y(static_cast<size_t>(out));
    std::vector<double> up(static_cast<size_t>(out));
    int64_t lo = b * kReduceBlockRows;
    int64_t hi = std::min(rows, lo + kReduceBlockRows);
    double loss_acc = 0.0;
    for (int64_t r = lo; r < hi; ++r) {
      const double* x = inputs.data() + r * in;
      const double* t = targets.data() + r * out;
      net.forward_row(x, y.data(), ws);
      for (int64_t i = 0; i < out; ++i) {
        double d = y[i] - t[i];
        loss_acc += d * d;
        up[i] = 2.0 * d * inv_n;
      }
      bool need_back = req.params || req.input;
      if (need_back) {
        net.backward_row(x, up.data(),
                         req.params ? &block_grads[static_cast<size_t>(b)] : nullptr,
                         req.input ? result.input_grads.data() + r * in : nullptr,
                         ws);
      }
    }
    block_loss[static_cast<size_t>(b)] = loss_acc;
  });

  double loss = 0.0;
  for (double l : block_loss) loss += l;
  result.loss = loss * inv_n;

  if (req.params) {
    result.param_grads = std::move(block_grads[0]);
    for (int64_t b = 1; b < nblocks; ++b) {
      for (size_t p = 0; p < result.param_grads.size(); ++p) {
        result.param_grads[p].add(block_grads[static_cast<size_t>(b)][p]);
      }
    }
  }
  if (!std::isfinite(result.loss)) {
    throw NumericError("mlp_batch_mse: non-finite loss");
  }
  return result;
}

Tensor time_embed(int64_t t, int64_t dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw NumericError("time_embed: dim must be even and positive");
  }
  if (t < 0) throw NumericError("time_embed: negative step index");
  Tensor e({dim});
  int64_t half = dim / 2;
  for (int64_t i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                        static_cast<double>(dim));
    double phase = static_cast<double>(t) * freq;
    e[2 * i] = std::sin(phase);
    e[2 * i + 1] = std::cos(phase);
  }
  return e;
}

MlpDenoiser::MlpDenoiser(SegmentLayout layout, std::vector<int64_t> hidden)
    : layout_(layout),
      hidden_(hidden),
      net_(layout.total(), std::move(hidden), layout.x_width) {}

MlpDenoiser MlpDenoiser::random_init(SegmentLayout layout,
                                     std::vector<int64_t> hidden, Rng& rng) {
  MlpDenoiser d(layout, hidden);
  d.net_ = Mlp::he_init(layout.total(), std::move(hidden), layout.x_width, rng);
  return d;
}

void MlpDenoiser::assemble_row(const Tensor& x_t, const Tensor& concept_vec,
                               const Tensor* s0, int64_t t, double* row) const {
  std::memcpy(row + layout_.x_offset(), x_t.data(),
              sizeof(double) * static_cast<size_t>(layout_.x_width));
  std::memcpy(row + layout_.concept_offset(), concept_vec.data(),
              sizeof(double) * static_cast<size_t>(layout_.concept_width));
  if (layout_.has_s0()) {
    std::memcpy(row + layout_.s0_offset(), s0->data(),
                sizeof(double) * static_cast<size_t>(layout_.s0_width));
  }
  Tensor emb = time_embed(t, layout_.time_width);
  std::memcpy(row + layout_.time_offset(), emb.data(),
              sizeof(double) * static_cast<size_t>(layout_.time_width));
}

Tensor MlpDenoiser::forward(const Tensor& x_t, const Tensor& concept_vec,
                            const Tensor* s0, int64_t t) const {
  if (x_t.size() != layout_.x_width) {
    throw NumericError("denoiser: x_t width mismatch");
  }
  if (concept_vec.size() != layout_.concept_width) {
    throw NumericError("denoiser: concept width mismatch");
  }
  if (layout_.has_s0()) {
    if (s0 == nullptr || s0->size() != layout_.s0_width) {
      throw NumericError("denoiser: s0 width mismatch");
    }
    check_finite(*s0, "denoiser s0");
  }
  check_finite(x_t, "denoiser x_t");
  check_finite(concept_vec, "denoiser concept");

  std::vector<double> row(static_cast<size_t>(layout_.total()));
  assemble_row(x_t, concept_vec, s0, t, row.data());
  Tensor y(x_t.shape());
  Mlp::Workspace ws = net_.make_workspace();
  net_.forward_row(row.data(), y.data(), ws);
  return y;
}

uint64_t MlpDenoiser::param_digest() const {
  Fnv1a64 h;
  for (const auto& p : net_.params()) {
    h.update(p.name);
    h.update(p.value.data(),
             sizeof(double) * static_cast<size_t>(p.value.size()));
  }
  return h.value();
}

}  // namespace igen
