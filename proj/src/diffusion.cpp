#include "igen/diffusion.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "igen/optimizer.hpp"

namespace igen {

ForwardNoise forward_noise(const DiffusionSchedule& sched, const Tensor& x0,
                           int64_t t, Rng& rng) {
  sched.check_step(t);
  ForwardNoise fn;
  fn.eps = Tensor(x0.shape());
  rng.normal_fill(fn.eps.data(), fn.eps.size());
  fn.x_t = forward_noise_given(sched, x0, t, fn.eps);
  return fn;
}

Tensor forward_noise_given(const DiffusionSchedule& sched, const Tensor& x0,
                           int64_t t, const Tensor& eps) {
  sched.check_step(t);
  if (!x0.same_shape(eps)) throw NumericError("forward_noise: shape mismatch");
  double abar = sched.alpha_bar_at(t);
  double signal = std::sqrt(abar);
  double noise = std::sqrt(1.0 - abar);
  Tensor x_t(x0.shape());
  for (int64_t i = 0; i < x0.size(); ++i) {
    x_t[i] = signal * x0[i] + noise * eps[i];
  }
  return x_t;
}

void CompositionSpec::validate() const {
  if (terms.empty()) throw NumericError("composition: needs at least one term");
  if (!(temperature >= 0.0 && temperature < 1.0)) {
    throw NumericError("composition: temperature must be in [0, 1)");
  }
  for (const auto& term : terms) {
    if (!std::isfinite(term.weight)) {
      throw NumericError("composition: non-finite weight");
    }
    check_finite(term.concept_vec, "composition concept");
  }
  check_finite(dummy, "composition dummy");
}

Tensor guided_eps(const DenoiserFn& denoiser, const Tensor& x_t, int64_t t,
                  const CompositionSpec& spec) {
  spec.validate();
  Tensor eps_dummy = denoiser(x_t, spec.dummy, t);
  Tensor out = eps_dummy.clone();
  for (const auto& term : spec.terms) {
    Tensor eps_c = denoiser(x_t, term.concept_vec, t);
    double w = term.weight;
    for (int64_t i = 0; i < out.size(); ++i) {
      out[i] += w * (eps_c[i] - eps_dummy[i]);
    }
  }
  return out;
}

Tensor guided_eps(const MlpDenoiser& model, const Tensor& x_t, int64_t t,
                  const Tensor* s0, const CompositionSpec& spec) {
  return guided_eps(
      [&](const Tensor& x, const Tensor& c, int64_t step) {
        return model.forward(x, c, s0, step);
      },
      x_t, t, spec);
}

Tensor sample(const MlpDenoiser& model, const DiffusionSchedule& sched,
              const CompositionSpec& spec, const Tensor* s0, Rng& rng) {
  spec.validate();
  int64_t width = model.layout().x_width;
  double temp = spec.temperature;
  Tensor x({width});
  double init_scale = std::sqrt(temp);
  for (int64_t i = 0; i < width; ++i) x[i] = init_scale * rng.normal();

  Tensor z({width});
  for (int64_t t = sched.total_steps; t >= 1; --t) {
    Tensor eps_hat = guided_eps(model, x, t, s0, spec);
    double beta = sched.beta_at(t);
    double abar = sched.alpha_bar_at(t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    double eps_coef = beta / std::sqrt(1.0 - abar);
    double sigma = std::sqrt(temp * sched.posterior_var_at(t));
    rng.normal_fill(z.data(), width);
    for (int64_t i = 0; i < width; ++i) {
      double mu = inv_sqrt_alpha * (x[i] - eps_coef * eps_hat[i]);
      x[i] = (t > 1) ? mu + sigma * z[i] : mu;
    }
    if (!x.all_finite()) {
      throw NumericError("sample: non-finite state at step " + std::to_string(t));
    }
  }
  return x;
}

std::vector<Tensor> sample_batch(const MlpDenoiser& model,
                                 const DiffusionSchedule& sched,
                                 const CompositionSpec& spec, const Tensor* s0,
                                 int64_t n, const Rng& rng, Exec exec) {
  std::vector<Tensor> out(static_cast<size_t>(n));
  parallel_for(n, exec, [&](int64_t i) {
    Rng chain = rng.substream(static_cast<uint64_t>(i));
    out[static_cast<size_t>(i)] = sample(model, sched, spec, s0, chain);
  });
  return out;
}

std::vector<Tensor> sample_batch_s0(const MlpDenoiser& model,
                                    const DiffusionSchedule& sched,
                                    const CompositionSpec& spec,
                                    const std::vector<Tensor>& s0s,
                                    const Rng& rng, Exec exec) {
  std::vector<Tensor> out(s0s.size());
  parallel_for(static_cast<int64_t>(s0s.size()), exec, [&](int64_t i) {
    Rng chain = rng.substream(static_cast<uint64_t>(i));
    out[static_cast<size_t>(i)] =
        sample(model, sched, spec, &s0s[static_cast<size_t>(i)], chain);
  });
  return out;
}

TrainLossResult training_loss(const MlpDenoiser& model,
                              const DiffusionSchedule& sched,
                              const std::vector<const TrainRow*>& batch,
                              double p_drop, const Tensor& dummy, Rng& rng,
                              Exec exec) {
  if (batch.empty()) throw NumericError("training_loss: empty batch");
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
    throw NumericError("training_loss: p_drop out of range");
  }
  int64_t rows = static_cast<int64_t>(batch.size());
  const SegmentLayout& layout = model.layout();
  int64_t in = layout.total();
  int64_t out = layout.x_width;

  // All stochastic draws happen here, sequentially, before any parallel work.
  Tensor inputs({rows, in});
  Tensor targets({rows, out});
  int64_t dropped = 0;
  Tensor eps({out});
  for (int64_t r = 0; r < rows; ++r) {
    const TrainRow& row = *batch[static_cast<size_t>(r)];
    int64_t t = rng.uniform_int(1, sched.total_steps);
    rng.normal_fill(eps.data(), out);
    bool drop = rng.bernoulli(p_drop);
    dropped += drop ? 1 : 0;
    Tensor x_t = forward_noise_given(sched, row.x0, t, eps);
    const Tensor& c = drop ? dummy : row.concept_vec;
    model.assemble_row(x_t, c, row.has_s0 ? &row.s0 : nullptr, t,
                       inputs.data() + r * in);
    std::memcpy(targets.data() + r * out, eps.data(),
                sizeof(double) * static_cast<size_t>(out));
  }

  GradRequest req;
  req.params = true;
  BatchLoss bl;
  try {
    bl = mlp_batch_mse(model.net(), inputs, targets, req, exec);
  } catch (const NumericError&) {
    throw NumericError("training_loss: non-finite loss in batch of " +
                       std::to_string(rows) + " rows");
  }

  TrainLossResult result;
  result.loss = bl.loss;
  result.param_grads = std::move(bl.param_grads);
  result.dropped_rows = dropped;
  return result;
}

TrainStats train_denoiser(MlpDenoiser& model, const DiffusionSchedule& sched,
                          const std::vector<TrainRow>& dataset,
                          const Tensor& dummy, const TrainOpts& opts) {
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay});
  Rng rng = make_rng(opts.seed, {"train", "denoiser"});
  TrainStats stats;
  stats.loss_trace.reserve(static_cast<size_t>(opts.steps));

  std::vector<const TrainRow*> batch(static_cast<size_t>(opts.batch_size));
  for (int64_t step = 0; step < opts.steps; ++step) {
    for (auto& slot : batch) {
      slot = &dataset[static_cast<size_t>(
          rng.uniform_below(dataset.size()))];
    }
    TrainLossResult r =
        training_loss(model, sched, batch, opts.p_drop, dummy, rng, opts.exec);
    std::vector<Tensor*> params;
    params.reserve(model.mutable_net().mutable_params().size());
    for (auto& p : model.mutable_net().mutable_params()) params.push_back(&p.value);
    optimizer.step(params, r.param_grads);
    stats.loss_trace.push_back(r.loss);
    if (opts.verbose && opts.log_every > 0 &&
        (step % opts.log_every == 0 || step + 1 == opts.steps)) {
      std::fprintf(stderr, "[train] step %" PRId64 "/%" PRId64 " loss %.6f\n",
                   step, opts.steps, r.loss);
    }
  }
  return stats;
}

}  // namespace igen
