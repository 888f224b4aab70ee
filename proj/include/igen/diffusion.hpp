#ifndef IGEN_DIFFUSION_HPP_
#define IGEN_DIFFUSION_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "igen/mlp.hpp"
#include "igen/parallel.hpp"
#include "igen/rng.hpp"
#include "igen/schedule.hpp"
#include "igen/tensor.hpp"

namespace igen {

struct ForwardNoise {
  Tensor x_t;
  Tensor eps;
};

// q(x_t | x_0): x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, eps ~ N(0, I).
// The drawn eps is returned so callers can form the noise-prediction loss.
ForwardNoise forward_noise(const DiffusionSchedule& sched, const Tensor& x0,
                           int64_t t, Rng& rng);

// Same map with a caller-supplied eps (test hook and training internals).
Tensor forward_noise_given(const DiffusionSchedule& sched, const Tensor& x0,
                           int64_t t, const Tensor& eps);

struct CompositionTerm {
  Tensor concept_vec;
  double weight = 1.0;
};

// Everything the sampler needs at generation time: the weighted concept
// terms, the dummy (unconditional) concept, and the low-temperature scale
// applied to the initial noise and the reverse-step variance.
struct CompositionSpec {
  std::vector<CompositionTerm> terms;
  Tensor dummy;
  double temperature = 0.5;

  void validate() const;
};

using DenoiserFn =
    std::function<Tensor(const Tensor& x_t, const Tensor& concept_vec, int64_t t)>;

// Composed noise prediction:
//   eps_hat = eps(dummy) + sum_k w_k * (eps(c_k) - eps(dummy))
// evaluated with exactly one unconditional call and one call per term, in
// term order. With a single term this is literally the two-call
// classifier-free guidance formula.
Tensor guided_eps(const DenoiserFn& denoiser, const Tensor& x_t, int64_t t,
                  const CompositionSpec& spec);

Tensor guided_eps(const MlpDenoiser& model, const Tensor& x_t, int64_t t,
                  const Tensor* s0, const CompositionSpec& spec);

struct SampleOpts {
  // When false the reverse chain consumes no rng at all; equivalent to
  // temperature 0 plus a zero x_T.
  bool deterministic_probe = false;
};

// Reverse process from x_T ~ N(0, temperature * I) down to x_0, using the
// fixed posterior variance scaled by the temperature. Aborts with
// NumericError (reporting the step) if the chain leaves the finite range.
Tensor sample(const MlpDenoiser& model, const DiffusionSchedule& sched,
              const CompositionSpec& spec, const Tensor* s0, Rng& rng);

// n independent chains; chain i draws from rng.substream(i). Parallel
// across chains, bit-identical to the serial path.
std::vector<Tensor> sample_batch(const MlpDenoiser& model,
                                 const DiffusionSchedule& sched,
                                 const CompositionSpec& spec, const Tensor* s0,
                                 int64_t n, const Rng& rng, Exec exec);

// Like sample_batch but with a per-chain initial state.
std::vector<Tensor> sample_batch_s0(const MlpDenoiser& model,
                                    const DiffusionSchedule& sched,
                                    const CompositionSpec& spec,
                                    const std::vector<Tensor>& s0s,
                                    const Rng& rng, Exec exec);

// One pretraining example: clean signal x0, its concept embedding, and the
// optional initial-state conditioning.
struct TrainRow {
  Tensor x0;
  Tensor concept_vec;
  Tensor s0;
  bool has_s0 = false;
};

struct TrainLossResult {
  double loss = 0.0;
  std::vector<Tensor> param_grads;
  int64_t dropped_rows = 0;  // rows whose concept was replaced by the dummy
};

// Denoising objective with conditioning dropout: per row draw
// t ~ U{1..T}, eps ~ N(0,I), gamma ~ Bern(p_drop); gamma = 1 swaps the
// concept for the dummy. Returns the mean squared noise-prediction error
// and its parameter gradients. All stochastic draws happen sequentially
// up front so Exec never changes the result.
TrainLossResult training_loss(const MlpDenoiser& model,
                              const DiffusionSchedule& sched,
                              const std::vector<const TrainRow*>& batch,
                              double p_drop, const Tensor& dummy, Rng& rng,
                              Exec exec);

struct TrainOpts {
  int64_t steps = 20000;
  int64_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double p_drop = 0.1;
  uint64_t seed = 0;
  Exec exec = Exec::Parallel;
  int64_t log_every = 500;
  bool verbose = false;
};

struct TrainStats {
  std::vector<double> loss_trace;  // one entry per step
};

// AdamW training loop over uniformly resampled minibatches.
TrainStats train_denoiser(MlpDenoiser& model, const DiffusionSchedule& sched,
                          const std::vector<TrainRow>& dataset,
                          const Tensor& dummy, const TrainOpts& opts);

}  // namespace igen

#endif  // IGEN_DIFFUSION_HPP_
