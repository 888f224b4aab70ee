#ifndef IGEN_BASELINES_HPP_
#define IGEN_BASELINES_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "igen/checkpoint.hpp"
#include "igen/mlp.hpp"
#include "igen/parallel.hpp"
#include "igen/rng.hpp"
#include "igen/tensor.hpp"

namespace igen {

// Goal-conditioned next-state predictor: one hidden ReLU layer. With
// state_dim 0 the condition alone maps to the full output (horizon-1
// domains).
struct BcModel {
  int64_t cond_dim = 0;
  int64_t state_dim = 0;
  int64_t out_dim = 0;
  Mlp net;

  static BcModel random_init(int64_t cond_dim, int64_t state_dim,
                             int64_t out_dim, int64_t hidden, Rng& rng);
  Tensor forward(const Tensor& cond, const Tensor* state) const;
  uint64_t param_digest() const;
};

// One supervised pair: condition plus optional state input, next output.
struct BcPair {
  Tensor cond;
  Tensor state;
  bool has_state = false;
  Tensor next;
};

struct BcTrainOpts {
  int64_t steps = 6000;
  int64_t batch = 64;
  double lr = 6e-4;
  uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

std::vector<double> bc_train(BcModel& model, const std::vector<BcPair>& data,
                             const BcTrainOpts& opts);

struct BcInvertOpts {
  int64_t steps = 2000;
  double lr = 1e-2;
  uint64_t seed = 0;
  std::string stream_tag = "bc-invert";
  Exec exec = Exec::Parallel;
};

struct BcInversion {
  Tensor condition;
  std::vector<double> loss_trace;
};

// Freezes the net and optimizes the condition vector against next-state
// MSE on the demo transitions.
BcInversion bc_invert_condition(const BcModel& model,
                                const std::vector<BcPair>& demo_pairs,
                                const BcInvertOpts& opts);

// Conditional VAE: MLP encoder to (mu, logvar), MLP decoder from
// (latent, s0) back to the trajectory.
struct CvaeModel {
  int64_t x_dim = 0;
  int64_t s0_dim = 0;  // 0 when unconditioned
  int64_t latent_dim = 0;
  Mlp encoder;  // x -> 2 * latent
  Mlp decoder;  // latent + s0 -> x

  static CvaeModel random_init(int64_t x_dim, int64_t s0_dim,
                               int64_t latent_dim, int64_t hidden, Rng& rng);

  struct Encoded {
    Tensor mu;
    Tensor logvar;
  };
  Encoded encode(const Tensor& x) const;
  Tensor decode(const Tensor& z, const Tensor* s0) const;
  uint64_t param_digest() const;
};

struct CvaeRow {
  Tensor x;
  Tensor s0;
  bool has_s0 = false;
};

struct CvaeTrainOpts {
  int64_t steps = 8000;
  int64_t batch = 64;
  double lr = 6e-4;
  double kl_weight = 1.0;
  uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct CvaeTrainStats {
  std::vector<double> loss_trace;
  double final_mean_kl = 0.0;
  bool kl_collapsed = false;  // flagged when mean KL < 1e-3
};

// ELBO: reconstruction MSE (summed over coordinates) plus weighted KL to
// the unit-variance prior, averaged over the batch.
CvaeTrainStats cvae_train(CvaeModel& model, const std::vector<CvaeRow>& data,
                          const CvaeTrainOpts& opts);

// Decoder pass with N(0, sigma^2) noise added to z.
Tensor cvae_generate(const CvaeModel& model, const Tensor& z, const Tensor* s0,
                     double noise_sigma, Rng& rng);

struct CvaeInvertOpts {
  int64_t steps = 2000;
  double lr = 1e-2;
  uint64_t seed = 0;
  std::string stream_tag = "cvae-invert";
  Exec exec = Exec::Parallel;
};

struct CvaeInversion {
  Tensor z;
  std::vector<double> loss_trace;
};

// Freezes the decoder and optimizes z by reconstruction MSE on the demos.
CvaeInversion cvae_invert_latent(const CvaeModel& model,
                                 const std::vector<CvaeRow>& demos,
                                 const CvaeInvertOpts& opts);

Checkpoint pack_bc(const BcModel& model, const ConceptVocabulary& vocab,
                   const std::string& domain);
BcModel unpack_bc(const Checkpoint& ckpt);
Checkpoint pack_cvae(const CvaeModel& model, const std::string& domain);
CvaeModel unpack_cvae(const Checkpoint& ckpt);

}  // namespace igen

#endif  // IGEN_BASELINES_HPP_
