#ifndef IGEN_CONCEPT_SPACE_HPP_
#define IGEN_CONCEPT_SPACE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "igen/diffusion.hpp"
#include "igen/mlp.hpp"
#include "igen/parallel.hpp"
#include "igen/rng.hpp"
#include "igen/schedule.hpp"
#include "igen/tensor.hpp"

namespace igen {

// Training-concept embeddings: one deterministic U([0,1]^n) draw per label,
// keyed by (embedding seed, label). The empty label is reserved for the
// dummy (unconditional) concept.
class ConceptVocabulary {
 public:
  ConceptVocabulary() = default;

  static ConceptVocabulary build(const std::vector<std::string>& labels,
                                 int64_t dim, uint64_t embed_seed);

  const Tensor& embed(const std::string& label) const;
  const Tensor& dummy() const { return dummy_; }
  bool contains(const std::string& label) const {
    return vectors_.count(label) > 0;
  }
  std::vector<std::string> labels() const;
  int64_t dim() const { return dim_; }
  uint64_t embed_seed() const { return embed_seed_; }

 private:
  std::map<std::string, Tensor> vectors_;
  Tensor dummy_;
  int64_t dim_ = 0;
  uint64_t embed_seed_ = 0;
};

// One unlabeled demonstration: the clean signal (a single state or a
// flattened trajectory) plus optional initial-state conditioning.
struct Demo {
  Tensor x0;
  Tensor s0;
  bool has_s0 = false;
};

struct InversionOpts {
  int64_t k = 1;
  int64_t steps = 2000;
  double lr = 1e-2;
  int64_t noise_per_demo = 16;
  bool learn_weights = true;
  double fixed_weight = 1.0;    // used when learn_weights is false
  double weight_reg = 0.0;      // optional L2 pull of weights toward 1
  uint64_t seed = 0;
  std::string stream_tag = "invert";
  Exec exec = Exec::Parallel;
};

struct InversionResult {
  std::vector<Tensor> components;  // K learned concept vectors
  std::vector<double> weights;     // K guidance weights
  std::vector<double> loss_trace;  // one entry per optimization step
  InversionOpts config;
  uint64_t model_digest = 0;
  // Set when any |w| collapses below 1e-3 or exceeds 1e2; surfaced, not fixed.
  bool weight_flagged = false;

  std::string to_json() const;
  static InversionResult from_json(const std::string& text);
};

// FNV-1a digest over all parameter bytes; invert() asserts it is unchanged.
uint64_t freeze_guard(const MlpDenoiser& model);

// Learns K concept components and weights that make the frozen denoiser
// reconstruct the demos' noise. Components start from U([0,1]^n), weights
// from 1. Each step evaluates all demos times noise_per_demo fresh
// (t, eps) draws and updates via AdamW. Throws NumericError on divergence
// (loss above 1e6 or non-finite).
InversionResult invert(const MlpDenoiser& model, const DiffusionSchedule& sched,
                       const Tensor& dummy, const std::vector<Demo>& demos,
                       const InversionOpts& opts);

// The inversion loss evaluated at fixed components/weights on a given
// (demo, t, eps) stream; used to compare a learned concept against the
// ground-truth embedding on identical draws.
double inversion_loss_at(const MlpDenoiser& model,
                         const DiffusionSchedule& sched, const Tensor& dummy,
                         const std::vector<Demo>& demos,
                         const std::vector<Tensor>& components,
                         const std::vector<double>& weights,
                         int64_t noise_per_demo, Rng& rng, Exec exec);

}  // namespace igen

#endif  // IGEN_CONCEPT_SPACE_HPP_
