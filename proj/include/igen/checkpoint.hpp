#ifndef IGEN_CHECKPOINT_HPP_
#define IGEN_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "igen/concept_space.hpp"
#include "igen/mlp.hpp"
#include "igen/schedule.hpp"

namespace igen {

// Binary model container. Layout (little-endian throughout):
//   magic "FTLM" | u32 version | str kind | u32 nmanifest | (str,str)...
//   | u32 ntensors | (str name, u32 rank, u64 extents[], f64 payload)...
//   | u64 fnv1a digest of everything before it
// str = u32 length + bytes. Save/load round-trips byte-identically.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  std::string kind;
  std::map<std::string, std::string> manifest;
  std::vector<NamedTensor> tensors;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Digest of the serialized body (the value stored in the trailer).
  uint64_t content_digest() const;

  const Tensor& tensor(const std::string& name) const;
  const std::string& field(const std::string& key) const;
};

// Denoiser + schedule + vocabulary packing ("diffusion-mlp").
Checkpoint pack_denoiser(const MlpDenoiser& model, const DiffusionSchedule& sched,
                         const ConceptVocabulary& vocab,
                         const std::string& domain);

struct DenoiserBundle {
  MlpDenoiser model;
  DiffusionSchedule sched;
  ConceptVocabulary vocab;
  std::string domain;
};

DenoiserBundle unpack_denoiser(const Checkpoint& ckpt);

}  // namespace igen

#endif  // IGEN_CHECKPOINT_HPP_
