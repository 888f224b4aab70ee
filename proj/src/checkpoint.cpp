#include "igen/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "igen/dataset.hpp"
#include "igen/digest.hpp"
#include "igen/error.hpp"

namespace igen {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

void put_f64_payload(std::string& out, const Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) {
    uint64_t bits;
    double v = t[i];
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
  }
}

struct Reader {
  const std::string& bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw IoError("checkpoint: truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string Checkpoint::serialize() const {
  std::string out = "FTLM";
  put_u32(out, kVersion);
  put_str(out, kind);
  put_u32(out, static_cast<uint32_t>(manifest.size()));
  for (const auto& kv : manifest) {
    put_str(out, kv.first);
    put_str(out, kv.second);
  }
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_str(out, t.name);
    put_u32(out, static_cast<uint32_t>(t.value.rank()));
    for (int64_t d = 0; d < t.value.rank(); ++d) {
      put_u64(out, static_cast<uint64_t>(t.value.extent(d)));
    }
    put_f64_payload(out, t.value);
  }
  put_u64(out, fnv1a64(out.data(), out.size()));
  return out;
}

uint64_t Checkpoint::content_digest() const {
  std::string body = serialize();
  // Digest sits in the final 8 bytes.
  Reader r{body, body.size() - 8};
  return r.u64();
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "FTLM") != 0) {
    throw IoError("checkpoint: bad magic");
  }
  uint64_t want = fnv1a64(bytes.data(), bytes.size() - 8);
  Reader tail{bytes, bytes.size() - 8};
  if (tail.u64() != want) throw IoError("checkpoint: digest mismatch");

  Reader r{bytes, 4};
  Checkpoint ckpt;
  uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  ckpt.kind = r.str();
  uint32_t nmanifest = r.u32();
  for (uint32_t i = 0; i < nmanifest; ++i) {
    std::string key = r.str();
    std::string val = r.str();
    ckpt.manifest.emplace(std::move(key), std::move(val));
  }
  uint32_t ntensors = r.u32();
  for (uint32_t i = 0; i < ntensors; ++i) {
    std::string name = r.str();
    uint32_t rank = r.u32();
    std::vector<int64_t> shape;
    for (uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int64_t>(r.u64()));
    }
    Tensor t(shape);
    for (int64_t k = 0; k < t.size(); ++k) {
      uint64_t bits = r.u64();
      double v;
      std::memcpy(&v, &bits, 8);
      t[k] = v;
    }
    ckpt.tensors.push_back({std::move(name), std::move(t)});
  }
  return ckpt;
}

void Checkpoint::save(const std::string& path) const {
  atomic_write_file(path, serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path));
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw IoError("checkpoint: missing tensor '" + name + "'");
}

const std::string& Checkpoint::field(const std::string& key) const {
  auto it = manifest.find(key);
  if (it == manifest.end()) {
    throw IoError("checkpoint: missing manifest key '" + key + "'");
  }
  return it->second;
}

namespace {

std::string join_csv(const std::vector<int64_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int64_t> split_csv_i64(const std::string& s) {
  std::vector<int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += '\n';
    out += v[i];
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

Checkpoint pack_denoiser(const MlpDenoiser& model, const DiffusionSchedule& sched,
                         const ConceptVocabulary& vocab,
                         const std::string& domain) {
  Checkpoint ckpt;
  ckpt.kind = "diffusion-mlp";
  ckpt.manifest["domain"] = domain;
  const SegmentLayout& layout = model.layout();
  ckpt.manifest["layout.x"] = std::to_string(layout.x_width);
  ckpt.manifest["layout.concept"] = std::to_string(layout.concept_width);
  ckpt.manifest["layout.s0"] = std::to_string(layout.s0_width);
  ckpt.manifest["layout.time"] = std::to_string(layout.time_width);
  ckpt.manifest["model.hidden"] = join_csv(model.hidden());
  ckpt.manifest["schedule.steps"] = std::to_string(sched.total_steps);
  ckpt.manifest["vocab.dim"] = std::to_string(vocab.dim());
  ckpt.manifest["vocab.embed_seed"] = std::to_string(vocab.embed_seed());
  ckpt.manifest["vocab.labels"] = join_lines(vocab.labels());

  ckpt.tensors.push_back(
      {"schedule.beta", Tensor::from(std::vector<double>(sched.beta))});
  for (const auto& p : model.net().params()) {
    ckpt.tensors.push_back({"net." + p.name, p.value});
  }
  return ckpt;
}

DenoiserBundle unpack_denoiser(const Checkpoint& ckpt) {
  if (ckpt.kind != "diffusion-mlp") {
    throw IoError("checkpoint: expected diffusion-mlp, found '" + ckpt.kind + "'");
  }
  DenoiserBundle b;
  b.domain = ckpt.field("domain");
  SegmentLayout layout;
  layout.x_width = std::stoll(ckpt.field("layout.x"));
  layout.concept_width = std::stoll(ckpt.field("layout.concept"));
  layout.s0_width = std::stoll(ckpt.field("layout.s0"));
  layout.time_width = std::stoll(ckpt.field("layout.time"));
  std::vector<int64_t> hidden = split_csv_i64(ckpt.field("model.hidden"));

  b.model = MlpDenoiser(layout, hidden);
  for (auto& p : b.model.mutable_net().mutable_params()) {
    const Tensor& stored = ckpt.tensor("net." + p.name);
    if (stored.shape() != p.value.shape()) {
      throw IoError("checkpoint: tensor shape mismatch for " + p.name);
    }
    p.value = stored;
  }

  const Tensor& beta = ckpt.tensor("schedule.beta");
  b.sched = DiffusionSchedule::from_beta(
      std::vector<double>(beta.data(), beta.data() + beta.size()));
  if (b.sched.total_steps != std::stoll(ckpt.field("schedule.steps"))) {
    throw IoError("checkpoint: schedule length mismatch");
  }

  b.vocab = ConceptVocabulary::build(
      split_lines(ckpt.field("vocab.labels")), std::stoll(ckpt.field("vocab.dim")),
      std::stoull(ckpt.field("vocab.embed_seed")));
  return b;
}

}  // namespace igen
