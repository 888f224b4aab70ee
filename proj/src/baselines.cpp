#include "igen/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "igen/digest.hpp"
#include "igen/error.hpp"
#include "igen/optimizer.hpp"

namespace igen {

namespace {

uint64_t net_digest(const Mlp& net, const char* prefix) {
  Fnv1a64 h;
  h.update(prefix, std::strlen(prefix));
  for (const auto& p : net.params()) {
    h.update(p.name);
    h.update(p.value.data(), sizeof(double) * static_cast<size_t>(p.value.size()));
  }
  return h.value();
}

Tensor assemble_bc_inputs(const BcModel& model, const std::vector<const BcPair*>& rows) {
  int64_t in = model.cond_dim + model.state_dim;
  Tensor inputs({static_cast<int64_t>(rows.size()), in});
  for (size_t r = 0; r < rows.size(); ++r) {
    double* dst = inputs.data() + static_cast<int64_t>(r) * in;
    std::memcpy(dst, rows[r]->cond.data(),
                sizeof(double) * static_cast<size_t>(model.cond_dim));
    if (model.state_dim > 0) {
      std::memcpy(dst + model.cond_dim, rows[r]->state.data(),
                  sizeof(double) * static_cast<size_t>(model.state_dim));
    }
  }
  return inputs;
}

Tensor assemble_bc_targets(const BcModel& model, const std::vector<const BcPair*>& rows) {
  Tensor targets({static_cast<int64_t>(rows.size()), model.out_dim});
  for (size_t r = 0; r < rows.size(); ++r) {
    std::memcpy(targets.data() + static_cast<int64_t>(r) * model.out_dim,
                rows[r]->next.data(),
                sizeof(double) * static_cast<size_t>(model.out_dim));
  }
  return targets;
}

}  // namespace

BcModel BcModel::random_init(int64_t cond_dim, int64_t state_dim,
                             int64_t out_dim, int64_t hidden, Rng& rng) {
  BcModel m;
  m.cond_dim = cond_dim;
  m.state_dim = state_dim;
  m.out_dim = out_dim;
  m.net = Mlp::he_init(cond_dim + state_dim, {hidden}, out_dim, rng);
  return m;
}

Tensor BcModel::forward(const Tensor& cond, const Tensor* state) const {
  if (cond.size() != cond_dim) throw NumericError("bc: condition width mismatch");
  if (state_dim > 0 && (state == nullptr || state->size() != state_dim)) {
    throw NumericError("bc: state width mismatch");
  }
  std::vector<double> row(static_cast<size_t>(cond_dim + state_dim));
  std::memcpy(row.data(), cond.data(), sizeof(double) * static_cast<size_t>(cond_dim));
  if (state_dim > 0) {
    std::memcpy(row.data() + cond_dim, state->data(),
                sizeof(double) * static_cast<size_t>(state_dim));
  }
  Tensor out({out_dim});
  Mlp::Workspace ws = net.make_workspace();
  net.forward_row(row.data(), out.data(), ws);
  return out;
}

uint64_t BcModel::param_digest() const { return net_digest(net, "bc"); }

std::vector<double> bc_train(BcModel& model, const std::vector<BcPair>& data,
                             const BcTrainOpts& opts) {
  if (data.empty()) throw ConfigError("bc_train: empty dataset");
  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, 0.0});
  Rng rng = make_rng(opts.seed, {"train", "bc"});
  std::vector<double> trace;
  trace.reserve(static_cast<size_t>(opts.steps));
  std::vector<const BcPair*> batch(static_cast<size_t>(opts.batch));
  for (int64_t step = 0; step < opts.steps; ++step) {
    for (auto& slot : batch) {
      slot = &data[static_cast<size_t>(rng.uniform_below(data.size()))];
    }
    Tensor inputs = assemble_bc_inputs(model, batch);
    Tensor targets = assemble_bc_targets(model, batch);
    GradRequest req;
    req.params = true;
    BatchLoss bl = mlp_batch_mse(model.net, inputs, targets, req, opts.exec);
    std::vector<Tensor*> params;
    for (auto& p : model.net.mutable_params()) params.push_back(&p.value);
    optimizer.step(params, bl.param_grads);
    trace.push_back(bl.loss);
  }
  return trace;
}

BcInversion bc_invert_condition(const BcModel& model,
                                const std::vector<BcPair>& demo_pairs,
                                const BcInvertOpts& opts) {
  if (demo_pairs.empty()) throw NumericError("bc_invert: no demo transitions");
  uint64_t digest = model.param_digest();
  Rng rng = make_rng(opts.seed, {"invert", opts.stream_tag});
  BcInversion result;
  result.condition = Tensor({model.cond_dim});
  for (int64_t i = 0; i < model.cond_dim; ++i) {
    result.condition[i] = rng.uniform();
  }
  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, 0.0});

  std::vector<const BcPair*> rows;
  for (const auto& p : demo_pairs) rows.push_back(&p);
  Tensor targets = assemble_bc_targets(model, rows);
  int64_t in = model.cond_dim + model.state_dim;

  for (int64_t step = 0; step < opts.steps; ++step) {
    Tensor inputs({static_cast<int64_t>(rows.size()), in});
    for (size_t r = 0; r < rows.size(); ++r) {
      double* dst = inputs.data() + static_cast<int64_t>(r) * in;
      std::memcpy(dst, result.condition.data(),
                  sizeof(double) * static_cast<size_t>(model.cond_dim));
      if (model.state_dim > 0) {
        std::memcpy(dst + model.cond_dim, rows[r]->state.data(),
                    sizeof(double) * static_cast<size_t>(model.state_dim));
      }
    }
    GradRequest req;
    req.input = true;
    BatchLoss bl = mlp_batch_mse(model.net, inputs, targets, req, opts.exec);
    result.loss_trace.push_back(bl.loss);
    if (!std::isfinite(bl.loss) || bl.loss > 1e6) {
      throw NumericError("bc_invert: diverged at step " + std::to_string(step));
    }
    // Condition gradient is the sum of its input-slot gradients over rows.
    Tensor grad({model.cond_dim});
    for (size_t r = 0; r < rows.size(); ++r) {
      const double* g = bl.input_grads.data() + static_cast<int64_t>(r) * in;
      for (int64_t i = 0; i < model.cond_dim; ++i) grad[i] += g[i];
    }
    optimizer.step({&result.condition}, {grad});
  }
  if (model.param_digest() != digest) {
    throw NumericError("bc_invert: frozen-model contract violated");
  }
  return result;
}

CvaeModel CvaeModel::random_init(int64_t x_dim, int64_t s0_dim,
                                 int64_t latent_dim, int64_t hidden, Rng& rng) {
  CvaeModel m;
  m.x_dim = x_dim;
  m.s0_dim = s0_dim;
  m.latent_dim = latent_dim;
  m.encoder = Mlp::he_init(x_dim, {hidden}, 2 * latent_dim, rng);
  m.decoder = Mlp::he_init(latent_dim + s0_dim, {hidden}, x_dim, rng);
  return m;
}

CvaeModel::Encoded CvaeModel::encode(const Tensor& x) const {
  if (x.size() != x_dim) throw NumericError("cvae: x width mismatch");
  Tensor out({2 * latent_dim});
  Mlp::Workspace ws = encoder.make_workspace();
  encoder.forward_row(x.data(), out.data(), ws);
  Encoded e{Tensor({latent_dim}), Tensor({latent_dim})};
  for (int64_t i = 0; i < latent_dim; ++i) {
    e.mu[i] = out[i];
    e.logvar[i] = out[latent_dim + i];
  }
  return e;
}

Tensor CvaeModel::decode(const Tensor& z, const Tensor* s0) const {
  if (z.size() != latent_dim) throw NumericError("cvae: z width mismatch");
  if (s0_dim > 0 && (s0 == nullptr || s0->size() != s0_dim)) {
    throw NumericError("cvae: s0 width mismatch");
  }
  std::vector<double> row(static_cast<size_t>(latent_dim + s0_dim));
  std::memcpy(row.data(), z.data(), sizeof(double) * static_cast<size_t>(latent_dim));
  if (s0_dim > 0) {
    std::memcpy(row.data() + latent_dim, s0->data(),
                sizeof(double) * static_cast<size_t>(s0_dim));
  }
  Tensor out({x_dim});
  Mlp::Workspace ws = decoder.make_workspace();
  decoder.forward_row(row.data(), out.data(), ws);
  return out;
}

uint64_t CvaeModel::param_digest() const {
  Fnv1a64 h;
  uint64_t e = net_digest(encoder, "cvae-enc");
  uint64_t d = net_digest(decoder, "cvae-dec");
  h.update(&e, sizeof(e));
  h.update(&d, sizeof(d));
  return h.value();
}

CvaeTrainStats cvae_train(CvaeModel& model, const std::vector<CvaeRow>& data,
                          const CvaeTrainOpts& opts) {
  if (data.empty()) throw ConfigError("cvae_train: empty dataset");
  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, 0.0});
  Rng rng = make_rng(opts.seed, {"train", "cvae"});
  CvaeTrainStats stats;
  int64_t latent = model.latent_dim;
  int64_t dec_in = latent + model.s0_dim;

  for (int64_t step = 0; step < opts.steps; ++step) {
    // Draws happen sequentially; the row computations below are
    // block-parallel with deterministic reduction.
    std::vector<const CvaeRow*> batch(static_cast<size_t>(opts.batch));
    Tensor z_noise({opts.batch, latent});
    for (int64_t r = 0; r < opts.batch; ++r) {
      batch[static_cast<size_t>(r)] =
          &data[static_cast<size_t>(rng.uniform_below(data.size()))];
      rng.normal_fill(z_noise.data() + r * latent, latent);
    }

    int64_t nblocks = reduce_block_count(opts.batch);
    std::vector<std::vector<Tensor>> enc_grads(static_cast<size_t>(nblocks));
    std::vector<std::vector<Tensor>> dec_grads(static_cast<size_t>(nblocks));
    std::vector<double> block_loss(static_cast<size_t>(nblocks), 0.0);
    std::vector<double> block_kl(static_cast<size_t>(nblocks), 0.0);
    for (int64_t b = 0; b < nblocks; ++b) {
      enc_grads[static_cast<size_t>(b)] = model.encoder.zero_grads();
      dec_grads[static_cast<size_t>(b)] = model.decoder.zero_grads();
    }
    double inv_batch = 1.0 / static_cast<double>(opts.batch);

    parallel_for(nblocks, opts.exec, [&](int64_t b) {
      Mlp::Workspace enc_ws = model.encoder.make_workspace();
      Mlp::Workspace dec_ws = model.decoder.make_workspace();
      std::vector<double> enc_out(static_cast<size_t>(2 * latent));
      std::vector<double> dec_row(static_cast<size_t>(dec_in));
      std::vector<double> xhat(static_cast<size_t>(model.x_dim));
      std::vector<double> dec_up(static_cast<size_t>(model.x_dim));
      std::vector<double> dec_in_grad(static_cast<size_t>(dec_in));
      std::vector<double> enc_up(static_cast<size_t>(2 * latent));
      int64_t lo = b * kReduceBlockRows;
      int64_t hi = std::min<int64_t>(opts.batch, lo + kReduceBlockRows);
      for (int64_t r = lo; r < hi; ++r) {
        const CvaeRow& row = *batch[static_cast<size_t>(r)];
        model.encoder.forward_row(row.x.data(), enc_out.data(), enc_ws);
        const double* zeps = z_noise.data() + r * latent;
        for (int64_t i = 0; i < latent; ++i) {
          double mu = enc_out[static_cast<size_t>(i)];
          double logvar = enc_out[static_cast<size_t>(latent + i)];
          dec_row[static_cast<size_t>(i)] =
              mu + std::exp(0.5 * logvar) * zeps[i];
        }
        if (model.s0_dim > 0) {
          std::memcpy(dec_row.data() + latent, row.s0.data(),
                      sizeof(double) * static_cast<size_t>(model.s0_dim));
        }
        model.decoder.forward_row(dec_row.data(), xhat.data(), dec_ws);

        double recon = 0.0;
        for (int64_t i = 0; i < model.x_dim; ++i) {
          double d = xhat[static_cast<size_t>(i)] - row.x[i];
          recon += d * d;
          dec_up[static_cast<size_t>(i)] = 2.0 * d * inv_batch;
        }
        double kl = 0.0;
        for (int64_t i = 0; i < latent; ++i) {
          double mu = enc_out[static_cast<size_t>(i)];
          double logvar = enc_out[static_cast<size_t>(latent + i)];
          kl += 0.5 * (mu * mu + std::exp(logvar) - logvar - 1.0);
        }
        block_loss[static_cast<size_t>(b)] +=
            (recon + opts.kl_weight * kl) * inv_batch;
        block_kl[static_cast<size_t>(b)] += kl * inv_batch;

        model.decoder.backward_row(dec_row.data(), dec_up.data(),
                                   &dec_grads[static_cast<size_t>(b)],
                                   dec_in_grad.data(), dec_ws);
        for (int64_t i = 0; i < latent; ++i) {
          double mu = enc_out[static_cast<size_t>(i)];
          double logvar = enc_out[static_cast<size_t>(latent + i)];
          double dz = dec_in_grad[static_cast<size_t>(i)];
          enc_up[static_cast<size_t>(i)] =
              dz + opts.kl_weight * mu * inv_batch;
          enc_up[static_cast<size_t>(latent + i)] =
              dz * zeps[i] * 0.5 * std::exp(0.5 * logvar) +
              opts.kl_weight * 0.5 * (std::exp(logvar) - 1.0) * inv_batch;
        }
        model.encoder.backward_row(row.x.data(), enc_up.data(),
                                   &enc_grads[static_cast<size_t>(b)], nullptr,
                                   enc_ws);
      }
    });

    double loss = 0.0;
    double mean_kl = 0.0;
    for (int64_t b = 0; b < nblocks; ++b) {
      loss += block_loss[static_cast<size_t>(b)];
      mean_kl += block_kl[static_cast<size_t>(b)];
      if (b > 0) {
        for (size_t p = 0; p < enc_grads[0].size(); ++p) {
          enc_grads[0][p].add(enc_grads[static_cast<size_t>(b)][p]);
        }
        for (size_t p = 0; p < dec_grads[0].size(); ++p) {
          dec_grads[0][p].add(dec_grads[static_cast<size_t>(b)][p]);
        }
      }
    }
    if (!std::isfinite(loss)) throw NumericError("cvae_train: non-finite loss");
    stats.loss_trace.push_back(loss);
    stats.final_mean_kl = mean_kl;

    std::vector<Tensor*> params;
    std::vector<Tensor> grads;
    for (auto& p : model.encoder.mutable_params()) params.push_back(&p.value);
    for (auto& g : enc_grads[0]) grads.push_back(std::move(g));
    for (auto& p : model.decoder.mutable_params()) params.push_back(&p.value);
    for (auto& g : dec_grads[0]) grads.push_back(std::move(g));
    optimizer.step(params, grads);
  }
  stats.kl_collapsed = stats.final_mean_kl < 1e-3;
  return stats;
}

Tensor cvae_generate(const CvaeModel& model, const Tensor& z, const Tensor* s0,
                     double noise_sigma, Rng& rng) {
  Tensor zn = z.clone();
  for (int64_t i = 0; i < zn.size(); ++i) zn[i] += noise_sigma * rng.normal();
  return model.decode(zn, s0);
}

CvaeInversion cvae_invert_latent(const CvaeModel& model,
                                 const std::vector<CvaeRow>& demos,
                                 const CvaeInvertOpts& opts) {
  if (demos.empty()) throw NumericError("cvae_invert: no demos");
  uint64_t digest = model.param_digest();
  Rng rng = make_rng(opts.seed, {"invert", opts.stream_tag});
  CvaeInversion result;
  result.z = Tensor({model.latent_dim});
  for (int64_t i = 0; i < model.latent_dim; ++i) result.z[i] = rng.uniform();
  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, 0.0});

  int64_t dec_in = model.latent_dim + model.s0_dim;
  int64_t rows = static_cast<int64_t>(demos.size());
  for (int64_t step = 0; step < opts.steps; ++step) {
    Tensor inputs({rows, dec_in});
    Tensor targets({rows, model.x_dim});
    for (int64_t r = 0; r < rows; ++r) {
      double* dst = inputs.data() + r * dec_in;
      std::memcpy(dst, result.z.data(),
                  sizeof(double) * static_cast<size_t>(model.latent_dim));
      const CvaeRow& demo = demos[static_cast<size_t>(r)];
      if (model.s0_dim > 0) {
        std::memcpy(dst + model.latent_dim, demo.s0.data(),
                    sizeof(double) * static_cast<size_t>(model.s0_dim));
      }
      std::memcpy(targets.data() + r * model.x_dim, demo.x.data(),
                  sizeof(double) * static_cast<size_t>(model.x_dim));
    }
    GradRequest req;
    req.input = true;
    BatchLoss bl = mlp_batch_mse(model.decoder, inputs, targets, req, opts.exec);
    result.loss_trace.push_back(bl.loss);
    if (!std::isfinite(bl.loss) || bl.loss > 1e6) {
      throw NumericError("cvae_invert: diverged at step " + std::to_string(step));
    }
    Tensor grad({model.latent_dim});
    for (int64_t r = 0; r < rows; ++r) {
      const double* g = bl.input_grads.data() + r * dec_in;
      for (int64_t i = 0; i < model.latent_dim; ++i) grad[i] += g[i];
    }
    optimizer.step({&result.z}, {grad});
  }
  if (model.param_digest() != digest) {
    throw NumericError("cvae_invert: frozen-model contract violated");
  }
  return result;
}

Checkpoint pack_bc(const BcModel& model, const ConceptVocabulary& vocab,
                   const std::string& domain) {
  Checkpoint ckpt;
  ckpt.kind = "bc-mlp";
  ckpt.manifest["domain"] = domain;
  ckpt.manifest["bc.cond_dim"] = std::to_string(model.cond_dim);
  ckpt.manifest["bc.state_dim"] = std::to_string(model.state_dim);
  ckpt.manifest["bc.out_dim"] = std::to_string(model.out_dim);
  ckpt.manifest["bc.hidden"] = std::to_string(model.net.widths()[1]);
  ckpt.manifest["vocab.dim"] = std::to_string(vocab.dim());
  ckpt.manifest["vocab.embed_seed"] = std::to_string(vocab.embed_seed());
  for (const auto& p : model.net.params()) {
    ckpt.tensors.push_back({"net." + p.name, p.value});
  }
  return ckpt;
}

BcModel unpack_bc(const Checkpoint& ckpt) {
  if (ckpt.kind != "bc-mlp") throw IoError("checkpoint: expected bc-mlp");
  BcModel m;
  m.cond_dim = std::stoll(ckpt.field("bc.cond_dim"));
  m.state_dim = std::stoll(ckpt.field("bc.state_dim"));
  m.out_dim = std::stoll(ckpt.field("bc.out_dim"));
  int64_t hidden = std::stoll(ckpt.field("bc.hidden"));
  m.net = Mlp(m.cond_dim + m.state_dim, {hidden}, m.out_dim);
  for (auto& p : m.net.mutable_params()) {
    p.value = ckpt.tensor("net." + p.name);
  }
  return m;
}

Checkpoint pack_cvae(const CvaeModel& model, const std::string& domain) {
  Checkpoint ckpt;
  ckpt.kind = "cvae-mlp";
  ckpt.manifest["domain"] = domain;
  ckpt.manifest["cvae.x_dim"] = std::to_string(model.x_dim);
  ckpt.manifest["cvae.s0_dim"] = std::to_string(model.s0_dim);
  ckpt.manifest["cvae.latent_dim"] = std::to_string(model.latent_dim);
  ckpt.manifest["cvae.hidden"] = std::to_string(model.encoder.widths()[1]);
  for (const auto& p : model.encoder.params()) {
    ckpt.tensors.push_back({"encoder." + p.name, p.value});
  }
  for (const auto& p : model.decoder.params()) {
    ckpt.tensors.push_back({"decoder." + p.name, p.value});
  }
  return ckpt;
}

CvaeModel unpack_cvae(const Checkpoint& ckpt) {
  if (ckpt.kind != "cvae-mlp") throw IoError("checkpoint: expected cvae-mlp");
  CvaeModel m;
  m.x_dim = std::stoll(ckpt.field("cvae.x_dim"));
  m.s0_dim = std::stoll(ckpt.field("cvae.s0_dim"));
  m.latent_dim = std::stoll(ckpt.field("cvae.latent_dim"));
  int64_t hidden = std::stoll(ckpt.field("cvae.hidden"));
  m.encoder = Mlp(m.x_dim, {hidden}, 2 * m.latent_dim);
  m.decoder = Mlp(m.latent_dim + m.s0_dim, {hidden}, m.x_dim);
  for (auto& p : m.encoder.mutable_params()) {
    p.value = ckpt.tensor("encoder." + p.name);
  }
  for (auto& p : m.decoder.mutable_params()) {
    p.value = ckpt.tensor("decoder." + p.name);
  }
  return m;
}

}  // namespace igen
