#include "igen/concept_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "igen/error.hpp"
#include "igen/optimizer.hpp"

namespace igen {

ConceptVocabulary ConceptVocabulary::build(
    const std::vector<std::string>& labels, int64_t dim, uint64_t embed_seed) {
  ConceptVocabulary vocab;
  vocab.dim_ = dim;
  vocab.embed_seed_ = embed_seed;
  auto draw = [&](const std::string& label) {
    Rng rng = make_rng(embed_seed, {"embed", label});
    Tensor v({dim});
    for (int64_t i = 0; i < dim; ++i) v[i] = rng.uniform();
    return v;
  };
  vocab.dummy_ = draw("");
  for (const auto& label : labels) {
    if (label.empty()) throw ConfigError("vocabulary: empty label is reserved");
    if (vocab.vectors_.count(label)) {
      throw ConfigError("vocabulary: duplicate label '" + label + "'");
    }
    vocab.vectors_.emplace(label, draw(label));
  }
  return vocab;
}

const Tensor& ConceptVocabulary::embed(const std::string& label) const {
  if (label.empty()) return dummy_;
  auto it = vectors_.find(label);
  if (it == vectors_.end()) {
    throw ConfigError("vocabulary: unknown label '" + label + "'");
  }
  return it->second;
}

std::vector<std::string> ConceptVocabulary::labels() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& kv : vectors_) out.push_back(kv.first);
  return out;
}

uint64_t freeze_guard(const MlpDenoiser& model) { return model.param_digest(); }

namespace {

struct InversionBatch {
  Tensor x_t;  // {rows, x_width}
  Tensor eps;  // {rows, x_width}
  std::vector<int64_t> t;
  std::vector<int64_t> demo_index;
  int64_t rows = 0;
};

InversionBatch draw_batch(const DiffusionSchedule& sched,
                          const std::vector<Demo>& demos,
                          int64_t noise_per_demo, Rng& rng) {
  int64_t width = demos[0].x0.size();
  int64_t rows = static_cast<int64_t>(demos.size()) * noise_per_demo;
  InversionBatch b;
  b.rows = rows;
  b.x_t = Tensor({rows, width});
  b.eps = Tensor({rows, width});
  b.t.resize(static_cast<size_t>(rows));
  b.demo_index.resize(static_cast<size_t>(rows));
  int64_t r = 0;
  for (size_t d = 0; d < demos.size(); ++d) {
    for (int64_t j = 0; j < noise_per_demo; ++j, ++r) {
      int64_t t = rng.uniform_int(1, sched.total_steps);
      b.t[static_cast<size_t>(r)] = t;
      b.demo_index[static_cast<size_t>(r)] = static_cast<int64_t>(d);
      double* eps_row = b.eps.data() + r * width;
      rng.normal_fill(eps_row, width);
      double abar = sched.alpha_bar_at(t);
      double sig = std::sqrt(abar);
      double noi = std::sqrt(1.0 - abar);
      const Tensor& x0 = demos[d].x0;
      double* xt_row = b.x_t.data() + r * width;
      for (int64_t i = 0; i < width; ++i) {
        xt_row[i] = sig * x0[i] + noi * eps_row[i];
      }
    }
  }
  return b;
}

struct StepEval {
  double loss = 0.0;
  std::vector<Tensor> concept_grads;
  std::vector<double> weight_grads;
};

// Composed prediction on every row, plus gradients with respect to the
// components and weights. Three facts shape the code: the dummy branch is
// constant (never differentiated), component rows differ from the dummy row
// only in the concept segment, and blocked accumulation keeps Serial and
// Parallel bitwise identical.
StepEval eval_batch(const MlpDenoiser& model, const std::vector<Demo>& demos,
                    const InversionBatch& batch, const Tensor& dummy,
                    const std::vector<Tensor>& components,
                    const std::vector<double>& weights, bool want_grads,
                    Exec exec) {
  const SegmentLayout& layout = model.layout();
  const Mlp& net = model.net();
  int64_t rows = batch.rows;
  int64_t width = layout.x_width;
  int64_t in = layout.total();
  int64_t kcount = static_cast<int64_t>(components.size());
  int64_t coff = layout.concept_offset();
  int64_t cwidth = layout.concept_width;
  double inv_n = 1.0 / static_cast<double>(rows * width);
  int64_t nblocks = reduce_block_count(rows);

  std::vector<StepEval> partial(static_cast<size_t>(nblocks));
  for (auto& p : partial) {
    if (want_grads) {
      p.concept_grads.assign(static_cast<size_t>(kcount), Tensor({cwidth}));
      p.weight_grads.assign(static_cast<size_t>(kcount), 0.0);
    }
  }

  parallel_for(nblocks, exec, [&](int64_t b) {
    Mlp::Workspace ws_dummy = net.make_workspace();
    std::vector<Mlp::Workspace> ws_k;
    for (int64_t k = 0; k < kcount; ++k) ws_k.push_back(net.make_workspace());
    std::vector<double> row_dummy(static_cast<size_t>(in));
    std::vector<std::vector<double>> row_k(
        static_cast<size_t>(kcount), std::vector<double>(static_cast<size_t>(in)));
    std::vector<double> eps_dummy(static_cast<size_t>(width));
    std::vector<std::vector<double>> eps_k(
        static_cast<size_t>(kcount),
        std::vector<double>(static_cast<size_t>(width)));
    std::vector<double> eps_hat(static_cast<size_t>(width));
    std::vector<double> upstream(static_cast<size_t>(width));
    std::vector<double> upstream_k(static_cast<size_t>(width));
    std::vector<double> x_grad(static_cast<size_t>(in));
    Tensor x_t_row({width});
    StepEval& acc = partial[static_cast<size_t>(b)];

    int64_t lo = b * kReduceBlockRows;
    int64_t hi = std::min(rows, lo + kReduceBlockRows);
    for (int64_t r = lo; r < hi; ++r) {
      const Demo& demo =
          demos[static_cast<size_t>(batch.demo_index[static_cast<size_t>(r)])];
      int64_t t = batch.t[static_cast<size_t>(r)];
      std::memcpy(x_t_row.data(), batch.x_t.data() + r * width,
                  sizeof(double) * static_cast<size_t>(width));
      model.assemble_row(x_t_row, dummy, demo.has_s0 ? &demo.s0 : nullptr, t,
                         row_dummy.data());
      net.forward_row(row_dummy.data(), eps_dummy.data(), ws_dummy);

      for (int64_t k = 0; k < kcount; ++k) {
        auto& row = row_k[static_cast<size_t>(k)];
        std::memcpy(row.data(), row_dummy.data(),
                    sizeof(double) * static_cast<size_t>(in));
        std::memcpy(row.data() + coff, components[static_cast<size_t>(k)].data(),
                    sizeof(double) * static_cast<size_t>(cwidth));
        net.forward_row(row.data(), eps_k[static_cast<size_t>(k)].data(),
                        ws_k[static_cast<size_t>(k)]);
      }

      const double* eps_target = batch.eps.data() + r * width;
      for (int64_t i = 0; i < width; ++i) {
        double v = eps_dummy[i];
        for (int64_t k = 0; k < kcount; ++k) {
          v += weights[static_cast<size_t>(k)] *
               (eps_k[static_cast<size_t>(k)][static_cast<size_t>(i)] -
                eps_dummy[i]);
        }
        eps_hat[static_cast<size_t>(i)] = v;
        double d = v - eps_target[i];
        acc.loss += d * d;
        upstream[static_cast<size_t>(i)] = 2.0 * d * inv_n;
      }
      if (!want_grads) continue;

      for (int64_t k = 0; k < kcount; ++k) {
        double wg = 0.0;
        const auto& ek = eps_k[static_cast<size_t>(k)];
        for (int64_t i = 0; i < width; ++i) {
          wg += upstream[static_cast<size_t>(i)] *
                (ek[static_cast<size_t>(i)] - eps_dummy[i]);
        }
        acc.weight_grads[static_cast<size_t>(k)] += wg;

        double wk = weights[static_cast<size_t>(k)];
        for (int64_t i = 0; i < width; ++i) {
          upstream_k[static_cast<size_t>(i)] =
              wk * upstream[static_cast<size_t>(i)];
        }
        net.backward_row(row_k[static_cast<size_t>(k)].data(), upstream_k.data(),
                         nullptr, x_grad.data(), ws_k[static_cast<size_t>(k)]);
        Tensor& cg = acc.concept_grads[static_cast<size_t>(k)];
        for (int64_t i = 0; i < cwidth; ++i) {
          cg[i] += x_grad[static_cast<size_t>(coff + i)];
        }
      }
    }
  });

  StepEval total;
  if (want_grads) {
    total.concept_grads.assign(static_cast<size_t>(kcount), Tensor({cwidth}));
    total.weight_grads.assign(static_cast<size_t>(kcount), 0.0);
  }
  for (const auto& p : partial) {
    total.loss += p.loss;
    if (want_grads) {
      for (int64_t k = 0; k < kcount; ++k) {
        total.concept_grads[static_cast<size_t>(k)].add(
            p.concept_grads[static_cast<size_t>(k)]);
        total.weight_grads[static_cast<size_t>(k)] +=
            p.weight_grads[static_cast<size_t>(k)];
      }
    }
  }
  total.loss *= inv_n;
  return total;
}

void validate_demos(const MlpDenoiser& model, const std::vector<Demo>& demos) {
  if (demos.empty()) throw NumericError("invert: no demonstrations");
  const SegmentLayout& layout = model.layout();
  for (const auto& d : demos) {
    if (d.x0.size() != layout.x_width) {
      throw NumericError("invert: demo width mismatch");
    }
    check_finite(d.x0, "demo x0");
    if (layout.has_s0()) {
      if (!d.has_s0 || d.s0.size() != layout.s0_width) {
        throw NumericError("invert: demo missing initial state");
      }
      check_finite(d.s0, "demo s0");
    }
  }
}

}  // namespace

InversionResult invert(const MlpDenoiser& model, const DiffusionSchedule& sched,
                       const Tensor& dummy, const std::vector<Demo>& demos,
                       const InversionOpts& opts) {
  if (opts.k < 1) throw NumericError("invert: K must be >= 1");
  validate_demos(model, demos);
  uint64_t digest_before = freeze_guard(model);

  Rng rng = make_rng(opts.seed, {"invert", opts.stream_tag});
  int64_t cwidth = model.layout().concept_width;

  InversionResult result;
  result.config = opts;
  result.model_digest = digest_before;
  for (int64_t k = 0; k < opts.k; ++k) {
    Tensor c({cwidth});
    for (int64_t i = 0; i < cwidth; ++i) c[i] = rng.uniform();
    result.components.push_back(std::move(c));
    result.weights.push_back(opts.learn_weights ? 1.0 : opts.fixed_weight);
  }

  AdamW optimizer(AdamW::Opts{opts.lr, 0.9, 0.999, 1e-8, 0.0});
  Tensor weights_param({opts.k});
  for (int64_t k = 0; k < opts.k; ++k) weights_param[k] = result.weights[static_cast<size_t>(k)];

  result.loss_trace.reserve(static_cast<size_t>(opts.steps));
  for (int64_t step = 0; step < opts.steps; ++step) {
    InversionBatch batch = draw_batch(sched, demos, opts.noise_per_demo, rng);
    StepEval ev = eval_batch(model, demos, batch, dummy, result.components,
                             result.weights, /*want_grads=*/true, opts.exec);
    if (opts.weight_reg > 0.0) {
      for (int64_t k = 0; k < opts.k; ++k) {
        double w = result.weights[static_cast<size_t>(k)];
        ev.loss += opts.weight_reg * (w - 1.0) * (w - 1.0);
        ev.weight_grads[static_cast<size_t>(k)] +=
            2.0 * opts.weight_reg * (w - 1.0);
      }
    }
    result.loss_trace.push_back(ev.loss);
    if (!std::isfinite(ev.loss) || ev.loss > 1e6) {
      std::string tail;
      size_t n = result.loss_trace.size();
      for (size_t i = n > 5 ? n - 5 : 0; i < n; ++i) {
        tail += " " + std::to_string(result.loss_trace[i]);
      }
      throw NumericError("invert: diverged at step " + std::to_string(step) +
                         "; loss trace tail:" + tail);
    }

    Tensor wgrad({opts.k});
    if (opts.learn_weights) {
      for (int64_t k = 0; k < opts.k; ++k) {
        wgrad[k] = ev.weight_grads[static_cast<size_t>(k)];
      }
    }
    std::vector<Tensor*> params;
    std::vector<Tensor> grads;
    for (int64_t k = 0; k < opts.k; ++k) {
      params.push_back(&result.components[static_cast<size_t>(k)]);
      grads.push_back(std::move(ev.concept_grads[static_cast<size_t>(k)]));
    }
    params.push_back(&weights_param);
    grads.push_back(std::move(wgrad));
    optimizer.step(params, grads);
    for (int64_t k = 0; k < opts.k; ++k) {
      result.weights[static_cast<size_t>(k)] = weights_param[k];
    }
  }

  for (double w : result.weights) {
    double a = std::fabs(w);
    if (a < 1e-3 || a > 1e2) result.weight_flagged = true;
  }

  if (freeze_guard(model) != digest_before) {
    throw NumericError("invert: frozen-model contract violated");
  }
  return result;
}

double inversion_loss_at(const MlpDenoiser& model,
                         const DiffusionSchedule& sched, const Tensor& dummy,
                         const std::vector<Demo>& demos,
                         const std::vector<Tensor>& components,
                         const std::vector<double>& weights,
                         int64_t noise_per_demo, Rng& rng, Exec exec) {
  validate_demos(model, demos);
  InversionBatch batch = draw_batch(sched, demos, noise_per_demo, rng);
  StepEval ev = eval_batch(model, demos, batch, dummy, components, weights,
                           /*want_grads=*/false, exec);
  return ev.loss;
}

std::string InversionResult::to_json() const {
  nlohmann::json j;
  j["components"] = nlohmann::json::array();
  for (const auto& c : components) j["components"].push_back(c.vec());
  j["weights"] = weights;
  j["weight_flagged"] = weight_flagged;
  j["loss_trace"] = loss_trace;
  j["model_digest"] = hex64(model_digest);
  j["config"] = {
      {"k", config.k},
      {"steps", config.steps},
      {"lr", config.lr},
      {"noise_per_demo", config.noise_per_demo},
      {"learn_weights", config.learn_weights},
      {"fixed_weight", config.fixed_weight},
      {"weight_reg", config.weight_reg},
      {"seed", config.seed},
      {"stream_tag", config.stream_tag},
  };
  return j.dump(2);
}

InversionResult InversionResult::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  InversionResult r;
  for (const auto& c : j.at("components")) {
    r.components.push_back(Tensor::from(c.get<std::vector<double>>()));
  }
  r.weights = j.at("weights").get<std::vector<double>>();
  r.weight_flagged = j.at("weight_flagged").get<bool>();
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  r.model_digest = std::stoull(j.at("model_digest").get<std::string>(), nullptr, 16);
  const auto& c = j.at("config");
  r.config.k = c.at("k").get<int64_t>();
  r.config.steps = c.at("steps").get<int64_t>();
  r.config.lr = c.at("lr").get<double>();
  r.config.noise_per_demo = c.at("noise_per_demo").get<int64_t>();
  r.config.learn_weights = c.at("learn_weights").get<bool>();
  r.config.fixed_weight = c.at("fixed_weight").get<double>();
  r.config.weight_reg = c.at("weight_reg").get<double>();
  r.config.seed = c.at("seed").get<uint64_t>();
  r.config.stream_tag = c.at("stream_tag").get<std::string>();
  return r;
}

}  // namespace igen
