#include <doctest.h>

#include <cmath>

#include "igen/baselines.hpp"
#include "igen/rng.hpp"

using igen::BcModel;
using igen::BcPair;
using igen::CvaeModel;
using igen::CvaeRow;
using igen::Rng;
using igen::Tensor;

namespace {

Tensor randn(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

// Two synthetic "concepts": condition vector determines the output cluster.
struct BcWorld {
  Tensor cond_a, cond_b;
  std::vector<BcPair> data;
};

BcWorld make_bc_world(Rng& rng, double sigma) {
  BcWorld w;
  w.cond_a = randn(rng, {6}, 0.5);
  w.cond_b = randn(rng, {6}, 0.5);
  for (int i = 0; i < 256; ++i) {
    BcPair p;
    bool a = i % 2 == 0;
    p.cond = (a ? w.cond_a : w.cond_b).clone();
    p.next = Tensor({4});
    for (int64_t j = 0; j < 4; ++j) {
      p.next[j] = (a ? 1.0 : -1.0) + sigma * rng.normal();
    }
    w.data.push_back(std::move(p));
  }
  return w;
}

double demo_mse(const BcModel& model, const std::vector<BcPair>& pairs,
                const Tensor& cond) {
  double acc = 0.0;
  int64_t n = 0;
  for (const auto& p : pairs) {
    Tensor out = model.forward(cond, p.has_state ? &p.state : nullptr);
    for (int64_t i = 0; i < out.size(); ++i) {
      double d = out[i] - p.next[i];
      acc += d * d;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("bc training fits and condition inversion approaches the oracle") {
  Rng rng(5, 11);
  const double sigma = 0.05;
  BcWorld w = make_bc_world(rng, sigma);
  BcModel model = BcModel::random_init(6, 0, 4, 64, rng);
  igen::BcTrainOpts topts;
  topts.steps = 1500;
  topts.batch = 32;
  topts.seed = 3;
  auto trace = bc_train(model, w.data, topts);
  CHECK(trace.back() < trace.front());

  // Condition-only forward is deterministic.
  Tensor o1 = model.forward(w.cond_a, nullptr);
  Tensor o2 = model.forward(w.cond_a, nullptr);
  CHECK(igen::bitwise_equal(o1, o2));
  // Ground-truth conditions produce the right cluster.
  CHECK(o1[0] == doctest::Approx(1.0).epsilon(0.2));
  CHECK(model.forward(w.cond_b, nullptr)[0] == doctest::Approx(-1.0).epsilon(0.2));

  // Inversion on 5 demos of concept a.
  std::vector<BcPair> demos;
  Rng drng(9, 1);
  for (int i = 0; i < 5; ++i) {
    BcPair p;
    p.cond = Tensor({6});  // unused by inversion
    p.next = Tensor({4});
    for (int64_t j = 0; j < 4; ++j) p.next[j] = 1.0 + sigma * drng.normal();
    demos.push_back(std::move(p));
  }
  igen::BcInvertOpts iopts;
  iopts.steps = 400;
  iopts.seed = 21;
  uint64_t digest = model.param_digest();
  auto inv = bc_invert_condition(model, demos, iopts);
  CHECK(model.param_digest() == digest);

  double mse_learned = demo_mse(model, demos, inv.condition);
  double mse_star = demo_mse(model, demos, w.cond_a);
  CHECK(mse_learned <= 2.0 * mse_star);

  // Naive composition keeps the shape contract.
  Tensor composed = w.cond_a.clone();
  composed.add(w.cond_b);
  Tensor out = model.forward(composed, nullptr);
  CHECK(out.size() == 4);
  CHECK(out.all_finite());
}

TEST_CASE("cvae reconstruction, determinism, and latent inversion") {
  Rng rng(8, 2);
  const double sigma = 0.1;
  // Two clusters in 6-d; the latent must carry the cluster identity.
  std::vector<CvaeRow> data;
  for (int i = 0; i < 256; ++i) {
    CvaeRow row;
    row.x = Tensor({6});
    double mean = i % 2 == 0 ? 1.0 : -1.0;
    for (int64_t j = 0; j < 6; ++j) row.x[j] = mean + sigma * rng.normal();
    data.push_back(std::move(row));
  }
  CvaeModel model = CvaeModel::random_init(6, 0, 4, 64, rng);
  igen::CvaeTrainOpts topts;
  topts.steps = 2500;
  topts.batch = 32;
  topts.kl_weight = 1.0;
  topts.seed = 13;
  auto stats = cvae_train(model, data, topts);
  CHECK(stats.loss_trace.back() < stats.loss_trace.front());

  SUBCASE("encode-then-decode error is below the noise floor") {
    // Mean squared reconstruction error per coordinate <= 2 sigma^2.
    double acc = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < 32; ++i) {
      const Tensor& x = data[i].x;
      auto enc = model.encode(x);
      Tensor xhat = model.decode(enc.mu, nullptr);
      for (int64_t j = 0; j < 6; ++j) {
        double d = xhat[j] - x[j];
        acc += d * d;
        ++n;
      }
    }
    CHECK(acc / static_cast<double>(n) <= 2.0 * sigma * sigma);
  }
  SUBCASE("zero-noise generation with fixed z is deterministic") {
    auto enc = model.encode(data[0].x);
    Rng g1(1, 1), g2(2, 2);
    Tensor a = cvae_generate(model, enc.mu, nullptr, 0.0, g1);
    Tensor b = cvae_generate(model, enc.mu, nullptr, 0.0, g2);
    CHECK(igen::bitwise_equal(a, b));
  }
  SUBCASE("latent inversion freezes the decoder and matches the encoder") {
    std::vector<CvaeRow> demos(data.begin(), data.begin() + 5);  // cluster +1...
    // Take demos from one cluster only.
    std::vector<CvaeRow> plus;
    for (const auto& row : data) {
      if (row.x[0] > 0) plus.push_back(row);
      if (plus.size() == 5) break;
    }
    igen::CvaeInvertOpts iopts;
    iopts.steps = 400;
    iopts.seed = 4;
    uint64_t digest = model.param_digest();
    auto inv = cvae_invert_latent(model, plus, iopts);
    CHECK(model.param_digest() == digest);
    Tensor gen = model.decode(inv.z, nullptr);
    CHECK(gen[0] == doctest::Approx(1.0).epsilon(0.35));
  }
  SUBCASE("kl collapse flag wiring") {
    CHECK(stats.final_mean_kl >= 0.0);
    CHECK(stats.kl_collapsed == (stats.final_mean_kl < 1e-3));
  }
}

TEST_CASE("baseline checkpoints round-trip") {
  Rng rng(3, 3);
  auto vocab = igen::ConceptVocabulary::build({"x"}, 16, 7);
  BcModel bc = BcModel::random_init(16, 24, 2, 32, rng);
  auto bc_ckpt = pack_bc(bc, vocab, "nav2d");
  BcModel bc2 = unpack_bc(bc_ckpt);
  CHECK(bc2.param_digest() == bc.param_digest());
  CHECK(bc2.state_dim == 24);

  CvaeModel cv = CvaeModel::random_init(64, 22, 16, 32, rng);
  auto cv_ckpt = pack_cvae(cv, "nav2d");
  CvaeModel cv2 = unpack_cvae(cv_ckpt);
  CHECK(cv2.param_digest() == cv.param_digest());
  CHECK(cv2.s0_dim == 22);
}
