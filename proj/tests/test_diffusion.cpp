#include <doctest.h>

#include <cmath>
#include <vector>

#include "igen/diffusion.hpp"
#include "igen/rng.hpp"

using igen::CompositionSpec;
using igen::CompositionTerm;
using igen::DiffusionSchedule;
using igen::Exec;
using igen::MlpDenoiser;
using igen::Rng;
using igen::SegmentLayout;
using igen::Tensor;

namespace {

Tensor randn(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

MlpDenoiser tiny_model(Rng& rng, int64_t x = 4, int64_t c = 3, int64_t s0 = 0) {
  SegmentLayout layout;
  layout.x_width = x;
  layout.concept_width = c;
  layout.s0_width = s0;
  layout.time_width = 8;
  return MlpDenoiser::random_init(layout, {16, 16}, rng);
}

}  // namespace

TEST_CASE("default schedule tables") {
  auto s = igen::default_schedule();
  s.validate();

  SUBCASE("alpha_bar product identity to 1e-12") {
    double prod = 1.0;
    for (int64_t t = 1; t <= 100; ++t) {
      prod *= 1.0 - s.beta_at(t);
      CHECK(std::fabs(prod - s.alpha_bar_at(t)) <= 1e-12);
    }
  }
  SUBCASE("endpoint values") {
    CHECK(s.beta_at(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta_at(100) == doctest::Approx(8.5e-2).epsilon(1e-12));
    CHECK(s.alpha_bar_at(100) == doctest::Approx(0.013).epsilon(0.05));
    // Single-factor product by hand at t=1.
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.alpha_bar_at(100) < 0.05);
  }
  SUBCASE("posterior variance: zero at t=1, positive after") {
    CHECK(s.posterior_var_at(1) == 0.0);
    for (int64_t t = 2; t <= 100; ++t) CHECK(s.posterior_var_at(t) > 0.0);
  }
  SUBCASE("malformed tables rejected") {
    CHECK_THROWS_AS(DiffusionSchedule::from_beta({0.2, 0.1}), igen::NumericError);
    CHECK_THROWS_AS(DiffusionSchedule::from_beta({0.0, 0.1}), igen::NumericError);
    CHECK_THROWS_AS(DiffusionSchedule::from_beta({0.5, 1.0}), igen::NumericError);
  }
}

TEST_CASE("forward noise") {
  auto s = igen::default_schedule();
  Rng rng(7, 1);
  Tensor x0 = Tensor::from({1.0, -2.0, 0.5});

  SUBCASE("zero-noise hook gives the pure signal scaling") {
    Tensor eps({3});
    Tensor x5 = forward_noise_given(s, x0, 5, eps);
    double sig = std::sqrt(s.alpha_bar_at(5));
    for (int64_t i = 0; i < 3; ++i) CHECK(x5[i] == sig * x0[i]);
  }
  SUBCASE("t = 1 scale factors") {
    Tensor eps = Tensor::from({1.0, 1.0, 1.0});
    Tensor x1 = forward_noise_given(s, x0, 1, eps);
    for (int64_t i = 0; i < 3; ++i) {
      CHECK(x1[i] == doctest::Approx(std::sqrt(0.9999) * x0[i] +
                                     std::sqrt(0.0001)).epsilon(1e-12));
    }
  }
  SUBCASE("t out of range") {
    CHECK_THROWS_AS(forward_noise(s, x0, 0, rng), igen::NumericError);
    CHECK_THROWS_AS(forward_noise(s, x0, 101, rng), igen::NumericError);
  }
  SUBCASE("empirical moments match the closed form within 3 sigma") {
    const int n = 100000;
    const int64_t t = 40;
    double abar = s.alpha_bar_at(t);
    double want_mean = std::sqrt(abar) * x0[0];
    double want_var = 1.0 - abar;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      auto fn = igen::forward_noise(s, x0, t, rng);
      sum += fn.x_t[0];
      sq += fn.x_t[0] * fn.x_t[0];
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    double mean_sigma = std::sqrt(want_var / n);
    double var_sigma = want_var * std::sqrt(2.0 / (n - 1));
    CHECK(std::fabs(mean - want_mean) < 3.0 * mean_sigma);
    CHECK(std::fabs(var - want_var) < 3.0 * var_sigma);
  }
}

TEST_CASE("composed single-step kernels match the closed-form marginal") {
  // Iterating x_s ~ N(sqrt(1-beta_s) x_{s-1}, beta_s I) up to t must agree
  // with q(x_t | x_0) in mean and variance (Monte-Carlo, 3 sigma).
  auto s = igen::default_schedule();
  Rng rng(99, 4);
  const double x0 = 1.7;
  const int n = 100000;
  for (int64_t t : {10, 100}) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = x0;
      for (int64_t step = 1; step <= t; ++step) {
        double b = s.beta_at(step);
        x = std::sqrt(1.0 - b) * x + std::sqrt(b) * rng.normal();
      }
      sum += x;
      sq += x * x;
    }
    double abar = s.alpha_bar_at(t);
    double want_mean = std::sqrt(abar) * x0;
    double want_var = 1.0 - abar;
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::fabs(mean - want_mean) < 3.0 * std::sqrt(want_var / n));
    CHECK(std::fabs(var - want_var) < 3.0 * want_var * std::sqrt(2.0 / (n - 1)));
  }
}

TEST_CASE("guided_eps composition") {
  Rng rng(12, 6);
  MlpDenoiser model = tiny_model(rng);
  Tensor x_t = randn(rng, {4});
  Tensor dummy = randn(rng, {3}, 0.3);
  Tensor ca = randn(rng, {3}, 0.3);
  Tensor cb = randn(rng, {3}, 0.3);
  const int64_t t = 9;

  auto eps_of = [&](const Tensor& c) { return model.forward(x_t, c, nullptr, t); };

  SUBCASE("K=1 is bitwise the two-call classifier-free guidance formula") {
    for (double w : {0.0, 0.37, 1.2, 1.8, -0.5}) {
      CompositionSpec spec;
      spec.terms = {{ca, w}};
      spec.dummy = dummy;
      Tensor got = guided_eps(model, x_t, t, nullptr, spec);
      Tensor e0 = eps_of(dummy);
      Tensor ec = eps_of(ca);
      Tensor want = e0.clone();
      for (int64_t i = 0; i < 4; ++i) want[i] += w * (ec[i] - e0[i]);
      CHECK(igen::bitwise_equal(got, want));
    }
  }
  SUBCASE("w=0 collapses to the unconditional prediction bitwise") {
    CompositionSpec spec;
    spec.terms = {{ca, 0.0}};
    spec.dummy = dummy;
    Tensor got = guided_eps(model, x_t, t, nullptr, spec);
    CHECK(igen::bitwise_equal(got, eps_of(dummy)));
  }
  SUBCASE("w=1 collapses to the conditional prediction") {
    CompositionSpec spec;
    spec.terms = {{ca, 1.0}};
    spec.dummy = dummy;
    Tensor got = guided_eps(model, x_t, t, nullptr, spec);
    Tensor want = eps_of(ca);
    for (int64_t i = 0; i < 4; ++i) {
      CHECK(std::fabs(got[i] - want[i]) <= 1e-14);
    }
  }
  SUBCASE("K=2 equals the hand-assembled term-by-term oracle") {
    CompositionSpec spec;
    spec.terms = {{ca, 1.0}, {cb, 1.0}};
    spec.dummy = dummy;
    Tensor got = guided_eps(model, x_t, t, nullptr, spec);
    Tensor e0 = eps_of(dummy);
    Tensor ea = eps_of(ca);
    Tensor eb = eps_of(cb);
    for (int64_t i = 0; i < 4; ++i) {
      double want = e0[i] + (ea[i] - e0[i]) + (eb[i] - e0[i]);
      CHECK(got[i] == doctest::Approx(want).epsilon(1e-15));
    }
  }
  SUBCASE("every term equal to the dummy is neutral for any weights") {
    CompositionSpec spec;
    spec.terms = {{dummy, 3.7}, {dummy, -2.0}};
    spec.dummy = dummy;
    Tensor got = guided_eps(model, x_t, t, nullptr, spec);
    CHECK(igen::bitwise_equal(got, eps_of(dummy)));
  }
  SUBCASE("exactly one unconditional plus K conditional calls") {
    int calls = 0;
    int dummy_calls = 0;
    igen::DenoiserFn counting = [&](const Tensor& x, const Tensor& c, int64_t step) {
      ++calls;
      if (igen::bitwise_equal(c, dummy)) ++dummy_calls;
      return model.forward(x, c, nullptr, step);
    };
    CompositionSpec spec;
    spec.terms = {{ca, 1.2}, {cb, 0.7}};
    spec.dummy = dummy;
    guided_eps(counting, x_t, t, spec);
    CHECK(calls == 3);
    CHECK(dummy_calls == 1);
  }
  SUBCASE("empty spec rejected") {
    CompositionSpec spec;
    spec.dummy = dummy;
    CHECK_THROWS_AS(guided_eps(model, x_t, t, nullptr, spec), igen::NumericError);
  }
}

TEST_CASE("reverse-process sampler") {
  Rng rng(21, 5);
  MlpDenoiser model = tiny_model(rng);
  auto s = igen::default_schedule();
  Tensor c = randn(rng, {3}, 0.3);
  Tensor dummy = randn(rng, {3}, 0.3);

  SUBCASE("temperature 0 is deterministic regardless of rng") {
    CompositionSpec spec;
    spec.terms = {{c, 1.0}};
    spec.dummy = dummy;
    spec.temperature = 0.0;
    Rng r1(1, 111);
    Rng r2(2, 999);
    Tensor a = igen::sample(model, s, spec, nullptr, r1);
    Tensor b = igen::sample(model, s, spec, nullptr, r2);
    CHECK(igen::bitwise_equal(a, b));
  }
  SUBCASE("same seed twice gives bit-identical outputs at temperature 0.5") {
    CompositionSpec spec;
    spec.terms = {{c, 1.2}};
    spec.dummy = dummy;
    spec.temperature = 0.5;
    Rng r1(5, 77);
    Rng r2(5, 77);
    Tensor a = igen::sample(model, s, spec, nullptr, r1);
    Tensor b = igen::sample(model, s, spec, nullptr, r2);
    CHECK(igen::bitwise_equal(a, b));
  }
  SUBCASE("untrained model keeps outputs inside the sanity envelope") {
    CompositionSpec spec;
    spec.terms = {{c, 1.2}};
    spec.dummy = dummy;
    spec.temperature = 0.5;
    Rng base = igen::make_rng(3, {"test", "envelope"});
    auto outs = igen::sample_batch(model, s, spec, nullptr, 100, base, Exec::Parallel);
    for (const auto& x : outs) {
      CHECK(x.all_finite());
      CHECK(x.max_abs() < 1e3);
    }
  }
  SUBCASE("sample_batch parallel matches serial bitwise") {
    CompositionSpec spec;
    spec.terms = {{c, 1.2}};
    spec.dummy = dummy;
    spec.temperature = 0.5;
    Rng base = igen::make_rng(4, {"test", "batch"});
    auto a = igen::sample_batch(model, s, spec, nullptr, 9, base, Exec::Serial);
    auto b = igen::sample_batch(model, s, spec, nullptr, 9, base, Exec::Parallel);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(igen::bitwise_equal(a[i], b[i]));
  }
}

TEST_CASE("training loss conditioning dropout") {
  Rng rng(33, 2);
  MlpDenoiser model = tiny_model(rng);
  auto s = igen::default_schedule();
  Tensor dummy = randn(rng, {3}, 0.3);

  std::vector<igen::TrainRow> rows;
  for (int i = 0; i < 8; ++i) {
    igen::TrainRow row;
    row.x0 = randn(rng, {4});
    row.concept_vec = randn(rng, {3}, 0.3);
    rows.push_back(std::move(row));
  }
  std::vector<const igen::TrainRow*> batch;
  for (const auto& r : rows) batch.push_back(&r);

  SUBCASE("p=0 never drops, p=1 always drops") {
    Rng r1(1, 1);
    auto a = igen::training_loss(model, s, batch, 0.0, dummy, r1, Exec::Serial);
    CHECK(a.dropped_rows == 0);
    Rng r2(1, 1);
    auto b = igen::training_loss(model, s, batch, 1.0, dummy, r2, Exec::Serial);
    CHECK(b.dropped_rows == 8);
  }
  SUBCASE("p=0.1 long-run drop frequency is 0.1 within 0.01") {
    Rng r(10, 3);
    int64_t dropped = 0;
    int64_t total = 0;
    for (int rep = 0; rep < 1250; ++rep) {  // 1250 * 8 = 1e4 rows
      auto res = igen::training_loss(model, s, batch, 0.1, dummy, r, Exec::Serial);
      dropped += res.dropped_rows;
      total += 8;
    }
    double freq = static_cast<double>(dropped) / static_cast<double>(total);
    CHECK(std::fabs(freq - 0.1) < 0.01);
  }
  SUBCASE("serial and parallel agree bitwise") {
    Rng r1(6, 6);
    Rng r2(6, 6);
    auto a = igen::training_loss(model, s, batch, 0.1, dummy, r1, Exec::Serial);
    auto b = igen::training_loss(model, s, batch, 0.1, dummy, r2, Exec::Parallel);
    CHECK(a.loss == b.loss);
    for (size_t p = 0; p < a.param_grads.size(); ++p) {
      CHECK(igen::bitwise_equal(a.param_grads[p], b.param_grads[p]));
    }
  }
  SUBCASE("empty batch rejected") {
    Rng r(1, 1);
    std::vector<const igen::TrainRow*> empty;
    CHECK_THROWS_AS(igen::training_loss(model, s, empty, 0.1, dummy, r, Exec::Serial),
                    igen::NumericError);
  }
}

TEST_CASE("a short training run reduces the denoising loss") {
  Rng rng(77, 1);
  SegmentLayout layout;
  layout.x_width = 4;
  layout.concept_width = 3;
  layout.time_width = 8;
  MlpDenoiser model = MlpDenoiser::random_init(layout, {32, 32}, rng);
  auto s = DiffusionSchedule::linear(50, 1e-4, 8.5e-2);
  Tensor dummy = randn(rng, {3}, 0.3);

  std::vector<igen::TrainRow> dataset;
  for (int i = 0; i < 64; ++i) {
    igen::TrainRow row;
    row.x0 = randn(rng, {4}, 0.5);
    row.concept_vec = randn(rng, {3}, 0.3);
    dataset.push_back(std::move(row));
  }
  igen::TrainOpts opts;
  opts.steps = 300;
  opts.batch_size = 16;
  opts.lr = 1e-3;
  opts.seed = 5;
  opts.exec = Exec::Parallel;
  auto stats = igen::train_denoiser(model, s, dataset, dummy, opts);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 30; ++i) head += stats.loss_trace[static_cast<size_t>(i)];
  for (size_t i = stats.loss_trace.size() - 30; i < stats.loss_trace.size(); ++i) {
    tail += stats.loss_trace[i];
  }
  CHECK(tail < head);
}
