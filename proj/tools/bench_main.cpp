// Compares the serial reference kernels against the OpenMP paths and
// verifies they agree bitwise. Build target: igen-bench.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "igen/concept_space.hpp"
#include "igen/diffusion.hpp"
#include "igen/mlp.hpp"
#include "igen/parallel.hpp"
#include "igen/rng.hpp"

using igen::Exec;
using igen::Rng;
using igen::Tensor;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class Fn>
double time_best_ms(int reps, const Fn& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

struct Row {
  std::string name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-28s %12s %12s %9s %10s\n", "kernel", "serial ms", "openmp ms",
              "speedup", "bitwise");
  for (const auto& r : rows) {
    std::printf("%-28s %12.2f %12.2f %8.2fx %10s\n", r.name.c_str(),
                r.serial_ms, r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.identical ? "equal" : "DIFFER");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel comparison"};
  int rows_n = 64;
  int reps = 5;
  int chains = 16;
  app.add_option("--rows", rows_n, "batch rows for forward/grad kernels");
  app.add_option("--reps", reps, "repetitions (best-of timing)");
  app.add_option("--chains", chains, "sampler chains");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads available: %d\n\n", igen::hardware_threads());

  Rng rng(1, 1);
  igen::SegmentLayout layout;
  layout.x_width = 21;
  layout.concept_width = 16;
  layout.time_width = 32;
  igen::MlpDenoiser model = igen::MlpDenoiser::random_init(layout, {512, 512}, rng);
  const igen::Mlp& net = model.net();

  Tensor inputs({rows_n, net.in_width()});
  Tensor targets({rows_n, net.out_width()});
  for (int64_t i = 0; i < inputs.size(); ++i) inputs[i] = rng.normal();
  for (int64_t i = 0; i < targets.size(); ++i) targets[i] = rng.normal();

  std::vector<Row> table;

  {
    Tensor out_s, out_p;
    double ts = time_best_ms(reps, [&] { out_s = mlp_batch_forward(net, inputs, Exec::Serial); });
    double tp = time_best_ms(reps, [&] { out_p = mlp_batch_forward(net, inputs, Exec::Parallel); });
    table.push_back({"batch_forward", ts, tp, igen::bitwise_equal(out_s, out_p)});
  }
  {
    igen::GradRequest req;
    req.params = true;
    igen::BatchLoss ls, lp;
    double ts = time_best_ms(reps, [&] { ls = mlp_batch_mse(net, inputs, targets, req, Exec::Serial); });
    double tp = time_best_ms(reps, [&] { lp = mlp_batch_mse(net, inputs, targets, req, Exec::Parallel); });
    bool same = ls.loss == lp.loss;
    for (size_t p = 0; p < ls.param_grads.size(); ++p) {
      same = same && igen::bitwise_equal(ls.param_grads[p], lp.param_grads[p]);
    }
    table.push_back({"batch_mse_param_grads", ts, tp, same});
  }
  {
    auto sched = igen::default_schedule();
    igen::CompositionSpec spec;
    Tensor c({16}), d({16});
    for (int64_t i = 0; i < 16; ++i) {
      c[i] = rng.uniform();
      d[i] = rng.uniform();
    }
    spec.terms = {{c, 1.2}};
    spec.dummy = d;
    spec.temperature = 0.5;
    Rng base = igen::make_rng(7, {"bench", "chains"});
    std::vector<Tensor> outs_s, outs_p;
    double ts = time_best_ms(1, [&] {
      outs_s = sample_batch(model, sched, spec, nullptr, chains, base, Exec::Serial);
    });
    double tp = time_best_ms(1, [&] {
      outs_p = sample_batch(model, sched, spec, nullptr, chains, base, Exec::Parallel);
    });
    bool same = outs_s.size() == outs_p.size();
    for (size_t i = 0; same && i < outs_s.size(); ++i) {
      same = igen::bitwise_equal(outs_s[i], outs_p[i]);
    }
    table.push_back({"sample_batch", ts, tp, same});
  }
  {
    auto sched = igen::default_schedule();
    std::vector<igen::Demo> demos;
    Rng drng(3, 3);
    for (int i = 0; i < 5; ++i) {
      igen::Demo demo;
      demo.x0 = Tensor({21});
      for (int64_t j = 0; j < 21; ++j) demo.x0[j] = drng.normal();
      demos.push_back(std::move(demo));
    }
    Tensor dummy({16});
    for (int64_t i = 0; i < 16; ++i) dummy[i] = drng.uniform();
    igen::InversionOpts opts;
    opts.k = 2;
    opts.steps = 10;
    opts.noise_per_demo = 16;
    opts.seed = 5;
    igen::InversionResult rs, rp;
    opts.exec = Exec::Serial;
    double ts = time_best_ms(1, [&] { rs = invert(model, sched, dummy, demos, opts); });
    opts.exec = Exec::Parallel;
    double tp = time_best_ms(1, [&] { rp = invert(model, sched, dummy, demos, opts); });
    bool same = rs.loss_trace == rp.loss_trace;
    for (size_t k = 0; k < rs.components.size(); ++k) {
      same = same && igen::bitwise_equal(rs.components[k], rp.components[k]);
      same = same && rs.weights[k] == rp.weights[k];
    }
    table.push_back({"invert_10steps_k2", ts, tp, same});
  }

  print_rows(table);

  bool all_equal = true;
  for (const auto& r : table) all_equal = all_equal && r.identical;
  if (!all_equal) {
    std::fprintf(stderr, "serial and parallel kernels disagree\n");
    return 1;
  }
  return 0;
}
