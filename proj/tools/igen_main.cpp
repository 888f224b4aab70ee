#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "igen/config.hpp"
#include "igen/error.hpp"
#include "igen/parallel.hpp"
#include "igen/pipeline.hpp"

namespace {

using igen::Config;

struct GlobalFlags {
  std::string config_path;
  std::vector<std::string> sets;  // section.key=value overrides
  bool have_seed = false;
  uint64_t seed = 0;
  std::string out;
  int64_t threads = -1;
};

void add_global_flags(CLI::App* cmd, GlobalFlags* g) {
  cmd->add_option("--config", g->config_path, "config file (flat key=value)");
  cmd->add_option("--set", g->sets, "override, e.g. --set train.steps=500")
      ->take_all();
  cmd->add_option("--seed", g->seed, "master seed (run.seed)");
  cmd->add_option("--out", g->out, "artifact root (run.out)");
  cmd->add_option("--threads", g->threads, "worker threads, 0 = all (run.threads)");
}

// defaults < config file < environment < flags.
Config resolve_config(const GlobalFlags& g, const CLI::App* cmd) {
  Config cfg = igen::default_config();
  if (!g.config_path.empty()) igen::apply_config_file(cfg, g.config_path);
  igen::apply_env_overrides(cfg);
  for (const auto& kv : g.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw igen::ConfigError("--set expects section.key=value, got '" + kv + "'");
    }
    igen::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed")) cfg.run.seed = g.seed;
  if (cmd->count("--out")) cfg.run.out = g.out;
  if (cmd->count("--threads")) cfg.run.threads = g.threads;
  igen::set_num_threads(static_cast<int>(cfg.resolved_threads()));
  return cfg;
}

void print_score(const std::string& what, const igen::AggregateScore& score) {
  if (score.sem_defined) {
    std::printf("%s: %.3f +- %.3f over %zu tasks\n", what.c_str(), score.mean,
                score.sem, score.per_task.size());
  } else {
    std::printf("%s: %.3f\n", what.c_str(), score.mean);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concept learning by inverting a trajectory diffusion model"};
  app.require_subcommand(0, 1);
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config, "print the default config and exit");

  GlobalFlags g;
  std::string domain = "rearrangement";
  std::string model_kind = "diffusion";
  std::string task;
  std::string setting;
  std::string omega;
  std::string demos_path;
  std::string label;
  std::string inversion_path;
  std::string compose_label;
  std::string in_path;
  std::string out_path;
  int64_t k = 0;
  int64_t steps = -1;
  int64_t n = -1;
  int64_t replan_every = -1;
  int64_t limit = 20;
  bool force = false;
  bool render = false;
  bool verbose = false;
  std::string sweep_grid = "1.2,1.4,1.6,1.8,learned";
  std::string ks = "1,2";

  auto* cmd_gen = app.add_subcommand("gen-data", "generate datasets + manifest");
  add_global_flags(cmd_gen, &g);
  cmd_gen->add_option("--domain", domain, "rearrangement | nav2d | all");

  auto* cmd_tr = app.add_subcommand("train", "train a model from the data dir");
  add_global_flags(cmd_tr, &g);
  cmd_tr->add_option("--domain", domain, "rearrangement | nav2d");
  cmd_tr->add_option("--model", model_kind, "diffusion | bc | cvae | all");
  cmd_tr->add_option("--steps", steps, "training steps override");
  cmd_tr->add_flag("--verbose", verbose, "log training loss");

  auto* cmd_inv = app.add_subcommand("invert", "learn concept components from demos");
  add_global_flags(cmd_inv, &g);
  cmd_inv->add_option("--domain", domain, "rearrangement | nav2d");
  cmd_inv->add_option("--task", task, "task label, e.g. 'square diagonal to triangle'")
      ->required();
  cmd_inv->add_option("--k", k, "number of concept components");
  cmd_inv->add_option("--omega", omega, "learned | 1.2 | 1.4 | 1.6 | 1.8");
  cmd_inv->add_option("--steps", steps, "optimization steps override");
  cmd_inv->add_option("--demos", demos_path, "demos JSONL override");
  cmd_inv->add_flag("--force", force, "re-run even if the artifact exists");

  auto* cmd_genr = app.add_subcommand("generate", "sample states/trajectories");
  add_global_flags(cmd_genr, &g);
  cmd_genr->add_option("--domain", domain, "rearrangement | nav2d");
  cmd_genr->add_option("--label", label, "condition on a training label");
  cmd_genr->add_option("--inversion", inversion_path, "condition on an inversion JSON");
  cmd_genr->add_option("--compose", compose_label, "extra training concept term");
  cmd_genr->add_option("--n", n, "sample count");
  cmd_genr->add_option("--out-file", out_path, "output JSONL path");
  cmd_genr->add_flag("--render", render, "also write SVGs");

  auto* cmd_roll = app.add_subcommand("rollout", "nav2d closed-loop evaluation");
  add_global_flags(cmd_roll, &g);
  cmd_roll->add_option("--replan-every", replan_every, "env steps between replans");

  auto* cmd_eval = app.add_subcommand("evaluate", "accuracy for one setting");
  add_global_flags(cmd_eval, &g);
  cmd_eval->add_option("--setting", setting,
                       "rearr-training | rearr-training-composition | "
                       "rearr-new-concept | rearr-new-plus-training | "
                       "nav-training | nav-new-initial | nav-demo-states | "
                       "nav-closed-loop")
      ->required();
  cmd_eval->add_option("--k", k, "inversion components (invert.k)");
  cmd_eval->add_option("--omega", omega, "inversion omega mode (invert.omega)");
  cmd_eval->add_option("--n", n, "samples per task (eval.n)");

  auto* cmd_abl = app.add_subcommand("ablate", "component-count grid (both domains)");
  add_global_flags(cmd_abl, &g);
  cmd_abl->add_option("--ks", ks, "comma list of K values");

  auto* cmd_sw = app.add_subcommand("sweep", "guidance-weight grid for one setting");
  add_global_flags(cmd_sw, &g);
  cmd_sw->add_option("--setting", setting,
                     "rearr-new-concept | rearr-new-plus-training")
      ->required();
  cmd_sw->add_option("--grid", sweep_grid, "comma list of omega modes");
  cmd_sw->add_option("--k", k, "inversion components");

  auto* cmd_cmp = app.add_subcommand("compare", "diffusion vs bc vs cvae");
  add_global_flags(cmd_cmp, &g);
  cmd_cmp->add_option("--domain", domain, "rearrangement | nav2d");

  auto* cmd_comp = app.add_subcommand("component-analysis",
                                      "per-component constituent accuracies");
  add_global_flags(cmd_comp, &g);
  cmd_comp->add_option("--task", task, "two-relation composition task")->required();
  cmd_comp->add_option("--omega", omega, "inversion omega mode");
  cmd_comp->add_option("--k", k, "inversion components");

  auto* cmd_pca_app = app.add_subcommand("pca", "2D projection of concept space");
  add_global_flags(cmd_pca_app, &g);

  auto* cmd_rend = app.add_subcommand("render", "JSONL records to SVG");
  add_global_flags(cmd_rend, &g);
  cmd_rend->add_option("--in", in_path, "input JSONL")->required();
  cmd_rend->add_option("--out-dir", out_path, "output directory");
  cmd_rend->add_option("--limit", limit, "max records to draw");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_config) {
      std::fputs(igen::dump_config(igen::default_config()).c_str(), stdout);
      return igen::kExitOk;
    }
    if (app.get_subcommands().empty()) {
      std::fputs(app.help().c_str(), stdout);
      return igen::kExitOk;
    }
    CLI::App* sub = app.get_subcommands().front();
    Config cfg = resolve_config(g, sub);

    if (sub == cmd_gen) {
      igen::cmd_gen_data(cfg, domain);
      std::printf("datasets written under %s/data\n", cfg.run.out.c_str());
    } else if (sub == cmd_tr) {
      if (steps > 0) cfg.train.steps = steps;
      if (model_kind == "all") {
        for (const char* m : {"diffusion", "bc", "cvae"}) {
          igen::cmd_train(cfg, domain, m, verbose);
        }
      } else {
        igen::cmd_train(cfg, domain, model_kind, verbose);
      }
      std::printf("checkpoints written under %s/models\n", cfg.run.out.c_str());
    } else if (sub == cmd_inv) {
      if (steps > 0) cfg.invert.steps = steps;
      if (k > 0) cfg.invert.k = k;
      if (!omega.empty()) cfg.invert.omega = omega;
      std::string path = igen::cmd_invert(cfg, domain, task, cfg.invert.k,
                                          cfg.invert.omega, force, demos_path);
      std::printf("inversion written to %s\n", path.c_str());
    } else if (sub == cmd_genr) {
      igen::GenerateArgs args;
      args.domain = domain;
      args.label = label;
      args.inversion_path = inversion_path;
      args.compose_label = compose_label;
      if (n > 0) args.n = n;
      args.out_jsonl = out_path;
      args.render = render;
      igen::cmd_generate(cfg, args);
      std::printf("samples written\n");
    } else if (sub == cmd_roll) {
      if (replan_every > 0) cfg.rollout.replan_every = replan_every;
      auto rep = igen::cmd_nav_closed_loop(cfg);
      std::printf("closed-loop success %.3f, open-loop success %.3f\n",
                  rep.closed_success, rep.open_success);
    } else if (sub == cmd_eval) {
      if (k > 0) cfg.invert.k = k;
      if (!omega.empty()) cfg.invert.omega = omega;
      if (n > 0) cfg.eval.n = n;
      auto res = igen::cmd_evaluate(cfg, setting);
      print_score(setting, res.score);
      std::printf("report: %s\n", res.csv_path.c_str());
    } else if (sub == cmd_abl) {
      std::vector<int64_t> kvals;
      std::string item;
      for (char c : ks + ",") {
        if (c == ',') {
          if (!item.empty()) kvals.push_back(std::stoll(item));
          item.clear();
        } else {
          item += c;
        }
      }
      igen::cmd_ablate(cfg, kvals);
      std::printf("report: %s/reports/report_ablation.csv\n", cfg.run.out.c_str());
    } else if (sub == cmd_sw) {
      if (k > 0) cfg.invert.k = k;
      std::vector<std::string> modes;
      std::string item;
      for (char c : sweep_grid + ",") {
        if (c == ',') {
          if (!item.empty()) modes.push_back(item);
          item.clear();
        } else {
          item += c;
        }
      }
      igen::cmd_sweep(cfg, setting, modes);
      std::printf("sweep report written\n");
    } else if (sub == cmd_cmp) {
      igen::cmd_compare(cfg, domain);
      std::printf("report: %s/reports/report_compare_%s.csv\n",
                  cfg.run.out.c_str(), domain.c_str());
    } else if (sub == cmd_comp) {
      if (k > 0) cfg.invert.k = k;
      std::string mode = omega.empty() ? cfg.invert.omega : omega;
      auto scores = igen::cmd_component_analysis(cfg, task, mode);
      for (const auto& cs : scores) {
        std::printf("%s:", cs.constituent.c_str());
        for (double a : cs.per_component) std::printf(" %.2f", a);
        std::printf("\n");
      }
    } else if (sub == cmd_pca_app) {
      igen::cmd_pca(cfg);
      std::printf("report: %s/reports/pca_concepts.csv\n", cfg.run.out.c_str());
    } else if (sub == cmd_rend) {
      std::string dir = out_path.empty() ? igen::Paths(cfg.run.out).render_dir()
                                         : out_path;
      igen::cmd_render(cfg, in_path, dir, limit);
      std::printf("svg written under %s\n", dir.c_str());
    }
    igen::write_summary(cfg);
    return igen::kExitOk;
  } catch (const igen::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return igen::kExitConfigError;
  } catch (const igen::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return igen::kExitNumericError;
  } catch (const igen::BudgetError& e) {
    std::fprintf(stderr, "budget exhausted: %s\n", e.what());
    return igen::kExitBudgetExhausted;
  } catch (const igen::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return igen::kExitIoError;
  }
}
