#ifndef IGEN_PIPELINE_HPP_
#define IGEN_PIPELINE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "igen/baselines.hpp"
#include "igen/checkpoint.hpp"
#include "igen/concept_space.hpp"
#include "igen/config.hpp"
#include "igen/evalsuite.hpp"
#include "igen/nav2d.hpp"
#include "igen/rearrange.hpp"

namespace igen {

// Artifact layout under cfg.run.out.
struct Paths {
  std::string root;

  explicit Paths(std::string r) : root(std::move(r)) {}
  std::string data_dir(const std::string& domain) const {
    return root + "/data/" + domain;
  }
  std::string models_dir() const { return root + "/models"; }
  std::string inversions_dir(const std::string& domain) const {
    return root + "/inversions/" + domain;
  }
  std::string reports_dir() const { return root + "/reports"; }
  std::string render_dir() const { return root + "/render"; }
  std::string ckpt(const std::string& name) const {
    return models_dir() + "/" + name + ".ckpt";
  }
  std::string inversion_json(const std::string& domain, const std::string& task,
                             int64_t k, const std::string& omega_mode) const;
};

std::string slug(const std::string& name);

// ---------- dataset generation ----------

// Writes training JSONL per label, demo JSONL per new task, nav eval
// episode sets, and a manifest.json with counts and digests.
void cmd_gen_data(const Config& cfg, const std::string& domain);

// ---------- training ----------

// model: "diffusion" | "bc" | "cvae". Reads the domain's data dir, writes
// the checkpoint and a loss-trace CSV.
void cmd_train(const Config& cfg, const std::string& domain,
               const std::string& model, bool verbose);

// ---------- inversion ----------

// omega_mode: "learned" or a fixed value like "1.2". Returns the artifact
// path. Skips work when the artifact already exists (force re-runs).
// demos_path overrides the default demos/<task>.jsonl location.
std::string cmd_invert(const Config& cfg, const std::string& domain,
                       const std::string& task, int64_t k,
                       const std::string& omega_mode, bool force,
                       const std::string& demos_path = "");

// ---------- generation / rendering ----------

struct GenerateArgs {
  std::string domain;
  std::string label;           // condition on a vocabulary label...
  std::string inversion_path;  // ...or on a learned concept
  std::string compose_label;   // optional extra training concept term
  int64_t n = 8;
  std::string out_jsonl;
  bool render = false;
};
void cmd_generate(const Config& cfg, const GenerateArgs& args);

void cmd_render(const Config& cfg, const std::string& in_jsonl,
                const std::string& out_dir, int64_t limit);

// ---------- evaluation ----------

// Rearrangement accuracy for one composition spec against one eval label.
double rearr_spec_accuracy(const DenoiserBundle& bundle,
                           const CompositionSpec& spec, const LabelSpec& eval_label,
                           int64_t n, const Rng& rng, Exec exec);

struct EvaluateResult {
  AggregateScore score;
  std::string csv_path;
};

// setting: rearr-training | rearr-training-composition | rearr-new-concept |
//          rearr-new-plus-training | nav-training | nav-new-initial |
//          nav-closed-loop
EvaluateResult cmd_evaluate(const Config& cfg, const std::string& setting);

// Table-3 analog: K in {1,2} across the inversion settings of both domains
// (learned omega). Writes report_ablation.csv.
CsvTable cmd_ablate(const Config& cfg, const std::vector<int64_t>& ks);

// Table-6 analog: fixed omega grid plus learned, for one setting
// ("rearr-new-concept" or "rearr-new-plus-training").
CsvTable cmd_sweep(const Config& cfg, const std::string& setting,
                   const std::vector<std::string>& omega_modes);

// Table-4 analog: per-component accuracy on each constituent relation of a
// two-relation composition task.
struct ComponentScore {
  std::string constituent;
  std::vector<double> per_component;  // one accuracy per learned component
};
std::vector<ComponentScore> cmd_component_analysis(const Config& cfg,
                                                   const std::string& task,
                                                   const std::string& omega_mode);

// Diffusion vs BC vs CVAE on the shared settings; writes report_compare.csv.
CsvTable cmd_compare(const Config& cfg, const std::string& domain);

// PCA of the training vocabulary plus every learned rearrangement
// component currently on disk; writes pca_concepts.csv.
CsvTable cmd_pca(const Config& cfg);

// Nav2D closed-loop vs open-loop success on the training eval episodes.
struct ClosedLoopReport {
  double closed_success = 0.0;
  double open_success = 0.0;
  AggregateScore closed_per_task;
  AggregateScore open_per_task;
};
ClosedLoopReport cmd_nav_closed_loop(const Config& cfg);

// Writes reports/summary.json gathering digests and aggregate numbers
// accumulated by the commands above during this process.
void write_summary(const Config& cfg);

// Clears the in-process summary accumulator (used between pipeline runs).
void reset_summary();
void summary_note(const std::string& key, const std::string& value);

}  // namespace igen

#endif  // IGEN_PIPELINE_HPP_
