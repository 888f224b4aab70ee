#include "igen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include <json.hpp>

#include "igen/dataset.hpp"
#include "igen/digest.hpp"
#include "igen/diffusion.hpp"
#include "igen/normalize.hpp"
#include "igen/svg.hpp"

namespace igen {

namespace fs = std::filesystem;

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c == ' ') {
      out += '_';
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
               c == '-' || c == '_') {
      out += c;
    }
  }
  return out;
}

std::string Paths::inversion_json(const std::string& domain,
                                  const std::string& task, int64_t k,
                                  const std::string& omega_mode) const {
  std::string mode = omega_mode == "learned" ? "learned" : "w" + omega_mode;
  return inversions_dir(domain) + "/" + slug(task) + "__k" +
         std::to_string(k) + "__" + mode + ".json";
}

// ---------------------------------------------------------------------------
// summary accumulator

namespace {

std::map<std::string, std::string>& summary_map() {
  static std::map<std::string, std::string> m;
  return m;
}

}  // namespace

void reset_summary() { summary_map().clear(); }

void summary_note(const std::string& key, const std::string& value) {
  summary_map()[key] = value;
}

void write_summary(const Config& cfg) {
  Paths paths(cfg.run.out);
  nlohmann::json j;
  j["seed"] = cfg.run.seed;
  for (const auto& kv : summary_map()) j[kv.first] = kv.second;
  fs::create_directories(paths.reports_dir());
  atomic_write_file(paths.reports_dir() + "/summary.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// shared plumbing

namespace {

DiffusionSchedule schedule_from(const Config& cfg) {
  return DiffusionSchedule::linear(cfg.schedule.steps, cfg.schedule.beta_start,
                                   cfg.schedule.beta_end);
}

std::vector<int64_t> hidden_from(const Config& cfg) {
  std::vector<int64_t> hidden;
  std::string item;
  for (char c : cfg.model.hidden + ",") {
    if (c == ',') {
      if (!item.empty()) hidden.push_back(std::stoll(item));
      item.clear();
    } else {
      item += c;
    }
  }
  if (hidden.empty()) throw ConfigError("model.hidden is empty");
  return hidden;
}

ConceptVocabulary vocab_for(const Config& cfg, const std::string& domain) {
  std::vector<std::string> labels = domain == "rearrangement"
                                        ? rearrange_training_label_names()
                                        : nav2d_training_label_names();
  return ConceptVocabulary::build(labels, cfg.model.concept_dim,
                                  cfg.model.embed_seed);
}

void check_domain(const std::string& domain) {
  if (domain != "rearrangement" && domain != "nav2d") {
    throw ConfigError("unknown domain '" + domain + "'");
  }
}

// Digest over the train/ files of a domain, order-independent input set.
uint64_t data_digest_for(const Paths& paths, const std::string& domain) {
  std::string dir = paths.data_dir(domain) + "/train";
  if (!fs::exists(dir)) throw IoError("missing dataset dir " + dir + " (run gen-data)");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  Fnv1a64 h;
  for (const auto& f : files) {
    h.update(fs::path(f).filename().string());
    uint64_t d = file_digest(f);
    h.update(&d, sizeof(d));
  }
  return h.value();
}

struct LoadedBundle {
  DenoiserBundle bundle;
  uint64_t model_digest = 0;
  uint64_t data_digest = 0;
  Normalizer state_norm;  // rearr: scene; nav: traj (x) normalizer
  Normalizer s0_norm;     // nav only
};

LoadedBundle load_bundle(const Config& cfg, const std::string& domain) {
  check_domain(domain);
  Paths paths(cfg.run.out);
  std::string path = paths.ckpt(domain);
  if (!fs::exists(path)) throw IoError("missing checkpoint " + path + " (run train)");
  LoadedBundle lb;
  lb.bundle = unpack_denoiser(Checkpoint::load(path));
  if (lb.bundle.domain != domain) {
    throw IoError("checkpoint domain mismatch for " + path);
  }
  lb.model_digest = lb.bundle.model.param_digest();
  lb.data_digest = data_digest_for(paths, domain);
  lb.state_norm = domain == "rearrangement" ? rearrange_normalizer()
                                            : nav2d_traj_normalizer();
  lb.s0_norm = nav2d_state_normalizer();
  return lb;
}

Nav2dGenOpts nav_gen_opts(const Config& cfg) {
  Nav2dGenOpts opts;
  opts.v_max = cfg.rollout.v_max;
  opts.arrival_radius = cfg.rollout.arrival_radius;
  return opts;
}

DatasetRecord record_from_scene(const Scene& scene, const std::string& label,
                                uint64_t seed, int64_t index) {
  DatasetRecord rec;
  rec.domain = "rearrangement";
  rec.label = label;
  auto flat = scene.flatten();
  rec.traj = {std::vector<double>(flat.begin(), flat.end())};
  rec.gen_seed = seed;
  rec.index = index;
  return rec;
}

DatasetRecord record_from_episode(const Nav2dEpisode& ep, const std::string& label,
                                  uint64_t seed, int64_t index) {
  DatasetRecord rec;
  rec.domain = "nav2d";
  rec.label = label;
  Tensor s0 = ep.s0_tensor();
  rec.s0 = std::vector<double>(s0.data(), s0.data() + s0.size());
  for (const auto& xy : ep.traj) rec.traj.push_back({xy[0], xy[1]});
  rec.gen_seed = seed;
  rec.index = index;
  return rec;
}

Nav2dEpisode episode_from_record(const DatasetRecord& rec) {
  if (!rec.s0 || rec.s0->size() != Nav2dEpisode::kStateWidth) {
    throw IoError("nav2d record missing s0");
  }
  Nav2dEpisode ep;
  const std::vector<double>& s0 = *rec.s0;
  ep.agent_x = s0[0];
  ep.agent_y = s0[1];
  for (int i = 0; i < 2; ++i) {
    size_t base = 2 + 10 * static_cast<size_t>(i);
    Nav2dObject& o = ep.objects[static_cast<size_t>(i)];
    o.x = s0[base];
    o.y = s0[base + 1];
    for (int c = 0; c < kNavColorCount; ++c) {
      if (s0[base + 2 + static_cast<size_t>(c)] > 0.5) o.color = c;
    }
    for (int s = 0; s < kNavShapeCount; ++s) {
      if (s0[base + 6 + static_cast<size_t>(s)] > 0.5) o.shape = s;
    }
  }
  for (const auto& row : rec.traj) {
    ep.traj.push_back({row[0], row[1]});
  }
  Nav2dLabel label = parse_nav_label(rec.label);
  ep.target_slot = nav_label_matches(label, ep.objects[0]) ? 0 : 1;
  return ep;
}

std::string demo_file(const Paths& paths, const std::string& domain,
                      const std::string& task) {
  return paths.data_dir(domain) + "/demos/" + slug(task) + ".jsonl";
}

std::string eval_file(const Paths& paths, const std::string& prefix,
                      const std::string& task) {
  return paths.data_dir("nav2d") + "/eval/" + prefix + "_" + slug(task) + ".jsonl";
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data

namespace {

void gen_rearr_data(const Config& cfg) {
  Paths paths(cfg.run.out);
  std::string dir = paths.data_dir("rearrangement");
  nlohmann::json manifest;
  manifest["domain"] = "rearrangement";
  manifest["seed"] = cfg.run.seed;

  RearrangeGenOpts train_opts;
  int64_t total = 0;
  for (const auto& name : rearrange_training_label_names()) {
    LabelSpec label = parse_label(name);
    Rng rng = make_rng(cfg.run.seed, {"gen", "rearrangement", name});
    GenReport report;
    auto scenes = gen_rearrangement(label, cfg.data.rearr_samples_per_label,
                                    rng, train_opts, &report);
    std::vector<DatasetRecord> recs;
    for (size_t i = 0; i < scenes.size(); ++i) {
      recs.push_back(record_from_scene(scenes[i], name, cfg.run.seed,
                                       static_cast<int64_t>(i)));
    }
    std::string file = dir + "/train/" + slug(name) + ".jsonl";
    write_jsonl(file, recs);
    total += static_cast<int64_t>(recs.size());
    manifest["train"][name] = {
        {"count", recs.size()},
        {"acceptance_rate", report.acceptance_rate()},
        {"digest", hex64(file_digest(file))}};
  }
  manifest["train_total"] = total;

  RearrangeGenOpts demo_opts;
  demo_opts.filter_incidental = true;
  std::set<std::string> demo_labels;
  for (const auto& task : rearrange_new_tasks()) demo_labels.insert(task.demo_label);
  for (const auto& name : demo_labels) {
    LabelSpec label = parse_label(name);
    Rng rng = make_rng(cfg.run.seed, {"gen", "rearrangement-demo", name});
    GenReport report;
    auto scenes =
        gen_rearrangement(label, cfg.data.demos_per_task, rng, demo_opts, &report);
    std::vector<DatasetRecord> recs;
    for (size_t i = 0; i < scenes.size(); ++i) {
      recs.push_back(record_from_scene(scenes[i], name, cfg.run.seed,
                                       static_cast<int64_t>(i)));
    }
    std::string file = demo_file(paths, "rearrangement", name);
    write_jsonl(file, recs);
    manifest["demos"][name] = {
        {"count", recs.size()},
        {"acceptance_rate", report.acceptance_rate()},
        {"digest", hex64(file_digest(file))}};
  }
  atomic_write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
  summary_note("data.rearrangement.total", std::to_string(total));
}

void gen_nav_data(const Config& cfg) {
  Paths paths(cfg.run.out);
  std::string dir = paths.data_dir("nav2d");
  nlohmann::json manifest;
  manifest["domain"] = "nav2d";
  manifest["seed"] = cfg.run.seed;
  Nav2dGenOpts opts = nav_gen_opts(cfg);

  auto write_set = [&](const std::string& file, const std::string& label_name,
                       int64_t count, const char* tag) {
    Nav2dLabel label = parse_nav_label(label_name);
    Rng rng = make_rng(cfg.run.seed, {"gen", tag, label_name});
    GenReport report;
    auto episodes = gen_nav2d(label, count, rng, opts, &report);
    std::vector<DatasetRecord> recs;
    for (size_t i = 0; i < episodes.size(); ++i) {
      recs.push_back(record_from_episode(episodes[i], label_name, cfg.run.seed,
                                         static_cast<int64_t>(i)));
    }
    write_jsonl(file, recs);
    return nlohmann::json{{"count", recs.size()},
                          {"acceptance_rate", report.acceptance_rate()},
                          {"digest", hex64(file_digest(file))}};
  };

  int64_t total = 0;
  for (const auto& name : nav2d_training_label_names()) {
    manifest["train"][name] =
        write_set(dir + "/train/" + slug(name) + ".jsonl", name,
                  cfg.data.nav_samples_per_label, "nav2d");
    total += cfg.data.nav_samples_per_label;
    manifest["eval_train"][name] = write_set(
        eval_file(paths, "train", name), name, cfg.eval.n, "nav2d-eval");
  }
  manifest["train_total"] = total;
  for (const auto& name : nav2d_new_task_names()) {
    manifest["demos"][name] = write_set(demo_file(paths, "nav2d", name), name,
                                        cfg.data.demos_per_task, "nav2d-demo");
    manifest["eval_new"][name] = write_set(eval_file(paths, "new", name), name,
                                           cfg.eval.n, "nav2d-eval-new");
  }
  atomic_write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
  summary_note("data.nav2d.total", std::to_string(total));
}

}  // namespace

void cmd_gen_data(const Config& cfg, const std::string& domain) {
  if (domain == "all") {
    gen_rearr_data(cfg);
    gen_nav_data(cfg);
    return;
  }
  check_domain(domain);
  if (domain == "rearrangement") {
    gen_rearr_data(cfg);
  } else {
    gen_nav_data(cfg);
  }
}

// ---------------------------------------------------------------------------
// training

namespace {

std::vector<DatasetRecord> read_train_records(const Paths& paths,
                                              const std::string& domain) {
  std::string dir = paths.data_dir(domain) + "/train";
  if (!fs::exists(dir)) throw IoError("missing dataset dir " + dir + " (run gen-data)");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<DatasetRecord> recs;
  for (const auto& f : files) {
    auto part = read_jsonl(f);
    recs.insert(recs.end(), part.begin(), part.end());
  }
  if (recs.empty()) throw IoError("no training records under " + dir);
  return recs;
}

std::vector<TrainRow> diffusion_rows(const std::vector<DatasetRecord>& recs,
                                     const std::string& domain,
                                     const ConceptVocabulary& vocab) {
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  Normalizer snorm = nav2d_state_normalizer();
  std::vector<TrainRow> rows;
  rows.reserve(recs.size());
  for (const auto& rec : recs) {
    TrainRow row;
    if (domain == "rearrangement") {
      row.x0 = xnorm.normalize(Tensor::from(rec.traj[0]));
    } else {
      std::vector<double> flat;
      for (const auto& xy : rec.traj) {
        flat.push_back(xy[0]);
        flat.push_back(xy[1]);
      }
      row.x0 = xnorm.normalize(Tensor::from(std::move(flat)));
      row.s0 = snorm.normalize(Tensor::from(*rec.s0));
      row.has_s0 = true;
    }
    row.concept_vec = vocab.embed(rec.label).clone();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_loss_csv(const std::string& path, const std::vector<double>& trace,
                    int64_t every) {
  CsvTable csv;
  csv.header = {"step", "loss"};
  for (size_t i = 0; i < trace.size(); i += static_cast<size_t>(every)) {
    csv.rows.push_back({std::to_string(i), csv_metric(trace[i])});
  }
  if (!trace.empty()) {
    csv.rows.push_back({std::to_string(trace.size() - 1), csv_metric(trace.back())});
  }
  csv.write(path);
}

void train_diffusion(const Config& cfg, const std::string& domain, bool verbose) {
  Paths paths(cfg.run.out);
  auto recs = read_train_records(paths, domain);
  ConceptVocabulary vocab = vocab_for(cfg, domain);
  auto rows = diffusion_rows(recs, domain, vocab);
  DiffusionSchedule sched = schedule_from(cfg);

  SegmentLayout layout;
  layout.x_width = rows[0].x0.size();
  layout.concept_width = cfg.model.concept_dim;
  layout.s0_width = rows[0].has_s0 ? rows[0].s0.size() : 0;
  layout.time_width = cfg.model.time_dim;
  Rng init = make_rng(cfg.run.seed, {"init", domain});
  MlpDenoiser model = MlpDenoiser::random_init(layout, hidden_from(cfg), init);

  TrainOpts opts;
  opts.steps = cfg.train.steps;
  opts.batch_size = cfg.train.batch;
  opts.lr = cfg.train.lr;
  opts.weight_decay = cfg.train.weight_decay;
  opts.p_drop = cfg.train.p_drop;
  opts.seed = cfg.run.seed;
  opts.exec = cfg.exec();
  opts.log_every = cfg.train.log_every;
  opts.verbose = verbose;
  TrainStats stats = train_denoiser(model, sched, rows, vocab.dummy(), opts);

  fs::create_directories(paths.models_dir());
  pack_denoiser(model, sched, vocab, domain).save(paths.ckpt(domain));
  write_loss_csv(paths.models_dir() + "/train_loss_" + domain + ".csv",
                 stats.loss_trace, std::max<int64_t>(1, cfg.train.log_every));
  summary_note("model." + domain + ".digest", hex64(model.param_digest()));
  summary_note("model." + domain + ".final_loss",
               csv_metric(stats.loss_trace.back()));
}

// BC supervision pairs per domain (normalized spaces).
std::vector<BcPair> bc_pairs_from_records(const std::vector<DatasetRecord>& recs,
                                          const std::string& domain,
                                          const ConceptVocabulary& vocab) {
  std::vector<BcPair> pairs;
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  Normalizer snorm = nav2d_state_normalizer();
  for (const auto& rec : recs) {
    const Tensor& cond = vocab.embed(rec.label);
    if (domain == "rearrangement") {
      BcPair p;
      p.cond = cond.clone();
      p.next = xnorm.normalize(Tensor::from(rec.traj[0]));
      pairs.push_back(std::move(p));
      continue;
    }
    Tensor s0n = snorm.normalize(Tensor::from(*rec.s0));
    for (size_t t = 0; t + 1 < rec.traj.size(); ++t) {
      BcPair p;
      p.cond = cond.clone();
      p.state = Tensor({Nav2dEpisode::kStateWidth + 2});
      std::memcpy(p.state.data(), s0n.data(),
                  sizeof(double) * Nav2dEpisode::kStateWidth);
      // Positions share the [0,5] -> [-1,1] map.
      p.state[Nav2dEpisode::kStateWidth] = rec.traj[t][0] * 0.4 - 1.0;
      p.state[Nav2dEpisode::kStateWidth + 1] = rec.traj[t][1] * 0.4 - 1.0;
      p.next = Tensor::from(
          {rec.traj[t + 1][0] * 0.4 - 1.0, rec.traj[t + 1][1] * 0.4 - 1.0});
      p.has_state = true;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

void train_bc(const Config& cfg, const std::string& domain) {
  Paths paths(cfg.run.out);
  auto recs = read_train_records(paths, domain);
  ConceptVocabulary vocab = vocab_for(cfg, domain);
  auto pairs = bc_pairs_from_records(recs, domain, vocab);

  Rng init = make_rng(cfg.run.seed, {"init", "bc", domain});
  int64_t state_dim = domain == "rearrangement" ? 0 : Nav2dEpisode::kStateWidth + 2;
  int64_t out_dim = domain == "rearrangement" ? Scene::kFlatWidth : 2;
  BcModel model = BcModel::random_init(cfg.model.concept_dim, state_dim, out_dim,
                                       512, init);
  BcTrainOpts opts;
  opts.steps = cfg.bc.steps;
  opts.batch = cfg.bc.batch;
  opts.lr = cfg.bc.lr;
  opts.seed = cfg.run.seed;
  opts.exec = cfg.exec();
  auto trace = bc_train(model, pairs, opts);

  fs::create_directories(paths.models_dir());
  pack_bc(model, vocab, domain).save(paths.ckpt("bc_" + domain));
  write_loss_csv(paths.models_dir() + "/train_loss_bc_" + domain + ".csv", trace,
                 500);
  summary_note("model.bc_" + domain + ".digest", hex64(model.param_digest()));
}

std::vector<CvaeRow> cvae_rows_from_records(const std::vector<DatasetRecord>& recs,
                                            const std::string& domain) {
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  Normalizer snorm = nav2d_state_normalizer();
  std::vector<CvaeRow> rows;
  for (const auto& rec : recs) {
    CvaeRow row;
    if (domain == "rearrangement") {
      row.x = xnorm.normalize(Tensor::from(rec.traj[0]));
    } else {
      std::vector<double> flat;
      for (const auto& xy : rec.traj) {
        flat.push_back(xy[0]);
        flat.push_back(xy[1]);
      }
      row.x = xnorm.normalize(Tensor::from(std::move(flat)));
      row.s0 = snorm.normalize(Tensor::from(*rec.s0));
      row.has_s0 = true;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void train_cvae(const Config& cfg, const std::string& domain) {
  Paths paths(cfg.run.out);
  auto recs = read_train_records(paths, domain);
  auto rows = cvae_rows_from_records(recs, domain);

  Rng init = make_rng(cfg.run.seed, {"init", "cvae", domain});
  int64_t x_dim = rows[0].x.size();
  int64_t s0_dim = rows[0].has_s0 ? rows[0].s0.size() : 0;
  CvaeModel model =
      CvaeModel::random_init(x_dim, s0_dim, cfg.cvae.latent_dim, 512, init);
  CvaeTrainOpts opts;
  opts.steps = cfg.cvae.steps;
  opts.batch = cfg.cvae.batch;
  opts.lr = cfg.cvae.lr;
  opts.kl_weight = cfg.cvae.kl_weight;
  opts.seed = cfg.run.seed;
  opts.exec = cfg.exec();
  auto stats = cvae_train(model, rows, opts);

  fs::create_directories(paths.models_dir());
  pack_cvae(model, domain).save(paths.ckpt("cvae_" + domain));
  write_loss_csv(paths.models_dir() + "/train_loss_cvae_" + domain + ".csv",
                 stats.loss_trace, 500);
  summary_note("model.cvae_" + domain + ".digest", hex64(model.param_digest()));
  summary_note("model.cvae_" + domain + ".kl_collapsed",
               stats.kl_collapsed ? "true" : "false");
}

}  // namespace

void cmd_train(const Config& cfg, const std::string& domain,
               const std::string& model, bool verbose) {
  check_domain(domain);
  if (model == "diffusion") {
    train_diffusion(cfg, domain, verbose);
  } else if (model == "bc") {
    train_bc(cfg, domain);
  } else if (model == "cvae") {
    train_cvae(cfg, domain);
  } else {
    throw ConfigError("unknown model kind '" + model + "'");
  }
}

// ---------------------------------------------------------------------------
// inversion

namespace {

std::vector<Demo> load_demos(const Config& cfg, const std::string& domain,
                             const std::string& task,
                             const std::string& override_path = "") {
  Paths paths(cfg.run.out);
  std::string file =
      override_path.empty() ? demo_file(paths, domain, task) : override_path;
  if (!fs::exists(file)) throw IoError("missing demos " + file + " (run gen-data)");
  auto recs = read_jsonl(file);
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  Normalizer snorm = nav2d_state_normalizer();
  std::vector<Demo> demos;
  for (const auto& rec : recs) {
    Demo d;
    if (domain == "rearrangement") {
      d.x0 = xnorm.normalize(Tensor::from(rec.traj[0]));
    } else {
      std::vector<double> flat;
      for (const auto& xy : rec.traj) {
        flat.push_back(xy[0]);
        flat.push_back(xy[1]);
      }
      d.x0 = xnorm.normalize(Tensor::from(std::move(flat)));
      d.s0 = snorm.normalize(Tensor::from(*rec.s0));
      d.has_s0 = true;
    }
    demos.push_back(std::move(d));
  }
  return demos;
}

InversionResult load_inversion(const std::string& path) {
  if (!fs::exists(path)) {
    throw IoError("missing inversion artifact " + path + " (run invert)");
  }
  return InversionResult::from_json(read_file(path));
}

}  // namespace

std::string cmd_invert(const Config& cfg, const std::string& domain,
                       const std::string& task, int64_t k,
                       const std::string& omega_mode, bool force,
                       const std::string& demos_path) {
  check_domain(domain);
  Paths paths(cfg.run.out);
  std::string out_path = paths.inversion_json(domain, task, k, omega_mode);
  if (!force && fs::exists(out_path)) return out_path;

  LoadedBundle lb = load_bundle(cfg, domain);
  std::vector<Demo> demos = load_demos(cfg, domain, task, demos_path);

  InversionOpts opts;
  opts.k = k;
  opts.steps = cfg.invert.steps;
  opts.lr = cfg.invert.lr;
  opts.noise_per_demo = cfg.invert.noise_per_demo;
  opts.weight_reg = cfg.invert.weight_reg;
  opts.seed = cfg.run.seed;
  opts.exec = cfg.exec();
  opts.stream_tag =
      domain + "/" + task + "/k" + std::to_string(k) + "/" + omega_mode;
  if (omega_mode == "learned") {
    opts.learn_weights = true;
  } else {
    opts.learn_weights = false;
    opts.fixed_weight = std::stod(omega_mode);
  }

  InversionResult result = invert(lb.bundle.model, lb.bundle.sched,
                                  lb.bundle.vocab.dummy(), demos, opts);
  fs::create_directories(paths.inversions_dir(domain));
  atomic_write_file(out_path, result.to_json() + "\n");
  summary_note("invert." + domain + "." + slug(task) + ".k" + std::to_string(k) +
                   "." + omega_mode + ".final_loss",
               csv_metric(result.loss_trace.empty() ? 0.0
                                                    : result.loss_trace.back()));
  if (result.weight_flagged) {
    summary_note("invert." + domain + "." + slug(task) + ".k" +
                     std::to_string(k) + "." + omega_mode + ".weight_flagged",
                 "true");
  }
  return out_path;
}

// ---------------------------------------------------------------------------
// composition specs and accuracy

namespace {

CompositionSpec spec_for_label(const ConceptVocabulary& vocab,
                               const std::string& label, double omega,
                               double alpha) {
  CompositionSpec spec;
  spec.terms = {{vocab.embed(label).clone(), omega}};
  spec.dummy = vocab.dummy().clone();
  spec.temperature = alpha;
  return spec;
}

CompositionSpec spec_for_inversion(const InversionResult& inv,
                                   const Tensor& dummy, double alpha) {
  CompositionSpec spec;
  for (size_t k = 0; k < inv.components.size(); ++k) {
    spec.terms.push_back({inv.components[k].clone(), inv.weights[k]});
  }
  spec.dummy = dummy.clone();
  spec.temperature = alpha;
  return spec;
}

CompositionSpec spec_for_component(const InversionResult& inv, size_t k,
                                   const Tensor& dummy, double alpha) {
  CompositionSpec spec;
  spec.terms = {{inv.components[k].clone(), inv.weights[k]}};
  spec.dummy = dummy.clone();
  spec.temperature = alpha;
  return spec;
}

// New concept composed with a training concept: learned-omega inversions
// keep their weights and the training term gets w = 1; fixed-omega
// inversions put the fixed weight on every term.
CompositionSpec spec_for_new_plus_training(const InversionResult& inv,
                                           const ConceptVocabulary& vocab,
                                           const std::string& partner,
                                           double alpha) {
  CompositionSpec spec = spec_for_inversion(inv, vocab.dummy(), alpha);
  double w = inv.config.learn_weights ? 1.0 : inv.config.fixed_weight;
  spec.terms.push_back({vocab.embed(partner).clone(), w});
  return spec;
}

}  // namespace

double rearr_spec_accuracy(const DenoiserBundle& bundle,
                           const CompositionSpec& spec, const LabelSpec& eval_label,
                           int64_t n, const Rng& rng, Exec exec) {
  Normalizer norm = rearrange_normalizer();
  auto outs = sample_batch(bundle.model, bundle.sched, spec, nullptr, n, rng, exec);
  int64_t hits = 0;
  for (const auto& out : outs) {
    Tensor raw = norm.denormalize(out);
    Scene scene = Scene::from_flat(raw.data());
    if (eval_rearrangement(scene, eval_label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

std::vector<Nav2dEpisode> load_eval_episodes(const Paths& paths,
                                             const std::string& prefix,
                                             const std::string& task) {
  std::string file = eval_file(paths, prefix, task);
  if (!fs::exists(file)) throw IoError("missing eval set " + file + " (run gen-data)");
  std::vector<Nav2dEpisode> out;
  for (const auto& rec : read_jsonl(file)) out.push_back(episode_from_record(rec));
  return out;
}

// Share of generated trajectories that make progress toward the labeled
// target from each episode's initial state.
double nav_spec_progress(const DenoiserBundle& bundle, const CompositionSpec& spec,
                         const std::vector<Nav2dEpisode>& episodes,
                         const Rng& rng, Exec exec) {
  Normalizer snorm = nav2d_state_normalizer();
  std::vector<Tensor> s0s;
  s0s.reserve(episodes.size());
  for (const auto& ep : episodes) s0s.push_back(snorm.normalize(ep.s0_tensor()));
  auto outs = sample_batch_s0(bundle.model, bundle.sched, spec, s0s, rng, exec);
  int64_t hits = 0;
  for (size_t i = 0; i < episodes.size(); ++i) {
    auto path = nav2d_decode_traj(outs[i]);
    const Nav2dEpisode& ep = episodes[i];
    if (eval_nav2d_progress({ep.agent_x, ep.agent_y}, path.back(),
                            {ep.target().x, ep.target().y})) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(episodes.size());
}

std::vector<std::string> base_row(const Config& cfg, const LoadedBundle& lb) {
  return {std::to_string(cfg.run.seed), hex64(lb.model_digest),
          hex64(lb.data_digest)};
}

CsvTable make_eval_table() {
  CsvTable csv;
  csv.header = {"domain", "setting",      "k",           "omega", "task",
                "accuracy", "sem",        "n",           "seed",  "model_digest",
                "data_digest"};
  return csv;
}

void push_rows(CsvTable& csv, const Config& cfg, const LoadedBundle& lb,
               const std::string& domain, const std::string& setting,
               const std::string& k, const std::string& omega,
               const AggregateScore& agg) {
  auto base = base_row(cfg, lb);
  for (const auto& t : agg.per_task) {
    csv.rows.push_back({domain, setting, k, omega, t.task,
                        csv_metric(t.accuracy), "", std::to_string(t.n), base[0],
                        base[1], base[2]});
  }
  csv.rows.push_back({domain, setting, k, omega, "(mean)", csv_metric(agg.mean),
                      agg.sem_defined ? csv_metric(agg.sem) : "",
                      std::to_string(agg.per_task.size()), base[0], base[1],
                      base[2]});
}

std::string omega_tag(const Config& cfg) { return cfg.invert.omega; }

// Aggregate accuracy across the tasks of one rearrangement inversion
// setting, loading each task's inversion artifact.
AggregateScore rearr_inversion_setting(const Config& cfg, const LoadedBundle& lb,
                                       RearrangeTask::Kind kind, int64_t k,
                                       const std::string& omega_mode) {
  Paths paths(cfg.run.out);
  std::vector<TaskScore> scores;
  for (const auto& task : rearrange_new_tasks()) {
    if (task.kind != kind) continue;
    InversionResult inv = load_inversion(
        paths.inversion_json("rearrangement", task.demo_label, k, omega_mode));
    CompositionSpec spec =
        kind == RearrangeTask::Kind::NewPlusTraining
            ? spec_for_new_plus_training(inv, lb.bundle.vocab,
                                         task.training_partner, cfg.sample.alpha)
            : spec_for_inversion(inv, lb.bundle.vocab.dummy(), cfg.sample.alpha);
    Rng rng = make_rng(cfg.run.seed,
                       {"eval", "rearrangement", task.eval_label.name,
                        "k" + std::to_string(k), omega_mode});
    double acc = rearr_spec_accuracy(lb.bundle, spec, task.eval_label, cfg.eval.n,
                                     rng, cfg.exec());
    scores.push_back({task.eval_label.name, acc, cfg.eval.n});
  }
  return aggregate(std::move(scores));
}

AggregateScore nav_inversion_setting(const Config& cfg, const LoadedBundle& lb,
                                     bool new_initial_states, int64_t k,
                                     const std::string& omega_mode) {
  Paths paths(cfg.run.out);
  std::vector<TaskScore> scores;
  for (const auto& name : nav2d_new_task_names()) {
    InversionResult inv =
        load_inversion(paths.inversion_json("nav2d", name, k, omega_mode));
    CompositionSpec spec =
        spec_for_inversion(inv, lb.bundle.vocab.dummy(), cfg.sample.alpha);
    std::vector<Nav2dEpisode> episodes;
    if (new_initial_states) {
      episodes = load_eval_episodes(paths, "new", name);
    } else {
      // Demo initial states.
      for (const auto& rec :
           read_jsonl(demo_file(paths, "nav2d", name))) {
        episodes.push_back(episode_from_record(rec));
      }
    }
    Rng rng = make_rng(cfg.run.seed,
                       {"eval", "nav2d", name,
                        new_initial_states ? "new-initial" : "demo-states",
                        "k" + std::to_string(k), omega_mode});
    double acc = nav_spec_progress(lb.bundle, spec, episodes, rng, cfg.exec());
    scores.push_back({name, acc, static_cast<int64_t>(episodes.size())});
  }
  return aggregate(std::move(scores));
}

}  // namespace

EvaluateResult cmd_evaluate(const Config& cfg, const std::string& setting) {
  Paths paths(cfg.run.out);
  fs::create_directories(paths.reports_dir());
  CsvTable csv = make_eval_table();
  EvaluateResult result;

  if (setting == "rearr-training") {
    LoadedBundle lb = load_bundle(cfg, "rearrangement");
    std::vector<TaskScore> scores;
    for (const auto& name : rearrange_training_label_names()) {
      CompositionSpec spec = spec_for_label(lb.bundle.vocab, name,
                                            cfg.sample.omega, cfg.sample.alpha);
      Rng rng = make_rng(cfg.run.seed, {"eval", "rearrangement-training", name});
      double acc = rearr_spec_accuracy(lb.bundle, spec, parse_label(name),
                                       cfg.eval.n, rng, cfg.exec());
      scores.push_back({name, acc, cfg.eval.n});
    }
    result.score = aggregate(std::move(scores));
    push_rows(csv, cfg, lb, "rearrangement", setting, "-",
              csv_metric(cfg.sample.omega), result.score);
  } else if (setting == "rearr-training-composition" ||
             setting == "rearr-new-concept" || setting == "rearr-new-plus-training") {
    LoadedBundle lb = load_bundle(cfg, "rearrangement");
    RearrangeTask::Kind kind =
        setting == "rearr-training-composition"
            ? RearrangeTask::Kind::TrainingComposition
            : setting == "rearr-new-concept" ? RearrangeTask::Kind::NewConcept
                                             : RearrangeTask::Kind::NewPlusTraining;
    result.score =
        rearr_inversion_setting(cfg, lb, kind, cfg.invert.k, omega_tag(cfg));
    push_rows(csv, cfg, lb, "rearrangement", setting,
              std::to_string(cfg.invert.k), omega_tag(cfg), result.score);
  } else if (setting == "nav-training") {
    LoadedBundle lb = load_bundle(cfg, "nav2d");
    std::vector<TaskScore> scores;
    for (const auto& name : nav2d_training_label_names()) {
      CompositionSpec spec = spec_for_label(
          lb.bundle.vocab, name, cfg.sample.omega_nav, cfg.sample.alpha);
      auto episodes = load_eval_episodes(paths, "train", name);
      Rng rng = make_rng(cfg.run.seed, {"eval", "nav2d-training", name});
      double acc = nav_spec_progress(lb.bundle, spec, episodes, rng, cfg.exec());
      scores.push_back({name, acc, static_cast<int64_t>(episodes.size())});
    }
    result.score = aggregate(std::move(scores));
    push_rows(csv, cfg, lb, "nav2d", setting, "-", csv_metric(cfg.sample.omega_nav),
              result.score);
  } else if (setting == "nav-new-initial" || setting == "nav-demo-states") {
    LoadedBundle lb = load_bundle(cfg, "nav2d");
    result.score = nav_inversion_setting(cfg, lb, setting == "nav-new-initial",
                                         cfg.invert.k, omega_tag(cfg));
    push_rows(csv, cfg, lb, "nav2d", setting, std::to_string(cfg.invert.k),
              omega_tag(cfg), result.score);
  } else if (setting == "nav-closed-loop") {
    ClosedLoopReport rep = cmd_nav_closed_loop(cfg);
    result.score = rep.closed_per_task;
    result.csv_path = Paths(cfg.run.out).reports_dir() + "/report_nav_closed_loop.csv";
    return result;
  } else {
    throw ConfigError("unknown evaluate setting '" + setting + "'");
  }

  result.csv_path = paths.reports_dir() + "/report_" + slug(setting) + ".csv";
  csv.write(result.csv_path);
  summary_note("eval." + setting + ".mean", csv_metric(result.score.mean));
  if (result.score.sem_defined) {
    summary_note("eval." + setting + ".sem", csv_metric(result.score.sem));
  }
  return result;
}

// ---------------------------------------------------------------------------
// ablation / sweep / component analysis

CsvTable cmd_ablate(const Config& cfg, const std::vector<int64_t>& ks) {
  Paths paths(cfg.run.out);
  LoadedBundle rearr = load_bundle(cfg, "rearrangement");
  LoadedBundle nav = load_bundle(cfg, "nav2d");
  CsvTable csv = make_eval_table();

  for (int64_t k : ks) {
    std::set<std::string> rearr_demo_labels;
    for (const auto& task : rearrange_new_tasks()) {
      rearr_demo_labels.insert(task.demo_label);
    }
    for (const auto& label : rearr_demo_labels) {
      cmd_invert(cfg, "rearrangement", label, k, "learned", false);
    }
    for (const auto& name : nav2d_new_task_names()) {
      cmd_invert(cfg, "nav2d", name, k, "learned", false);
    }

    auto comp = rearr_inversion_setting(cfg, rearr,
                                        RearrangeTask::Kind::TrainingComposition,
                                        k, "learned");
    auto newc =
        rearr_inversion_setting(cfg, rearr, RearrangeTask::Kind::NewConcept, k,
                                "learned");
    auto mixed = rearr_inversion_setting(
        cfg, rearr, RearrangeTask::Kind::NewPlusTraining, k, "learned");
    push_rows(csv, cfg, rearr, "rearrangement", "training-composition",
              std::to_string(k), "learned", comp);
    push_rows(csv, cfg, rearr, "rearrangement", "new-concept", std::to_string(k),
              "learned", newc);
    push_rows(csv, cfg, rearr, "rearrangement", "new-plus-training",
              std::to_string(k), "learned", mixed);

    auto nav_demo = nav_inversion_setting(cfg, nav, false, k, "learned");
    auto nav_new = nav_inversion_setting(cfg, nav, true, k, "learned");
    push_rows(csv, cfg, nav, "nav2d", "demo-states", std::to_string(k), "learned",
              nav_demo);
    push_rows(csv, cfg, nav, "nav2d", "new-initial", std::to_string(k), "learned",
              nav_new);
  }

  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/report_ablation.csv");
  return csv;
}

CsvTable cmd_sweep(const Config& cfg, const std::string& setting,
                   const std::vector<std::string>& omega_modes) {
  Paths paths(cfg.run.out);
  LoadedBundle lb = load_bundle(cfg, "rearrangement");
  RearrangeTask::Kind kind;
  if (setting == "rearr-new-concept") {
    kind = RearrangeTask::Kind::NewConcept;
  } else if (setting == "rearr-new-plus-training") {
    kind = RearrangeTask::Kind::NewPlusTraining;
  } else {
    throw ConfigError("sweep: unsupported setting '" + setting + "'");
  }

  std::set<std::string> demo_labels;
  for (const auto& task : rearrange_new_tasks()) {
    if (task.kind == kind) demo_labels.insert(task.demo_label);
  }

  CsvTable csv = make_eval_table();
  for (const auto& mode : omega_modes) {
    for (const auto& label : demo_labels) {
      cmd_invert(cfg, "rearrangement", label, cfg.invert.k, mode, false);
    }
    auto agg = rearr_inversion_setting(cfg, lb, kind, cfg.invert.k, mode);
    push_rows(csv, cfg, lb, "rearrangement", setting,
              std::to_string(cfg.invert.k), mode, agg);
    summary_note("sweep." + setting + "." + mode + ".mean", csv_metric(agg.mean));
  }
  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/report_sweep_" + slug(setting) + ".csv");
  return csv;
}

std::vector<ComponentScore> cmd_component_analysis(const Config& cfg,
                                                   const std::string& task,
                                                   const std::string& omega_mode) {
  Paths paths(cfg.run.out);
  LoadedBundle lb = load_bundle(cfg, "rearrangement");
  LabelSpec label = parse_label(task == "line" ? "line" : task);
  if (label.relations.size() < 2) {
    throw ConfigError("component analysis expects a multi-relation task");
  }
  InversionResult inv = load_inversion(
      paths.inversion_json("rearrangement", task, cfg.invert.k, omega_mode));

  std::vector<ComponentScore> out;
  for (const auto& rel : label.relations) {
    LabelSpec single;
    single.name = std::string(shape_name(rel.a)) +
                  (rel.rel == Relation::RightOf ? " right of " : " above ") +
                  shape_name(rel.b);
    single.relations = {rel};
    ComponentScore cs;
    cs.constituent = single.name;
    for (size_t k = 0; k < inv.components.size(); ++k) {
      CompositionSpec spec =
          spec_for_component(inv, k, lb.bundle.vocab.dummy(), cfg.sample.alpha);
      Rng rng = make_rng(cfg.run.seed, {"eval", "component", task, single.name,
                                        std::to_string(k), omega_mode});
      cs.per_component.push_back(rearr_spec_accuracy(
          lb.bundle, spec, single, cfg.eval.n, rng, cfg.exec()));
    }
    out.push_back(std::move(cs));
  }

  CsvTable csv;
  csv.header = {"task", "constituent", "component", "accuracy", "weight",
                "n", "seed", "model_digest", "data_digest"};
  for (const auto& cs : out) {
    for (size_t k = 0; k < cs.per_component.size(); ++k) {
      csv.rows.push_back({task, cs.constituent, std::to_string(k + 1),
                          csv_metric(cs.per_component[k]),
                          csv_metric(inv.weights[k]), std::to_string(cfg.eval.n),
                          std::to_string(cfg.run.seed), hex64(lb.model_digest),
                          hex64(lb.data_digest)});
    }
  }
  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/report_component_analysis.csv");
  return out;
}

// ---------------------------------------------------------------------------
// closed loop

ClosedLoopReport cmd_nav_closed_loop(const Config& cfg) {
  Paths paths(cfg.run.out);
  LoadedBundle lb = load_bundle(cfg, "nav2d");
  Normalizer snorm = nav2d_state_normalizer();

  RolloutOpts ropts;
  ropts.replan_every = cfg.rollout.replan_every;
  ropts.max_steps = cfg.rollout.max_steps;
  ropts.plan_offset = cfg.rollout.plan_offset;
  ropts.v_max = cfg.rollout.v_max;
  ropts.arrival_radius = cfg.rollout.arrival_radius;

  ClosedLoopReport report;
  std::vector<TaskScore> closed_scores;
  std::vector<TaskScore> open_scores;
  for (const auto& name : nav2d_training_label_names()) {
    auto episodes = load_eval_episodes(paths, "train", name);
    int64_t limit = std::min<int64_t>(cfg.rollout.episodes_per_label,
                                      static_cast<int64_t>(episodes.size()));
    CompositionSpec spec = spec_for_label(lb.bundle.vocab, name,
                                          cfg.sample.omega_nav, cfg.sample.alpha);
    int64_t closed_hits = 0;
    int64_t open_hits = 0;
    for (int64_t i = 0; i < limit; ++i) {
      const Nav2dEpisode& ep = episodes[static_cast<size_t>(i)];
      Rng closed_rng = make_rng(
          cfg.run.seed, {"rollout", "closed", name, std::to_string(i)});
      RolloutResult rr =
          closed_loop_rollout(lb.bundle.model, lb.bundle.sched, spec, ep, ropts,
                              closed_rng);
      closed_hits += rr.success ? 1 : 0;

      Rng open_rng =
          make_rng(cfg.run.seed, {"rollout", "open", name, std::to_string(i)});
      Tensor s0 = snorm.normalize(ep.s0_tensor());
      Tensor flat = sample(lb.bundle.model, lb.bundle.sched, spec, &s0, open_rng);
      auto path = nav2d_decode_traj(flat);
      open_hits += nav2d_path_success(path, {ep.target().x, ep.target().y},
                                      {ep.distractor().x, ep.distractor().y},
                                      ropts.arrival_radius)
                       ? 1
                       : 0;
    }
    closed_scores.push_back(
        {name, static_cast<double>(closed_hits) / static_cast<double>(limit),
         limit});
    open_scores.push_back(
        {name, static_cast<double>(open_hits) / static_cast<double>(limit),
         limit});
  }
  report.closed_per_task = aggregate(closed_scores);
  report.open_per_task = aggregate(open_scores);
  report.closed_success = report.closed_per_task.mean;
  report.open_success = report.open_per_task.mean;

  CsvTable csv;
  csv.header = {"task", "mode", "success", "n", "seed", "model_digest",
                "data_digest"};
  for (size_t i = 0; i < closed_scores.size(); ++i) {
    csv.rows.push_back({closed_scores[i].task, "closed",
                        csv_metric(closed_scores[i].accuracy),
                        std::to_string(closed_scores[i].n),
                        std::to_string(cfg.run.seed), hex64(lb.model_digest),
                        hex64(lb.data_digest)});
    csv.rows.push_back({open_scores[i].task, "open",
                        csv_metric(open_scores[i].accuracy),
                        std::to_string(open_scores[i].n),
                        std::to_string(cfg.run.seed), hex64(lb.model_digest),
                        hex64(lb.data_digest)});
  }
  csv.rows.push_back({"(mean)", "closed", csv_metric(report.closed_success), "",
                      std::to_string(cfg.run.seed), hex64(lb.model_digest),
                      hex64(lb.data_digest)});
  csv.rows.push_back({"(mean)", "open", csv_metric(report.open_success), "",
                      std::to_string(cfg.run.seed), hex64(lb.model_digest),
                      hex64(lb.data_digest)});
  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/report_nav_closed_loop.csv");
  summary_note("eval.nav-closed-loop.closed", csv_metric(report.closed_success));
  summary_note("eval.nav-closed-loop.open", csv_metric(report.open_success));
  return report;
}

// ---------------------------------------------------------------------------
// baselines comparison

namespace {

double bc_rearr_accuracy(const Config& cfg, const BcModel& model,
                         const Tensor& condition, const LabelSpec& eval_label,
                         Rng& rng) {
  Normalizer norm = rearrange_normalizer();
  int64_t hits = 0;
  for (int64_t i = 0; i < cfg.eval.n; ++i) {
    Tensor cond = condition.clone();
    for (int64_t j = 0; j < cond.size(); ++j) {
      cond[j] += cfg.bc.eval_noise * rng.normal();
    }
    Tensor out = model.forward(cond, nullptr);
    Scene scene = Scene::from_flat(norm.denormalize(out).data());
    if (eval_rearrangement(scene, eval_label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cfg.eval.n);
}

std::vector<std::array<double, 2>> bc_rollout_nav(const BcModel& model,
                                                  const Tensor& cond,
                                                  const Nav2dEpisode& ep) {
  Normalizer snorm = nav2d_state_normalizer();
  Tensor s0n = snorm.normalize(ep.s0_tensor());
  std::vector<std::array<double, 2>> path;
  double x = ep.agent_x;
  double y = ep.agent_y;
  path.push_back({x, y});
  Tensor state({Nav2dEpisode::kStateWidth + 2});
  for (int64_t t = 1; t < Nav2dEpisode::kHorizon; ++t) {
    std::memcpy(state.data(), s0n.data(),
                sizeof(double) * Nav2dEpisode::kStateWidth);
    state[Nav2dEpisode::kStateWidth] = x * 0.4 - 1.0;
    state[Nav2dEpisode::kStateWidth + 1] = y * 0.4 - 1.0;
    Tensor next = model.forward(cond, &state);
    x = (next[0] + 1.0) * 2.5;
    y = (next[1] + 1.0) * 2.5;
    path.push_back({x, y});
  }
  return path;
}

double bc_nav_progress(const Config& cfg, const BcModel& model,
                       const Tensor& condition,
                       const std::vector<Nav2dEpisode>& episodes, Rng& rng) {
  int64_t hits = 0;
  for (const auto& ep : episodes) {
    Tensor cond = condition.clone();
    for (int64_t j = 0; j < cond.size(); ++j) {
      cond[j] += cfg.bc.eval_noise * rng.normal();
    }
    auto path = bc_rollout_nav(model, cond, ep);
    if (eval_nav2d_progress({ep.agent_x, ep.agent_y}, path.back(),
                            {ep.target().x, ep.target().y})) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(episodes.size());
}

std::vector<BcPair> bc_demo_pairs(const Config& cfg, const std::string& domain,
                                  const std::string& task) {
  Paths paths(cfg.run.out);
  auto recs = read_jsonl(demo_file(paths, domain, task));
  // Conditions are what inversion learns; the vocabulary is not consulted.
  ConceptVocabulary dummy_vocab =
      ConceptVocabulary::build({}, cfg.model.concept_dim, cfg.model.embed_seed);
  std::vector<BcPair> pairs;
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  Normalizer snorm = nav2d_state_normalizer();
  for (const auto& rec : recs) {
    if (domain == "rearrangement") {
      BcPair p;
      p.cond = Tensor({cfg.model.concept_dim});
      p.next = xnorm.normalize(Tensor::from(rec.traj[0]));
      pairs.push_back(std::move(p));
      continue;
    }
    Tensor s0n = snorm.normalize(Tensor::from(*rec.s0));
    for (size_t t = 0; t + 1 < rec.traj.size(); ++t) {
      BcPair p;
      p.cond = Tensor({cfg.model.concept_dim});
      p.state = Tensor({Nav2dEpisode::kStateWidth + 2});
      std::memcpy(p.state.data(), s0n.data(),
                  sizeof(double) * Nav2dEpisode::kStateWidth);
      p.state[Nav2dEpisode::kStateWidth] = rec.traj[t][0] * 0.4 - 1.0;
      p.state[Nav2dEpisode::kStateWidth + 1] = rec.traj[t][1] * 0.4 - 1.0;
      p.next = Tensor::from(
          {rec.traj[t + 1][0] * 0.4 - 1.0, rec.traj[t + 1][1] * 0.4 - 1.0});
      p.has_state = true;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

Tensor cvae_traj_tensor(const DatasetRecord& rec, const std::string& domain) {
  Normalizer xnorm = domain == "rearrangement" ? rearrange_normalizer()
                                               : nav2d_traj_normalizer();
  if (domain == "rearrangement") {
    return xnorm.normalize(Tensor::from(rec.traj[0]));
  }
  std::vector<double> flat;
  for (const auto& xy : rec.traj) {
    flat.push_back(xy[0]);
    flat.push_back(xy[1]);
  }
  return xnorm.normalize(Tensor::from(std::move(flat)));
}

}  // namespace

CsvTable cmd_compare(const Config& cfg, const std::string& domain) {
  check_domain(domain);
  Paths paths(cfg.run.out);
  LoadedBundle lb = load_bundle(cfg, domain);
  BcModel bc = unpack_bc(Checkpoint::load(paths.ckpt("bc_" + domain)));
  CvaeModel cvae = unpack_cvae(Checkpoint::load(paths.ckpt("cvae_" + domain)));
  Normalizer xnorm = lb.state_norm;

  CsvTable csv;
  csv.header = {"domain", "setting", "method", "task", "accuracy", "n",
                "seed", "model_digest", "data_digest"};
  auto push = [&](const std::string& setting, const std::string& method,
                  const std::string& task, double acc, int64_t n) {
    csv.rows.push_back({domain, setting, method, task, csv_metric(acc),
                        std::to_string(n), std::to_string(cfg.run.seed),
                        hex64(lb.model_digest), hex64(lb.data_digest)});
    summary_note("compare." + domain + "." + setting + "." + method + "." +
                     slug(task),
                 csv_metric(acc));
  };

  if (domain == "rearrangement") {
    auto train_recs = read_train_records(paths, domain);
    std::map<std::string, std::vector<const DatasetRecord*>> by_label;
    for (const auto& rec : train_recs) by_label[rec.label].push_back(&rec);

    for (const auto& name : rearrange_training_label_names()) {
      LabelSpec label = parse_label(name);
      // diffusion
      CompositionSpec spec = spec_for_label(lb.bundle.vocab, name,
                                            cfg.sample.omega, cfg.sample.alpha);
      Rng drng = make_rng(cfg.run.seed, {"compare", "diffusion", name});
      push("training", "diffusion", name,
           rearr_spec_accuracy(lb.bundle, spec, label, cfg.eval.n, drng,
                               cfg.exec()),
           cfg.eval.n);
      // bc
      Rng brng = make_rng(cfg.run.seed, {"compare", "bc", name});
      push("training", "bc", name,
           bc_rearr_accuracy(cfg, bc, lb.bundle.vocab.embed(name), label, brng),
           cfg.eval.n);
      // cvae: encode a training sample, decode with noisy z
      Rng crng = make_rng(cfg.run.seed, {"compare", "cvae", name});
      const auto& pool = by_label[name];
      int64_t hits = 0;
      for (int64_t i = 0; i < cfg.eval.n; ++i) {
        const DatasetRecord* rec =
            pool[static_cast<size_t>(crng.uniform_below(pool.size()))];
        auto enc = cvae.encode(cvae_traj_tensor(*rec, domain));
        Tensor out = cvae_generate(cvae, enc.mu, nullptr, cfg.cvae.gen_noise, crng);
        Scene scene = Scene::from_flat(xnorm.denormalize(out).data());
        if (eval_rearrangement(scene, label)) ++hits;
      }
      push("training", "cvae", name,
           static_cast<double>(hits) / static_cast<double>(cfg.eval.n), cfg.eval.n);
    }

    for (const auto& task : rearrange_new_tasks()) {
      if (task.kind != RearrangeTask::Kind::NewConcept) continue;
      const std::string& name = task.demo_label;
      // diffusion (requires the inversion artifact)
      InversionResult inv = load_inversion(paths.inversion_json(
          "rearrangement", name, cfg.invert.k, omega_tag(cfg)));
      CompositionSpec spec =
          spec_for_inversion(inv, lb.bundle.vocab.dummy(), cfg.sample.alpha);
      Rng drng = make_rng(cfg.run.seed, {"compare", "diffusion-new", name});
      push("new-concept", "diffusion", name,
           rearr_spec_accuracy(lb.bundle, spec, task.eval_label, cfg.eval.n, drng,
                               cfg.exec()),
           cfg.eval.n);
      // bc condition inversion
      BcInvertOpts bopts;
      bopts.steps = cfg.bc.invert_steps;
      bopts.lr = cfg.bc.invert_lr;
      bopts.seed = cfg.run.seed;
      bopts.stream_tag = "bc/" + domain + "/" + name;
      bopts.exec = cfg.exec();
      auto binv = bc_invert_condition(bc, bc_demo_pairs(cfg, domain, name), bopts);
      Rng brng = make_rng(cfg.run.seed, {"compare", "bc-new", name});
      push("new-concept", "bc", name,
           bc_rearr_accuracy(cfg, bc, binv.condition, task.eval_label, brng),
           cfg.eval.n);
      // cvae latent inversion
      std::vector<CvaeRow> demo_rows;
      for (const auto& rec : read_jsonl(demo_file(paths, domain, name))) {
        CvaeRow row;
        row.x = cvae_traj_tensor(rec, domain);
        demo_rows.push_back(std::move(row));
      }
      CvaeInvertOpts copts;
      copts.steps = cfg.cvae.invert_steps;
      copts.lr = cfg.cvae.invert_lr;
      copts.seed = cfg.run.seed;
      copts.stream_tag = "cvae/" + domain + "/" + name;
      copts.exec = cfg.exec();
      auto cinv = cvae_invert_latent(cvae, demo_rows, copts);
      Rng crng = make_rng(cfg.run.seed, {"compare", "cvae-new", name});
      int64_t hits = 0;
      for (int64_t i = 0; i < cfg.eval.n; ++i) {
        Tensor out = cvae_generate(cvae, cinv.z, nullptr, cfg.cvae.gen_noise, crng);
        Scene scene = Scene::from_flat(xnorm.denormalize(out).data());
        if (eval_rearrangement(scene, task.eval_label)) ++hits;
      }
      push("new-concept", "cvae", name,
           static_cast<double>(hits) / static_cast<double>(cfg.eval.n), cfg.eval.n);
    }
  } else {
    auto train_recs = read_train_records(paths, domain);
    std::map<std::string, std::vector<const DatasetRecord*>> by_label;
    for (const auto& rec : train_recs) by_label[rec.label].push_back(&rec);
    Normalizer snorm = nav2d_state_normalizer();

    for (const auto& name : nav2d_training_label_names()) {
      auto episodes = load_eval_episodes(paths, "train", name);
      CompositionSpec spec = spec_for_label(
          lb.bundle.vocab, name, cfg.sample.omega_nav, cfg.sample.alpha);
      Rng drng = make_rng(cfg.run.seed, {"compare", "diffusion", name});
      push("training", "diffusion", name,
           nav_spec_progress(lb.bundle, spec, episodes, drng, cfg.exec()),
           static_cast<int64_t>(episodes.size()));
      Rng brng = make_rng(cfg.run.seed, {"compare", "bc", name});
      push("training", "bc", name,
           bc_nav_progress(cfg, bc, lb.bundle.vocab.embed(name), episodes, brng),
           static_cast<int64_t>(episodes.size()));
      // cvae: encode a training trajectory of this concept, decode on the
      // eval initial states.
      Rng crng = make_rng(cfg.run.seed, {"compare", "cvae", name});
      const auto& pool = by_label[name];
      int64_t hits = 0;
      for (const auto& ep : episodes) {
        const DatasetRecord* rec =
            pool[static_cast<size_t>(crng.uniform_below(pool.size()))];
        auto enc = cvae.encode(cvae_traj_tensor(*rec, domain));
        Tensor s0 = snorm.normalize(ep.s0_tensor());
        Tensor out = cvae_generate(cvae, enc.mu, &s0, cfg.cvae.gen_noise, crng);
        auto path = nav2d_decode_traj(out);
        if (eval_nav2d_progress({ep.agent_x, ep.agent_y}, path.back(),
                                {ep.target().x, ep.target().y})) {
          ++hits;
        }
      }
      push("training", "cvae", name,
           static_cast<double>(hits) / static_cast<double>(episodes.size()),
           static_cast<int64_t>(episodes.size()));
    }

    for (const auto& name : nav2d_new_task_names()) {
      auto episodes = load_eval_episodes(paths, "new", name);
      InversionResult inv = load_inversion(
          paths.inversion_json("nav2d", name, cfg.invert.k, omega_tag(cfg)));
      CompositionSpec spec =
          spec_for_inversion(inv, lb.bundle.vocab.dummy(), cfg.sample.alpha);
      Rng drng = make_rng(cfg.run.seed, {"compare", "diffusion-new", name});
      push("new-initial", "diffusion", name,
           nav_spec_progress(lb.bundle, spec, episodes, drng, cfg.exec()),
           static_cast<int64_t>(episodes.size()));

      BcInvertOpts bopts;
      bopts.steps = cfg.bc.invert_steps;
      bopts.lr = cfg.bc.invert_lr;
      bopts.seed = cfg.run.seed;
      bopts.stream_tag = "bc/" + domain + "/" + name;
      bopts.exec = cfg.exec();
      auto binv = bc_invert_condition(bc, bc_demo_pairs(cfg, domain, name), bopts);
      Rng brng = make_rng(cfg.run.seed, {"compare", "bc-new", name});
      push("new-initial", "bc", name,
           bc_nav_progress(cfg, bc, binv.condition, episodes, brng),
           static_cast<int64_t>(episodes.size()));

      std::vector<CvaeRow> demo_rows;
      for (const auto& rec : read_jsonl(demo_file(paths, domain, name))) {
        CvaeRow row;
        row.x = cvae_traj_tensor(rec, domain);
        row.s0 = snorm.normalize(Tensor::from(*rec.s0));
        row.has_s0 = true;
        demo_rows.push_back(std::move(row));
      }
      CvaeInvertOpts copts;
      copts.steps = cfg.cvae.invert_steps;
      copts.lr = cfg.cvae.invert_lr;
      copts.seed = cfg.run.seed;
      copts.stream_tag = "cvae/" + domain + "/" + name;
      copts.exec = cfg.exec();
      auto cinv = cvae_invert_latent(cvae, demo_rows, copts);
      Rng crng = make_rng(cfg.run.seed, {"compare", "cvae-new", name});
      int64_t hits = 0;
      for (const auto& ep : episodes) {
        Tensor s0 = snorm.normalize(ep.s0_tensor());
        Tensor out = cvae_generate(cvae, cinv.z, &s0, cfg.cvae.gen_noise, crng);
        auto path = nav2d_decode_traj(out);
        if (eval_nav2d_progress({ep.agent_x, ep.agent_y}, path.back(),
                                {ep.target().x, ep.target().y})) {
          ++hits;
        }
      }
      push("new-initial", "cvae", name,
           static_cast<double>(hits) / static_cast<double>(episodes.size()),
           static_cast<int64_t>(episodes.size()));
    }
  }

  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/report_compare_" + domain + ".csv");
  return csv;
}

// ---------------------------------------------------------------------------
// pca

CsvTable cmd_pca(const Config& cfg) {
  Paths paths(cfg.run.out);
  ConceptVocabulary vocab = vocab_for(cfg, "rearrangement");
  std::vector<std::pair<std::string, Tensor>> training;
  for (const auto& name : vocab.labels()) {
    training.push_back({name, vocab.embed(name).clone()});
  }
  std::vector<std::pair<std::string, Tensor>> learned;
  std::string dir = paths.inversions_dir("rearrangement");
  if (fs::exists(dir)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      InversionResult inv = load_inversion(f);
      std::string stem = fs::path(f).stem().string();
      for (size_t k = 0; k < inv.components.size(); ++k) {
        learned.push_back(
            {stem + "/component" + std::to_string(k + 1), inv.components[k].clone()});
      }
    }
  }

  auto points = pca_project(training, learned, vocab.dummy());
  CsvTable csv;
  csv.header = {"kind", "label", "pc1", "pc2", "nearest_training"};
  for (const auto& p : points) {
    csv.rows.push_back(
        {p.kind, p.label, csv_metric(p.pc1), csv_metric(p.pc2), p.nearest_training});
  }
  fs::create_directories(paths.reports_dir());
  csv.write(paths.reports_dir() + "/pca_concepts.csv");
  return csv;
}

// ---------------------------------------------------------------------------
// generation / rendering

void cmd_generate(const Config& cfg, const GenerateArgs& args) {
  check_domain(args.domain);
  LoadedBundle lb = load_bundle(cfg, args.domain);
  double omega =
      args.domain == "rearrangement" ? cfg.sample.omega : cfg.sample.omega_nav;

  CompositionSpec spec;
  std::string cond_name;
  if (!args.inversion_path.empty()) {
    InversionResult inv = load_inversion(args.inversion_path);
    spec = spec_for_inversion(inv, lb.bundle.vocab.dummy(), cfg.sample.alpha);
    cond_name = fs::path(args.inversion_path).stem().string();
    if (!args.compose_label.empty()) {
      double w = inv.config.learn_weights ? 1.0 : inv.config.fixed_weight;
      spec.terms.push_back({lb.bundle.vocab.embed(args.compose_label).clone(), w});
      cond_name += " and " + args.compose_label;
    }
  } else if (!args.label.empty()) {
    spec = spec_for_label(lb.bundle.vocab, args.label, omega, cfg.sample.alpha);
    cond_name = args.label;
    if (!args.compose_label.empty()) {
      spec.terms.push_back({lb.bundle.vocab.embed(args.compose_label).clone(), omega});
      cond_name += " and " + args.compose_label;
    }
  } else {
    throw ConfigError("generate: need --label or --inversion");
  }

  std::vector<DatasetRecord> recs;
  Rng rng = make_rng(cfg.run.seed, {"generate", args.domain, cond_name});
  if (args.domain == "rearrangement") {
    auto outs = sample_batch(lb.bundle.model, lb.bundle.sched, spec, nullptr,
                             args.n, rng, cfg.exec());
    Normalizer norm = rearrange_normalizer();
    for (size_t i = 0; i < outs.size(); ++i) {
      Tensor raw = norm.denormalize(outs[i]);
      DatasetRecord rec;
      rec.domain = args.domain;
      rec.label = cond_name;
      rec.traj = {std::vector<double>(raw.data(), raw.data() + raw.size())};
      rec.gen_seed = cfg.run.seed;
      rec.index = static_cast<int64_t>(i);
      recs.push_back(std::move(rec));
    }
  } else {
    // Conditions come from fresh episodes of the first new task unless the
    // label is a training label with an eval set.
    Paths paths(cfg.run.out);
    std::vector<Nav2dEpisode> episodes;
    std::string src_label = args.label.empty() ? nav2d_new_task_names()[0] : args.label;
    std::string prefix = "train";
    for (const auto& n : nav2d_new_task_names()) {
      if (n == src_label) prefix = "new";
    }
    episodes = load_eval_episodes(paths, prefix, src_label);
    episodes.resize(std::min<size_t>(episodes.size(), static_cast<size_t>(args.n)));
    Normalizer snorm = nav2d_state_normalizer();
    std::vector<Tensor> s0s;
    for (const auto& ep : episodes) s0s.push_back(snorm.normalize(ep.s0_tensor()));
    auto outs = sample_batch_s0(lb.bundle.model, lb.bundle.sched, spec, s0s, rng,
                                cfg.exec());
    for (size_t i = 0; i < outs.size(); ++i) {
      auto path = nav2d_decode_traj(outs[i]);
      DatasetRecord rec = record_from_episode(episodes[i], src_label, cfg.run.seed,
                                              static_cast<int64_t>(i));
      rec.traj.clear();
      for (const auto& xy : path) rec.traj.push_back({xy[0], xy[1]});
      recs.push_back(std::move(rec));
    }
  }

  std::string out_path = args.out_jsonl.empty()
                             ? Paths(cfg.run.out).root + "/generated/" +
                                   slug(cond_name) + ".jsonl"
                             : args.out_jsonl;
  write_jsonl(out_path, recs);
  if (args.render) {
    cmd_render(cfg, out_path, Paths(cfg.run.out).render_dir(), args.n);
  }
}

void cmd_render(const Config& cfg, const std::string& in_jsonl,
                const std::string& out_dir, int64_t limit) {
  (void)cfg;
  auto recs = read_jsonl(in_jsonl);
  fs::create_directories(out_dir);
  std::string stem = fs::path(in_jsonl).stem().string();
  int64_t count = 0;
  for (const auto& rec : recs) {
    if (count >= limit) break;
    std::string svg;
    if (rec.domain == "rearrangement") {
      svg = scene_svg(Scene::from_flat(rec.traj[0].data()));
    } else {
      Nav2dEpisode ep = episode_from_record(rec);
      std::vector<std::vector<std::array<double, 2>>> paths = {ep.traj};
      svg = nav2d_svg(ep, paths);
    }
    atomic_write_file(
        out_dir + "/" + stem + "_" + std::to_string(count) + ".svg", svg);
    ++count;
  }
}

}  // namespace igen
