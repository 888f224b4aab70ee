#ifndef IGEN_CONFIG_HPP_
#define IGEN_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>

#include "igen/parallel.hpp"

namespace igen {

// All tunables, grouped by the sections of the flat key-value config
// format (see docs/config.md). Defaults here are the reference recipe.
struct Config {
  struct Run {
    uint64_t seed = 0;
    int64_t threads = 0;  // 0 = all hardware threads
    std::string exec = "parallel";
    std::string out = "out";
  } run;

  struct Data {
    std::string domain = "rearrangement";
    int64_t rearr_samples_per_label = 917;  // 12 labels, ~11k total
    int64_t nav_samples_per_label = 225;    // 4 labels, ~900 total
    int64_t demos_per_task = 5;
  } data;

  struct Schedule {
    int64_t steps = 100;
    double beta_start = 1e-4;
    double beta_end = 8.5e-2;
  } schedule;

  struct Model {
    std::string hidden = "512,512";
    int64_t time_dim = 32;
    int64_t concept_dim = 16;
    uint64_t embed_seed = 7;
  } model;

  struct Train {
    int64_t steps = 16000;
    int64_t batch = 64;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double p_drop = 0.1;
    int64_t log_every = 1000;
  } train;

  struct Invert {
    int64_t k = 2;
    int64_t steps = 2000;
    double lr = 1e-2;
    int64_t noise_per_demo = 16;
    std::string omega = "learned";  // learned | 1.2 | 1.4 | 1.6 | 1.8
    double weight_reg = 0.0;
  } invert;

  struct Sample {
    double alpha = 0.5;      // reverse-process temperature
    double omega = 1.2;      // guidance weight, rearrangement conditioning
    double omega_nav = 1.6;  // guidance weight, navigation conditioning
  } sample;

  struct Eval {
    int64_t n = 50;
  } eval;

  struct Rollout {
    int64_t replan_every = 5;
    int64_t max_steps = 96;
    int64_t plan_offset = 5;
    double arrival_radius = 0.25;
    double v_max = 0.25;
    int64_t episodes_per_label = 25;
  } rollout;

  struct Bc {
    int64_t steps = 6000;
    int64_t batch = 64;
    double lr = 6e-4;
    double eval_noise = 0.1;
    int64_t invert_steps = 2000;
    double invert_lr = 1e-2;
  } bc;

  struct Cvae {
    int64_t steps = 8000;
    int64_t batch = 64;
    double lr = 6e-4;
    int64_t latent_dim = 16;
    double kl_weight = 1.0;
    double gen_noise = 0.1;
    int64_t invert_steps = 2000;
    double invert_lr = 1e-2;
  } cvae;

  Exec exec() const;
  int64_t resolved_threads() const;
};

Config default_config();

// Strict parser: unknown sections or keys raise ConfigError.
void apply_config_file(Config& cfg, const std::string& path);
void apply_config_text(Config& cfg, const std::string& text,
                       const std::string& origin);

// Environment overrides: IGEN_<SECTION>_<KEY>, e.g. IGEN_TRAIN_STEPS=500.
void apply_env_overrides(Config& cfg);

// Single key override ("section.key" form), used by CLI flags.
void set_config_value(Config& cfg, const std::string& dotted_key,
                      const std::string& value);

// Canonical dump (round-trips through apply_config_text).
std::string dump_config(const Config& cfg);

}  // namespace igen

#endif  // IGEN_CONFIG_HPP_
