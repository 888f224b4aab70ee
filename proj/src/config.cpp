#include "igen/config.hpp"

#include <cstdlib>
#include <functional>
#include <sstream>
#include <vector>

#include "igen/dataset.hpp"
#include "igen/error.hpp"

namespace igen {

Exec Config::exec() const {
  if (run.exec == "parallel") return Exec::Parallel;
  if (run.exec == "serial") return Exec::Serial;
  throw ConfigError("run.exec must be 'parallel' or 'serial'");
}

int64_t Config::resolved_threads() const {
  return run.threads > 0 ? run.threads : hardware_threads();
}

Config default_config() { return Config{}; }

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

int64_t parse_i64(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + what + ": '" + s + "'");
  }
}

uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    uint64_t v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + what + ": '" + s + "'");
  }
}

double parse_f64(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> reg = [] {
    std::vector<Entry> r;
    auto i64 = [&r](const char* sec, const char* key,
                    std::function<int64_t&(Config&)> f) {
      std::string what = std::string(sec) + "." + key;
      r.push_back({sec, key,
                   [f](const Config& c) {
                     return std::to_string(f(const_cast<Config&>(c)));
                   },
                   [f, what](Config& c, const std::string& v) {
                     f(c) = parse_i64(v, what);
                   }});
    };
    auto u64 = [&r](const char* sec, const char* key,
                    std::function<uint64_t&(Config&)> f) {
      std::string what = std::string(sec) + "." + key;
      r.push_back({sec, key,
                   [f](const Config& c) {
                     return std::to_string(f(const_cast<Config&>(c)));
                   },
                   [f, what](Config& c, const std::string& v) {
                     f(c) = parse_u64(v, what);
                   }});
    };
    auto f64 = [&r](const char* sec, const char* key,
                    std::function<double&(Config&)> f) {
      std::string what = std::string(sec) + "." + key;
      r.push_back({sec, key,
                   [f](const Config& c) {
                     return format_double_17(f(const_cast<Config&>(c)));
                   },
                   [f, what](Config& c, const std::string& v) {
                     f(c) = parse_f64(v, what);
                   }});
    };
    auto str = [&r](const char* sec, const char* key,
                    std::function<std::string&(Config&)> f) {
      r.push_back({sec, key,
                   [f](const Config& c) { return f(const_cast<Config&>(c)); },
                   [f](Config& c, const std::string& v) { f(c) = v; }});
    };

    u64("run", "seed", [](Config& c) -> uint64_t& { return c.run.seed; });
    i64("run", "threads", [](Config& c) -> int64_t& { return c.run.threads; });
    str("run", "exec", [](Config& c) -> std::string& { return c.run.exec; });
    str("run", "out", [](Config& c) -> std::string& { return c.run.out; });

    str("data", "domain", [](Config& c) -> std::string& { return c.data.domain; });
    i64("data", "rearr_samples_per_label",
        [](Config& c) -> int64_t& { return c.data.rearr_samples_per_label; });
    i64("data", "nav_samples_per_label",
        [](Config& c) -> int64_t& { return c.data.nav_samples_per_label; });
    i64("data", "demos_per_task",
        [](Config& c) -> int64_t& { return c.data.demos_per_task; });

    i64("schedule", "steps", [](Config& c) -> int64_t& { return c.schedule.steps; });
    f64("schedule", "beta_start",
        [](Config& c) -> double& { return c.schedule.beta_start; });
    f64("schedule", "beta_end",
        [](Config& c) -> double& { return c.schedule.beta_end; });

    str("model", "hidden", [](Config& c) -> std::string& { return c.model.hidden; });
    i64("model", "time_dim", [](Config& c) -> int64_t& { return c.model.time_dim; });
    i64("model", "concept_dim",
        [](Config& c) -> int64_t& { return c.model.concept_dim; });
    u64("model", "embed_seed",
        [](Config& c) -> uint64_t& { return c.model.embed_seed; });

    i64("train", "steps", [](Config& c) -> int64_t& { return c.train.steps; });
    i64("train", "batch", [](Config& c) -> int64_t& { return c.train.batch; });
    f64("train", "lr", [](Config& c) -> double& { return c.train.lr; });
    f64("train", "weight_decay",
        [](Config& c) -> double& { return c.train.weight_decay; });
    f64("train", "p_drop", [](Config& c) -> double& { return c.train.p_drop; });
    i64("train", "log_every",
        [](Config& c) -> int64_t& { return c.train.log_every; });

    i64("invert", "k", [](Config& c) -> int64_t& { return c.invert.k; });
    i64("invert", "steps", [](Config& c) -> int64_t& { return c.invert.steps; });
    f64("invert", "lr", [](Config& c) -> double& { return c.invert.lr; });
    i64("invert", "noise_per_demo",
        [](Config& c) -> int64_t& { return c.invert.noise_per_demo; });
    str("invert", "omega", [](Config& c) -> std::string& { return c.invert.omega; });
    f64("invert", "weight_reg",
        [](Config& c) -> double& { return c.invert.weight_reg; });

    f64("sample", "alpha", [](Config& c) -> double& { return c.sample.alpha; });
    f64("sample", "omega", [](Config& c) -> double& { return c.sample.omega; });
    f64("sample", "omega_nav",
        [](Config& c) -> double& { return c.sample.omega_nav; });

    i64("eval", "n", [](Config& c) -> int64_t& { return c.eval.n; });

    i64("rollout", "replan_every",
        [](Config& c) -> int64_t& { return c.rollout.replan_every; });
    i64("rollout", "max_steps",
        [](Config& c) -> int64_t& { return c.rollout.max_steps; });
    i64("rollout", "plan_offset",
        [](Config& c) -> int64_t& { return c.rollout.plan_offset; });
    f64("rollout", "arrival_radius",
        [](Config& c) -> double& { return c.rollout.arrival_radius; });
    f64("rollout", "v_max", [](Config& c) -> double& { return c.rollout.v_max; });
    i64("rollout", "episodes_per_label",
        [](Config& c) -> int64_t& { return c.rollout.episodes_per_label; });

    i64("bc", "steps", [](Config& c) -> int64_t& { return c.bc.steps; });
    i64("bc", "batch", [](Config& c) -> int64_t& { return c.bc.batch; });
    f64("bc", "lr", [](Config& c) -> double& { return c.bc.lr; });
    f64("bc", "eval_noise", [](Config& c) -> double& { return c.bc.eval_noise; });
    i64("bc", "invert_steps",
        [](Config& c) -> int64_t& { return c.bc.invert_steps; });
    f64("bc", "invert_lr", [](Config& c) -> double& { return c.bc.invert_lr; });

    i64("cvae", "steps", [](Config& c) -> int64_t& { return c.cvae.steps; });
    i64("cvae", "batch", [](Config& c) -> int64_t& { return c.cvae.batch; });
    f64("cvae", "lr", [](Config& c) -> double& { return c.cvae.lr; });
    i64("cvae", "latent_dim",
        [](Config& c) -> int64_t& { return c.cvae.latent_dim; });
    f64("cvae", "kl_weight", [](Config& c) -> double& { return c.cvae.kl_weight; });
    f64("cvae", "gen_noise", [](Config& c) -> double& { return c.cvae.gen_noise; });
    i64("cvae", "invert_steps",
        [](Config& c) -> int64_t& { return c.cvae.invert_steps; });
    f64("cvae", "invert_lr", [](Config& c) -> double& { return c.cvae.invert_lr; });
    return r;
  }();
  return reg;
}

const Entry& find_entry(const std::string& section, const std::string& key) {
  for (const auto& e : registry()) {
    if (e.section == section && e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_text(Config& cfg, const std::string& text,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = origin + ":" + std::to_string(lineno);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(where + ": key '" + key + "' outside any section");
    }
    find_entry(section, key).set(cfg, value);
  }
}

void apply_config_file(Config& cfg, const std::string& path) {
  apply_config_text(cfg, read_file(path), path);
}

void apply_env_overrides(Config& cfg) {
  for (const auto& e : registry()) {
    std::string name = "IGEN_" + e.section + "_" + e.key;
    for (auto& ch : name) ch = static_cast<char>(std::toupper(ch));
    const char* v = std::getenv(name.c_str());
    if (v != nullptr) e.set(cfg, v);
  }
}

void set_config_value(Config& cfg, const std::string& dotted_key,
                      const std::string& value) {
  size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("config key must be section.key: '" + dotted_key + "'");
  }
  find_entry(dotted_key.substr(0, dot), dotted_key.substr(dot + 1))
      .set(cfg, value);
}

std::string dump_config(const Config& cfg) {
  std::string out;
  std::string section;
  for (const auto& e : registry()) {
    if (e.section != section) {
      if (!out.empty()) out += '\n';
      out += "[" + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get(cfg) + "\n";
  }
  return out;
}

}  // namespace igen
