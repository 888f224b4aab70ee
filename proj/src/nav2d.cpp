#include "igen/nav2d.hpp"

#include <algorithm>
#include <cmath>

#include "igen/error.hpp"
#include "igen/normalize.hpp"

namespace igen {

namespace {
const char* kColorNames[] = {"red", "yellow", "purple", "green"};
const char* kShapeNames[] = {"cone", "sphere", "bowl", "cube"};

int color_id(const std::string& word) {
  for (int i = 0; i < kNavColorCount; ++i) {
    if (word == kColorNames[i]) return i;
  }
  return -1;
}

int shape_id(const std::string& word) {
  for (int i = 0; i < kNavShapeCount; ++i) {
    if (word == kShapeNames[i]) return i;
  }
  return -1;
}

double dist2d(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

// Training attribute tables: red/yellow objects come as cones/spheres,
// purple/green objects come as bowls/cubes.
bool color_is_warm(int c) { return c == 0 || c == 1; }

std::array<int, 2> shape_pool_for_color(int c) {
  return color_is_warm(c) ? std::array<int, 2>{0, 1} : std::array<int, 2>{2, 3};
}

std::array<int, 2> color_pool_for_shape(int s) {
  return (s == 0 || s == 1) ? std::array<int, 2>{0, 1} : std::array<int, 2>{2, 3};
}

}  // namespace

const char* nav_color_name(int c) { return kColorNames[c]; }
const char* nav_shape_name(int s) { return kShapeNames[s]; }

Tensor Nav2dEpisode::s0_from_parts(double ax, double ay,
                                   const std::array<Nav2dObject, 2>& objects) {
  Tensor s({kStateWidth});
  s[0] = ax;
  s[1] = ay;
  for (int i = 0; i < 2; ++i) {
    const Nav2dObject& o = objects[static_cast<size_t>(i)];
    int64_t base = 2 + 10 * i;
    s[base + 0] = o.x;
    s[base + 1] = o.y;
    s[base + 2 + o.color] = 1.0;
    s[base + 6 + o.shape] = 1.0;
  }
  return s;
}

Tensor Nav2dEpisode::s0_tensor() const {
  return s0_from_parts(agent_x, agent_y, objects);
}

Tensor Nav2dEpisode::traj_tensor() const {
  Tensor t({kTrajWidth});
  for (int64_t i = 0; i < kHorizon; ++i) {
    t[2 * i] = traj[static_cast<size_t>(i)][0];
    t[2 * i + 1] = traj[static_cast<size_t>(i)][1];
  }
  return t;
}

Nav2dLabel parse_nav_label(const std::string& name) {
  const std::string prefix = "go to ";
  if (name.rfind(prefix, 0) != 0) {
    throw ConfigError("unknown navigation label '" + name + "'");
  }
  std::string rest = name.substr(prefix.size());
  std::vector<std::string> words;
  size_t pos = 0;
  while (pos < rest.size()) {
    size_t next = rest.find(' ', pos);
    if (next == std::string::npos) next = rest.size();
    if (next > pos) words.push_back(rest.substr(pos, next - pos));
    pos = next + 1;
  }
  Nav2dLabel label;
  label.name = name;
  if (words.size() == 2 && words[1] == "object") {
    label.want_color = color_id(words[0]);
    if (label.want_color < 0) {
      throw ConfigError("unknown color in label '" + name + "'");
    }
    return label;
  }
  if (words.size() == 1) {
    label.want_shape = shape_id(words[0]);
    if (label.want_shape < 0) {
      throw ConfigError("unknown shape in label '" + name + "'");
    }
    return label;
  }
  if (words.size() == 2) {
    label.want_color = color_id(words[0]);
    label.want_shape = shape_id(words[1]);
    if (label.want_color < 0 || label.want_shape < 0) {
      throw ConfigError("unknown attributes in label '" + name + "'");
    }
    return label;
  }
  throw ConfigError("unknown navigation label '" + name + "'");
}

std::vector<std::string> nav2d_training_label_names() {
  return {"go to red object", "go to yellow object", "go to bowl", "go to cube"};
}

std::vector<std::string> nav2d_new_task_names() {
  return {"go to red bowl", "go to yellow bowl", "go to red cube",
          "go to yellow cube", "go to purple cone"};
}

bool nav_label_matches(const Nav2dLabel& label, const Nav2dObject& obj) {
  if (label.want_color >= 0 && obj.color != label.want_color) return false;
  if (label.want_shape >= 0 && obj.shape != label.want_shape) return false;
  return true;
}

namespace {

struct AttributePair {
  Nav2dObject target;
  Nav2dObject distractor;
};

// Attribute assignment per the training / new-task tables. Positions are
// filled in later.
AttributePair draw_attributes(const Nav2dLabel& label, Rng& rng) {
  AttributePair p;
  bool composite = label.want_color >= 0 && label.want_shape >= 0;
  if (composite) {
    p.target.color = label.want_color;
    p.target.shape = label.want_shape;
    if (rng.bernoulli(0.5)) {
      // Distractor shares the color; its shape stays in distribution.
      p.distractor.color = label.want_color;
      auto pool = shape_pool_for_color(label.want_color);
      p.distractor.shape = pool[rng.uniform_below(2)];
    } else {
      // Distractor shares the shape; its color stays in distribution.
      p.distractor.shape = label.want_shape;
      auto pool = color_pool_for_shape(label.want_shape);
      p.distractor.color = pool[rng.uniform_below(2)];
    }
    return p;
  }
  if (label.want_color >= 0) {
    p.target.color = label.want_color;
    p.distractor.color = label.want_color == 0 ? 1 : 0;  // red <-> yellow
    p.target.shape = static_cast<int>(rng.uniform_below(2));      // cone|sphere
    p.distractor.shape = static_cast<int>(rng.uniform_below(2));
    return p;
  }
  p.target.shape = label.want_shape;
  p.distractor.shape = label.want_shape == 2 ? 3 : 2;  // bowl <-> cube
  p.target.color = 2 + static_cast<int>(rng.uniform_below(2));      // purple|green
  p.distractor.color = 2 + static_cast<int>(rng.uniform_below(2));
  return p;
}

double point_segment_distance(double px, double py, double ax, double ay,
                              double bx, double by) {
  double vx = bx - ax;
  double vy = by - ay;
  double len2 = vx * vx + vy * vy;
  double t = len2 == 0.0 ? 0.0 : ((px - ax) * vx + (py - ay) * vy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist2d(px, py, ax + t * vx, ay + t * vy);
}

}  // namespace

std::vector<Nav2dEpisode> gen_nav2d(const Nav2dLabel& label, int64_t count,
                                    Rng& rng, const Nav2dGenOpts& opts,
                                    GenReport* report) {
  if (label.want_color < 0 && label.want_shape < 0) {
    throw ConfigError("gen_nav2d: unconstrained label '" + label.name + "'");
  }
  std::vector<Nav2dEpisode> out;
  out.reserve(static_cast<size_t>(count));
  GenReport local;
  while (static_cast<int64_t>(out.size()) < count) {
    int64_t attempts_this = 0;
    for (;;) {
      if (attempts_this++ >= opts.budget_per_episode) {
        throw BudgetError("gen_nav2d: budget exhausted for '" + label.name +
                          "' (acceptance rate " +
                          std::to_string(local.acceptance_rate()) + ")");
      }
      ++local.attempts;

      AttributePair attrs = draw_attributes(label, rng);
      double ax = rng.uniform(opts.xy_min, opts.xy_max);
      double ay = rng.uniform(opts.xy_min, opts.xy_max);
      attrs.target.x = rng.uniform(opts.xy_min, opts.xy_max);
      attrs.target.y = rng.uniform(opts.xy_min, opts.xy_max);
      attrs.distractor.x = rng.uniform(opts.xy_min, opts.xy_max);
      attrs.distractor.y = rng.uniform(opts.xy_min, opts.xy_max);

      if (dist2d(attrs.target.x, attrs.target.y, attrs.distractor.x,
                 attrs.distractor.y) < opts.min_separation) {
        continue;
      }
      if (dist2d(ax, ay, attrs.target.x, attrs.target.y) < opts.min_separation ||
          dist2d(ax, ay, attrs.distractor.x, attrs.distractor.y) <
              opts.min_separation) {
        continue;
      }
      if (dist2d(ax, ay, attrs.target.x, attrs.target.y) >
          opts.max_start_distance) {
        continue;
      }
      if (point_segment_distance(attrs.distractor.x, attrs.distractor.y, ax, ay,
                                 attrs.target.x, attrs.target.y) <
          opts.corridor_clearance) {
        continue;
      }

      Nav2dEpisode ep;
      ep.agent_x = ax;
      ep.agent_y = ay;
      // Slot order by ascending x; the concept, not the slot, identifies
      // the target.
      if (attrs.target.x <= attrs.distractor.x) {
        ep.objects = {attrs.target, attrs.distractor};
        ep.target_slot = 0;
      } else {
        ep.objects = {attrs.distractor, attrs.target};
        ep.target_slot = 1;
      }

      // Straight-line walk with jitter, parked at the target.
      ep.traj.resize(Nav2dEpisode::kHorizon);
      double px = ax;
      double py = ay;
      ep.traj[0] = {px, py};
      bool ok = true;
      for (int64_t i = 1; i < Nav2dEpisode::kHorizon; ++i) {
        double dx = attrs.target.x - px;
        double dy = attrs.target.y - py;
        double d = std::hypot(dx, dy);
        double step = std::min(opts.v_max, d);
        if (d > 1e-12) {
          px += step * dx / d;
          py += step * dy / d;
        }
        px += opts.jitter_sigma * rng.normal();
        py += opts.jitter_sigma * rng.normal();
        px = std::clamp(px, opts.xy_min, opts.xy_max);
        py = std::clamp(py, opts.xy_min, opts.xy_max);
        ep.traj[static_cast<size_t>(i)] = {px, py};
        if (dist2d(px, py, attrs.distractor.x, attrs.distractor.y) <=
            opts.arrival_radius) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      if (dist2d(px, py, attrs.target.x, attrs.target.y) >=
          opts.arrival_radius) {
        continue;
      }
      ++local.accepted;
      out.push_back(std::move(ep));
      break;
    }
  }
  if (report != nullptr) *report = local;
  return out;
}

bool eval_nav2d_progress(const std::array<double, 2>& start,
                         const std::array<double, 2>& finish,
                         const std::array<double, 2>& target) {
  return dist2d(finish[0], finish[1], target[0], target[1]) <
         dist2d(start[0], start[1], target[0], target[1]);
}

bool nav2d_path_success(const std::vector<std::array<double, 2>>& path,
                        const std::array<double, 2>& target,
                        const std::array<double, 2>& distractor,
                        double arrival_radius) {
  for (const auto& p : path) {
    if (dist2d(p[0], p[1], distractor[0], distractor[1]) < arrival_radius) {
      return false;
    }
    if (dist2d(p[0], p[1], target[0], target[1]) < arrival_radius) {
      return true;
    }
  }
  return false;
}

std::array<double, 2> nav2d_step(const std::array<double, 2>& pos,
                                 const std::array<double, 2>& action,
                                 double v_max) {
  double norm = std::hypot(action[0], action[1]);
  double scale = norm > v_max ? v_max / norm : 1.0;
  return {pos[0] + scale * action[0], pos[1] + scale * action[1]};
}

std::vector<std::array<double, 2>> nav2d_decode_traj(const Tensor& flat_norm) {
  Normalizer norm = nav2d_traj_normalizer();
  Tensor raw = norm.denormalize(flat_norm);
  std::vector<std::array<double, 2>> path(
      static_cast<size_t>(Nav2dEpisode::kHorizon));
  for (int64_t i = 0; i < Nav2dEpisode::kHorizon; ++i) {
    path[static_cast<size_t>(i)] = {raw[2 * i], raw[2 * i + 1]};
  }
  return path;
}

RolloutResult closed_loop_rollout(const MlpDenoiser& model,
                                  const DiffusionSchedule& sched,
                                  const CompositionSpec& spec,
                                  const Nav2dEpisode& episode,
                                  const RolloutOpts& opts, Rng& rng) {
  if (opts.replan_every < 1) throw ConfigError("rollout: replan_every must be >= 1");
  if (opts.plan_offset + 1 > Nav2dEpisode::kHorizon) {
    throw ConfigError("rollout: plan offset beyond planner horizon");
  }
  Normalizer snorm = nav2d_state_normalizer();
  const Nav2dObject& target = episode.target();
  const Nav2dObject& distractor = episode.distractor();

  RolloutResult result;
  std::array<double, 2> pos = {episode.agent_x, episode.agent_y};
  result.trace.push_back(pos);
  std::vector<std::array<double, 2>> plan;
  int64_t since_replan = 0;

  for (int64_t step = 0; step < opts.max_steps; ++step) {
    if (plan.empty() || since_replan >= opts.replan_every) {
      Tensor s0 = snorm.normalize(
          Nav2dEpisode::s0_from_parts(pos[0], pos[1], episode.objects));
      Rng chain = rng.substream(static_cast<uint64_t>(result.replans));
      Tensor flat = sample(model, sched, spec, &s0, chain);
      if (!flat.all_finite()) {
        throw NumericError("rollout: non-finite plan state");
      }
      plan = nav2d_decode_traj(flat);
      since_replan = 0;
      ++result.replans;
    }
    int64_t idx = std::min<int64_t>(since_replan + opts.plan_offset,
                                    Nav2dEpisode::kHorizon - 1);
    const auto& want = plan[static_cast<size_t>(idx)];
    std::array<double, 2> action = {want[0] - pos[0], want[1] - pos[1]};
    pos = nav2d_step(pos, action, opts.v_max);
    result.trace.push_back(pos);
    ++since_replan;

    if (dist2d(pos[0], pos[1], distractor.x, distractor.y) <
        opts.arrival_radius) {
      result.outcome = RolloutOutcome::ReachedDistractor;
      result.success = false;
      return result;
    }
    if (dist2d(pos[0], pos[1], target.x, target.y) < opts.arrival_radius) {
      result.outcome = RolloutOutcome::ReachedTarget;
      result.success = true;
      return result;
    }
  }
  result.outcome = RolloutOutcome::Timeout;
  result.success = false;
  return result;
}

}  // namespace igen
