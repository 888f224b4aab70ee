#include "igen/rearrange.hpp"

#include <algorithm>
#include <cmath>

#include "igen/error.hpp"

namespace igen {

const char* shape_name(ShapeKind s) {
  switch (s) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Square: return "square";
  }
  return "?";
}

std::array<double, Scene::kFlatWidth> Scene::flatten() const {
  std::array<double, kFlatWidth> v{};
  for (int slot = 0; slot < 3; ++slot) {
    const SceneObject& o = objects[static_cast<size_t>(slot)];
    double* p = v.data() + 7 * slot;
    p[0] = o.x;
    p[1] = o.y;
    p[2] = o.radius;
    p[3] = o.angle;
    p[4 + shape_of_slot[static_cast<size_t>(slot)]] = 1.0;
  }
  return v;
}

Tensor Scene::flat_tensor() const {
  auto v = flatten();
  return Tensor::from(std::vector<double>(v.begin(), v.end()));
}

Scene Scene::from_flat(const double* v) {
  Scene s;
  for (int slot = 0; slot < 3; ++slot) {
    const double* p = v + 7 * slot;
    SceneObject& o = s.objects[static_cast<size_t>(slot)];
    o.x = p[0];
    o.y = p[1];
    o.radius = p[2];
    o.angle = p[3];
    int best = 0;
    for (int k = 1; k < kShapeCount; ++k) {
      if (p[4 + k] > p[4 + best]) best = k;
    }
    s.shape_of_slot[static_cast<size_t>(slot)] = best;
  }
  return s;
}

std::optional<int> Scene::slot_of(ShapeKind s) const {
  int found = -1;
  for (int slot = 0; slot < 3; ++slot) {
    if (shape_of_slot[static_cast<size_t>(slot)] == static_cast<int>(s)) {
      if (found >= 0) return std::nullopt;
      found = slot;
    }
  }
  if (found < 0) return std::nullopt;
  return found;
}

bool strict_relation(const SceneObject& a, const SceneObject& b, Relation rel) {
  if (rel == Relation::RightOf) {
    return a.x > b.x && std::fabs(a.y - b.y) <= a.radius;
  }
  return a.y > b.y && std::fabs(a.x - b.x) <= a.radius;
}

bool strict_scene_relation(const Scene& scene, const RelationSpec& spec) {
  auto sa = scene.slot_of(spec.a);
  auto sb = scene.slot_of(spec.b);
  if (!sa || !sb) return false;
  return strict_relation(scene.objects[static_cast<size_t>(*sa)],
                         scene.objects[static_cast<size_t>(*sb)], spec.rel);
}

bool relaxed_relation(const SceneObject& a, const SceneObject& b, Relation rel) {
  double margin = 2.0 * std::max(a.radius, b.radius);
  if (rel == Relation::RightOf) {
    return a.x > b.x && std::fabs(a.y - b.y) <= margin;
  }
  return a.y > b.y && std::fabs(a.x - b.x) <= margin;
}

bool relaxed_diagonal(const SceneObject& a, const SceneObject& b) {
  double margin = 2.0 * std::max(a.radius, b.radius);
  return a.x > b.x && a.y > b.y && std::fabs(a.y - a.x) <= margin &&
         std::fabs(b.y - b.x) <= margin;
}

namespace {

bool strict_diagonal(const SceneObject& a, const SceneObject& b) {
  // Generated demos place the centers exactly on f(x) = x.
  return a.x > b.x && a.y > b.y && std::fabs(a.y - a.x) <= 1e-9 &&
         std::fabs(b.y - b.x) <= 1e-9;
}

}  // namespace

std::optional<double> circumradius(const Scene& scene) {
  const SceneObject& p1 = scene.objects[0];
  const SceneObject& p2 = scene.objects[1];
  const SceneObject& p3 = scene.objects[2];
  double d = 2.0 * (p1.x * (p2.y - p3.y) + p2.x * (p3.y - p1.y) +
                    p3.x * (p1.y - p2.y));
  if (std::fabs(d) < 1e-12) return std::nullopt;
  double s1 = p1.x * p1.x + p1.y * p1.y;
  double s2 = p2.x * p2.x + p2.y * p2.y;
  double s3 = p3.x * p3.x + p3.y * p3.y;
  double ux = (s1 * (p2.y - p3.y) + s2 * (p3.y - p1.y) + s3 * (p1.y - p2.y)) / d;
  double uy = (s1 * (p3.x - p2.x) + s2 * (p1.x - p3.x) + s3 * (p2.x - p1.x)) / d;
  return std::hypot(p1.x - ux, p1.y - uy);
}

bool eval_rearrangement(const Scene& scene, const LabelSpec& label) {
  for (const auto& rel : label.relations) {
    auto sa = scene.slot_of(rel.a);
    auto sb = scene.slot_of(rel.b);
    if (!sa || !sb) return false;
    if (!relaxed_relation(scene.objects[static_cast<size_t>(*sa)],
                          scene.objects[static_cast<size_t>(*sb)], rel.rel)) {
      return false;
    }
  }
  for (const auto& diag : label.diagonals) {
    auto sa = scene.slot_of(diag.a);
    auto sb = scene.slot_of(diag.b);
    if (!sa || !sb) return false;
    if (!relaxed_diagonal(scene.objects[static_cast<size_t>(*sa)],
                          scene.objects[static_cast<size_t>(*sb)])) {
      return false;
    }
  }
  if (label.ring) {
    auto r = circumradius(scene);
    if (!r || std::fabs(*r - kRingRadius) >= kRingTolerance) return false;
  }
  if (label.relations.empty() && label.diagonals.empty() && !label.ring) {
    throw ConfigError("eval: empty label '" + label.name + "'");
  }
  return true;
}

bool strict_scene_check(const Scene& scene, const LabelSpec& label) {
  for (const auto& rel : label.relations) {
    if (!strict_scene_relation(scene, rel)) return false;
  }
  for (const auto& diag : label.diagonals) {
    auto sa = scene.slot_of(diag.a);
    auto sb = scene.slot_of(diag.b);
    if (!sa || !sb) return false;
    if (!strict_diagonal(scene.objects[static_cast<size_t>(*sa)],
                         scene.objects[static_cast<size_t>(*sb)])) {
      return false;
    }
  }
  if (label.ring) {
    auto r = circumradius(scene);
    if (!r || std::fabs(*r - kRingRadius) > 1e-6) return false;
  }
  return true;
}

namespace {

bool non_overlapping(const Scene& scene) {
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const SceneObject& a = scene.objects[static_cast<size_t>(i)];
      const SceneObject& b = scene.objects[static_cast<size_t>(j)];
      if (std::hypot(a.x - b.x, a.y - b.y) <= a.radius + b.radius) return false;
    }
  }
  return true;
}

bool in_bounds(const SceneObject& o, const RearrangeGenOpts& opts) {
  return o.x >= opts.xy_min && o.x <= opts.xy_max && o.y >= opts.xy_min &&
         o.y <= opts.xy_max;
}

// Reject scenes carrying strict training relations the label did not ask for.
bool incidental_relation_free(const Scene& scene, const LabelSpec& label) {
  for (int a = 0; a < kShapeCount; ++a) {
    for (int b = 0; b < kShapeCount; ++b) {
      if (a == b) continue;
      for (Relation rel : {Relation::RightOf, Relation::Above}) {
        RelationSpec spec{rel, static_cast<ShapeKind>(a), static_cast<ShapeKind>(b)};
        bool required =
            std::find(label.relations.begin(), label.relations.end(), spec) !=
            label.relations.end();
        if (!required && strict_scene_relation(scene, spec)) return false;
      }
    }
  }
  return true;
}

SceneObject random_object(Rng& rng, const RearrangeGenOpts& opts) {
  SceneObject o;
  o.x = rng.uniform(opts.xy_min, opts.xy_max);
  o.y = rng.uniform(opts.xy_min, opts.xy_max);
  o.radius = rng.uniform(opts.r_min, opts.r_max);
  o.angle = rng.uniform(0.0, 2.0 * M_PI);
  return o;
}

Scene propose(const LabelSpec& label, Rng& rng, const RearrangeGenOpts& opts) {
  Scene s;
  if (label.ring) {
    double cx = rng.uniform(opts.xy_min, opts.xy_max);
    double cy = rng.uniform(opts.xy_min, opts.xy_max);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int slot = 0; slot < 3; ++slot) {
      double ang = phase + 2.0 * M_PI * slot / 3.0;
      SceneObject& o = s.objects[static_cast<size_t>(slot)];
      o.x = cx + kRingRadius * std::cos(ang);
      o.y = cy + kRingRadius * std::sin(ang);
      o.radius = rng.uniform(opts.r_min, opts.r_max);
      o.angle = rng.uniform(0.0, 2.0 * M_PI);
    }
    return s;
  }

  for (int slot = 0; slot < 3; ++slot) {
    s.objects[static_cast<size_t>(slot)] = random_object(rng, opts);
  }
  // Diagonal pairs are placed constructively on f(x) = x, larger parameter
  // to the above-right member.
  for (const auto& diag : label.diagonals) {
    double t1 = rng.uniform(opts.xy_min, opts.xy_max);
    double t2 = rng.uniform(opts.xy_min, opts.xy_max);
    double hi = std::max(t1, t2);
    double lo = std::min(t1, t2);
    SceneObject& a = s.objects[static_cast<size_t>(diag.a)];
    SceneObject& b = s.objects[static_cast<size_t>(diag.b)];
    a.x = hi;
    a.y = hi;
    b.x = lo;
    b.y = lo;
  }
  return s;
}

}  // namespace

std::vector<Scene> gen_rearrangement(const LabelSpec& label, int64_t count,
                                     Rng& rng, const RearrangeGenOpts& opts,
                                     GenReport* report) {
  if (count < 1) throw ConfigError("gen: count must be >= 1");
  if (label.relations.empty() && label.diagonals.empty() && !label.ring) {
    throw ConfigError("gen: empty label '" + label.name + "'");
  }
  std::vector<Scene> out;
  out.reserve(static_cast<size_t>(count));
  GenReport local;
  while (static_cast<int64_t>(out.size()) < count) {
    int64_t attempts_this_scene = 0;
    for (;;) {
      if (attempts_this_scene++ >= opts.budget_per_scene) {
        throw BudgetError(
            "gen: rejection budget exhausted for label '" + label.name +
            "' (acceptance rate " + std::to_string(local.acceptance_rate()) +
            ")");
      }
      ++local.attempts;
      Scene s = propose(label, rng, opts);
      bool ok = true;
      for (const auto& o : s.objects) ok = ok && in_bounds(o, opts);
      ok = ok && non_overlapping(s);
      ok = ok && strict_scene_check(s, label);
      if (ok && opts.filter_incidental) {
        ok = incidental_relation_free(s, label);
      }
      if (ok) {
        ++local.accepted;
        out.push_back(s);
        break;
      }
    }
  }
  if (report != nullptr) *report = local;
  return out;
}

namespace {

std::optional<ShapeKind> parse_shape(const std::string& word) {
  if (word == "circle") return ShapeKind::Circle;
  if (word == "triangle") return ShapeKind::Triangle;
  if (word == "square") return ShapeKind::Square;
  return std::nullopt;
}

void parse_clause(const std::string& clause, LabelSpec& spec) {
  if (clause == "circle") {
    spec.ring = true;
    return;
  }
  if (clause == "line") {
    spec.relations.push_back({Relation::RightOf, ShapeKind::Circle, ShapeKind::Triangle});
    spec.relations.push_back({Relation::RightOf, ShapeKind::Triangle, ShapeKind::Square});
    return;
  }
  std::vector<std::string> words;
  size_t pos = 0;
  while (pos < clause.size()) {
    size_t next = clause.find(' ', pos);
    if (next == std::string::npos) next = clause.size();
    if (next > pos) words.push_back(clause.substr(pos, next - pos));
    pos = next + 1;
  }
  auto fail = [&]() -> void {
    throw ConfigError("unknown label clause '" + clause + "'");
  };
  if (words.size() == 4 && words[1] == "right" && words[2] == "of") {
    auto a = parse_shape(words[0]);
    auto b = parse_shape(words[3]);
    if (!a || !b || *a == *b) fail();
    spec.relations.push_back({Relation::RightOf, *a, *b});
    return;
  }
  if (words.size() == 3 && words[1] == "above") {
    auto a = parse_shape(words[0]);
    auto b = parse_shape(words[2]);
    if (!a || !b || *a == *b) fail();
    spec.relations.push_back({Relation::Above, *a, *b});
    return;
  }
  if (words.size() == 4 && words[1] == "diagonal" && words[2] == "to") {
    auto a = parse_shape(words[0]);
    auto b = parse_shape(words[3]);
    if (!a || !b || *a == *b) fail();
    spec.diagonals.push_back({*a, *b});
    return;
  }
  fail();
}

}  // namespace

LabelSpec parse_label(const std::string& name) {
  LabelSpec spec;
  spec.name = name;
  const std::string sep = " and ";
  size_t pos = 0;
  while (pos <= name.size()) {
    size_t next = name.find(sep, pos);
    std::string clause = name.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    if (clause.empty()) {
      throw ConfigError("empty clause in label '" + name + "'");
    }
    parse_clause(clause, spec);
    if (next == std::string::npos) break;
    pos = next + sep.size();
  }
  return spec;
}

std::vector<std::string> rearrange_training_label_names() {
  std::vector<std::string> names;
  const char* shapes[] = {"circle", "triangle", "square"};
  for (const char* relword : {"right of", "above"}) {
    for (const char* a : shapes) {
      for (const char* b : shapes) {
        if (std::string(a) == b) continue;
        names.push_back(std::string(a) + " " + relword + " " + b);
      }
    }
  }
  return names;
}

std::vector<RearrangeTask> rearrange_new_tasks() {
  std::vector<RearrangeTask> tasks;
  auto add = [&](RearrangeTask::Kind kind, const std::string& eval_name,
                 const std::string& demo_label, const std::string& partner) {
    RearrangeTask t;
    t.kind = kind;
    t.eval_label = parse_label(eval_name);
    t.demo_label = demo_label;
    t.training_partner = partner;
    tasks.push_back(std::move(t));
  };

  for (const char* name :
       {"triangle right of square and circle above square",
        "square right of triangle and circle above triangle",
        "circle right of square and triangle above square",
        "square right of circle and triangle above circle", "line"}) {
    add(RearrangeTask::Kind::TrainingComposition, name, name, "");
  }
  for (const char* name :
       {"circle", "square diagonal to triangle", "triangle diagonal to square",
        "circle diagonal to triangle", "triangle diagonal to circle"}) {
    add(RearrangeTask::Kind::NewConcept, name, name, "");
  }
  const std::string diag = "square diagonal to triangle";
  for (const char* partner :
       {"circle right of square", "circle above square", "circle above triangle",
        "circle right of triangle", "triangle above circle"}) {
    add(RearrangeTask::Kind::NewPlusTraining, diag + " and " + partner, diag,
        partner);
  }
  return tasks;
}

}  // namespace igen
