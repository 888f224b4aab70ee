#include <doctest.h>

#include <cmath>
#include <set>

#include "igen/nav2d.hpp"
#include "igen/rearrange.hpp"
#include "igen/rng.hpp"

using igen::LabelSpec;
using igen::Nav2dEpisode;
using igen::Nav2dGenOpts;
using igen::Nav2dLabel;
using igen::RearrangeGenOpts;
using igen::Relation;
using igen::Rng;
using igen::Scene;
using igen::SceneObject;
using igen::ShapeKind;

namespace {

Scene random_valid_scene(Rng& rng) {
  // Uniform over the domain's state bounds, subject to non-overlap only;
  // the chance-envelope oracle for the relaxed predicates.
  for (;;) {
    Scene s;
    for (int slot = 0; slot < 3; ++slot) {
      SceneObject& o = s.objects[static_cast<size_t>(slot)];
      o.x = rng.uniform(0.0, 5.0);
      o.y = rng.uniform(0.0, 5.0);
      o.radius = rng.uniform(0.3, 1.0);
      o.angle = rng.uniform(0.0, 2.0 * M_PI);
    }
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) {
      for (int j = i + 1; j < 3 && ok; ++j) {
        const auto& a = s.objects[static_cast<size_t>(i)];
        const auto& b = s.objects[static_cast<size_t>(j)];
        ok = std::hypot(a.x - b.x, a.y - b.y) > a.radius + b.radius;
      }
    }
    if (ok) return s;
  }
}

}  // namespace

TEST_CASE("strict predicate examples") {
  SUBCASE("circle right of square worked example") {
    SceneObject circle{3.0, 2.0, 0.5, 0.0};
    SceneObject square{1.0, 2.3, 0.4, 0.0};
    CHECK(igen::strict_relation(circle, square, Relation::RightOf));
    CHECK(igen::relaxed_relation(circle, square, Relation::RightOf));
  }
  SUBCASE("strict band uses the subject radius") {
    SceneObject a{3.0, 2.0, 0.5, 0.0};
    SceneObject b{1.0, 2.6, 0.4, 0.0};
    CHECK_FALSE(igen::strict_relation(a, b, Relation::RightOf));  // |dy|=0.6 > 0.5
    CHECK(igen::relaxed_relation(a, b, Relation::RightOf));       // <= 2*0.5
  }
}

TEST_CASE("ring construction worked example") {
  // Circumcircle of radius 1.67 around (2.5, 2.5), phase 0.
  Scene s;
  double cx = 2.5, cy = 2.5;
  for (int slot = 0; slot < 3; ++slot) {
    double ang = 2.0 * M_PI * slot / 3.0;
    s.objects[static_cast<size_t>(slot)].x = cx + igen::kRingRadius * std::cos(ang);
    s.objects[static_cast<size_t>(slot)].y = cy + igen::kRingRadius * std::sin(ang);
    s.objects[static_cast<size_t>(slot)].radius = 0.4;
  }
  CHECK(s.objects[0].x == doctest::Approx(4.17));
  CHECK(s.objects[0].y == doctest::Approx(2.5));
  CHECK(s.objects[1].x == doctest::Approx(1.665));
  CHECK(s.objects[1].y == doctest::Approx(3.946).epsilon(1e-3));
  CHECK(s.objects[2].x == doctest::Approx(1.665));
  CHECK(s.objects[2].y == doctest::Approx(1.054).epsilon(1e-3));

  auto r = igen::circumradius(s);
  REQUIRE(r.has_value());
  CHECK(*r == doctest::Approx(igen::kRingRadius).epsilon(1e-9));
  CHECK(igen::eval_rearrangement(s, igen::parse_label("circle")));
}

TEST_CASE("collinear centers have no circumradius and fail the ring test") {
  Scene s;
  for (int slot = 0; slot < 3; ++slot) {
    s.objects[static_cast<size_t>(slot)].x = 1.0 + slot;
    s.objects[static_cast<size_t>(slot)].y = 1.0 + slot;
    s.objects[static_cast<size_t>(slot)].radius = 0.3;
  }
  CHECK_FALSE(igen::circumradius(s).has_value());
  CHECK_FALSE(igen::eval_rearrangement(s, igen::parse_label("circle")));
}

TEST_CASE("diagonal relaxed predicate worked example") {
  Scene s;
  s.objects[2] = {3.0, 3.0, 0.4, 0.0};  // square slot
  s.objects[1] = {1.0, 1.0, 0.4, 0.0};  // triangle slot
  s.objects[0] = {4.5, 0.5, 0.3, 0.0};  // circle, irrelevant
  LabelSpec diag = igen::parse_label("square diagonal to triangle");
  CHECK(igen::eval_rearrangement(s, diag));
  // Swapped order fails (above-right is directional).
  LabelSpec rev = igen::parse_label("triangle diagonal to square");
  CHECK_FALSE(igen::eval_rearrangement(s, rev));
}

TEST_CASE("label parser") {
  LabelSpec line = igen::parse_label("line");
  CHECK(line.relations.size() == 2);
  CHECK(line.relations[0] ==
        igen::RelationSpec{Relation::RightOf, ShapeKind::Circle, ShapeKind::Triangle});
  CHECK(line.relations[1] ==
        igen::RelationSpec{Relation::RightOf, ShapeKind::Triangle, ShapeKind::Square});

  LabelSpec comp = igen::parse_label("triangle right of square and circle above square");
  CHECK(comp.relations.size() == 2);

  LabelSpec mixed = igen::parse_label("square diagonal to triangle and circle right of square");
  CHECK(mixed.relations.size() == 1);
  CHECK(mixed.diagonals.size() == 1);

  CHECK_THROWS_AS(igen::parse_label("circle sideways of square"), igen::ConfigError);
  CHECK_THROWS_AS(igen::parse_label("circle right of circle"), igen::ConfigError);

  CHECK(igen::rearrange_training_label_names().size() == 12);
  auto tasks = igen::rearrange_new_tasks();
  CHECK(tasks.size() == 15);
  int comps = 0, news = 0, mixeds = 0;
  for (const auto& t : tasks) {
    switch (t.kind) {
      case igen::RearrangeTask::Kind::TrainingComposition: ++comps; break;
      case igen::RearrangeTask::Kind::NewConcept: ++news; break;
      case igen::RearrangeTask::Kind::NewPlusTraining: ++mixeds; break;
    }
  }
  CHECK(comps == 5);
  CHECK(news == 5);
  CHECK(mixeds == 5);
}

TEST_CASE("generator soundness across the taxonomy") {
  RearrangeGenOpts opts;
  for (const auto& name : igen::rearrange_training_label_names()) {
    LabelSpec label = igen::parse_label(name);
    Rng rng = igen::make_rng(3, {"test", "gen", name});
    auto scenes = gen_rearrangement(label, 20, rng, opts);
    for (const auto& s : scenes) {
      CHECK(igen::strict_scene_check(s, label));
      CHECK(igen::eval_rearrangement(s, label));  // strict implies relaxed
    }
  }
  RearrangeGenOpts demo_opts;
  demo_opts.filter_incidental = true;
  for (const auto& task : igen::rearrange_new_tasks()) {
    if (task.kind == igen::RearrangeTask::Kind::NewPlusTraining) continue;
    LabelSpec label = igen::parse_label(task.demo_label);
    Rng rng = igen::make_rng(3, {"test", "gen", task.demo_label});
    auto scenes = gen_rearrangement(label, 5, rng, demo_opts);
    for (const auto& s : scenes) {
      CHECK(igen::strict_scene_check(s, label));
      CHECK(igen::eval_rearrangement(s, label));
      // No stray strict training relations in new-task demos.
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          if (a == b) continue;
          for (Relation rel : {Relation::RightOf, Relation::Above}) {
            igen::RelationSpec spec{rel, static_cast<ShapeKind>(a),
                                    static_cast<ShapeKind>(b)};
            bool required = std::find(label.relations.begin(),
                                      label.relations.end(),
                                      spec) != label.relations.end();
            if (!required) CHECK_FALSE(igen::strict_scene_relation(s, spec));
          }
        }
      }
    }
  }
}

TEST_CASE("strict implies relaxed on random scenes") {
  Rng rng = igen::make_rng(17, {"test", "implication"});
  auto labels = igen::rearrange_training_label_names();
  int strict_hits = 0;
  for (int i = 0; i < 10000; ++i) {
    Scene s = random_valid_scene(rng);
    for (const auto& name : labels) {
      LabelSpec label = igen::parse_label(name);
      if (igen::strict_scene_check(s, label)) {
        ++strict_hits;
        CHECK(igen::eval_rearrangement(s, label));
      }
    }
  }
  CHECK(strict_hits > 100);  // the property must actually get exercised
}

TEST_CASE("negative control: disjoint labels accept near the chance rate") {
  // Chance envelope from the brute-force base-rate oracle: relaxed
  // acceptance over uniformly random non-overlapping scenes.
  Rng oracle_rng = igen::make_rng(29, {"test", "base-rate"});
  const int oracle_n = 20000;
  auto base_rate = [&](const LabelSpec& label) {
    int hits = 0;
    for (int i = 0; i < oracle_n; ++i) {
      if (igen::eval_rearrangement(random_valid_scene(oracle_rng), label)) ++hits;
    }
    return static_cast<double>(hits) / oracle_n;
  };

  struct Pair {
    const char* gen_label;
    const char* eval_label;
  };
  // Disjoint pairs: no shared component relation.
  const Pair pairs[] = {
      {"circle right of square", "square right of circle"},
      {"circle right of square", "triangle above circle"},
      {"triangle above square", "circle right of triangle"},
  };
  RearrangeGenOpts opts;
  const int n = 2000;
  for (const auto& pair : pairs) {
    LabelSpec gen_label = igen::parse_label(pair.gen_label);
    LabelSpec eval_label = igen::parse_label(pair.eval_label);
    Rng rng = igen::make_rng(31, {"test", "negctl", pair.gen_label, pair.eval_label});
    auto scenes = gen_rearrangement(gen_label, n, rng, opts);
    int hits = 0;
    for (const auto& s : scenes) {
      if (igen::eval_rearrangement(s, eval_label)) ++hits;
    }
    double acc = static_cast<double>(hits) / n;
    double base = base_rate(eval_label);
    // Envelope: base rate + 4 combined binomial sigmas (conditioning on the
    // generating label shifts geometry slightly; the bound is the oracle's).
    double sigma = std::sqrt(base * (1.0 - base) / n + base * (1.0 - base) / oracle_n);
    CHECK(acc <= base + 4.0 * sigma + 0.01);
  }
}

TEST_CASE("scene flatten/from_flat round-trip and one-hot argmax") {
  Rng rng = igen::make_rng(5, {"test", "roundtrip"});
  Scene s = random_valid_scene(rng);
  auto flat = s.flatten();
  Scene back = Scene::from_flat(flat.data());
  for (int slot = 0; slot < 3; ++slot) {
    CHECK(back.objects[static_cast<size_t>(slot)].x ==
          s.objects[static_cast<size_t>(slot)].x);
    CHECK(back.shape_of_slot[static_cast<size_t>(slot)] ==
          s.shape_of_slot[static_cast<size_t>(slot)]);
  }
  // Duplicate shapes make predicate lookups fail closed.
  Scene dup = s;
  dup.shape_of_slot = {0, 0, 2};
  CHECK_FALSE(dup.slot_of(ShapeKind::Circle).has_value());
  CHECK_FALSE(dup.slot_of(ShapeKind::Triangle).has_value());
  CHECK(dup.slot_of(ShapeKind::Square).has_value());
  CHECK_FALSE(igen::eval_rearrangement(dup, igen::parse_label("circle right of square")));
}

TEST_CASE("nav2d label parsing and taxonomy") {
  auto red = igen::parse_nav_label("go to red object");
  CHECK(red.want_color == 0);
  CHECK(red.want_shape == -1);
  auto bowl = igen::parse_nav_label("go to bowl");
  CHECK(bowl.want_shape == 2);
  auto rb = igen::parse_nav_label("go to red bowl");
  CHECK(rb.want_color == 0);
  CHECK(rb.want_shape == 2);
  CHECK_THROWS_AS(igen::parse_nav_label("go to mauve lump"), igen::ConfigError);
  CHECK(igen::nav2d_training_label_names().size() == 4);
  CHECK(igen::nav2d_new_task_names().size() == 5);
}

TEST_CASE("nav2d generator soundness") {
  Nav2dGenOpts opts;
  for (const auto& name : igen::nav2d_training_label_names()) {
    Nav2dLabel label = igen::parse_nav_label(name);
    Rng rng = igen::make_rng(7, {"test", "navgen", name});
    auto eps = gen_nav2d(label, 10, rng, opts);
    for (const auto& ep : eps) {
      CHECK(igen::nav_label_matches(label, ep.target()));
      CHECK_FALSE(igen::nav_label_matches(label, ep.distractor()));
      // Starts at s0's agent position.
      CHECK(ep.traj[0][0] == ep.agent_x);
      CHECK(ep.traj[0][1] == ep.agent_y);
      // Ends inside the arrival radius.
      const auto& last = ep.traj.back();
      CHECK(std::hypot(last[0] - ep.target().x, last[1] - ep.target().y) <
            opts.arrival_radius);
      // Per-step displacement bounded by v_max plus jitter.
      for (size_t i = 1; i < ep.traj.size(); ++i) {
        double d = std::hypot(ep.traj[i][0] - ep.traj[i - 1][0],
                              ep.traj[i][1] - ep.traj[i - 1][1]);
        CHECK(d <= opts.v_max + 6.0 * opts.jitter_sigma);
      }
      CHECK(igen::eval_nav2d_progress(ep.traj.front(), ep.traj.back(),
                                      {ep.target().x, ep.target().y}));
      // Slots ordered by x.
      CHECK(ep.objects[0].x <= ep.objects[1].x);
    }
  }
}

TEST_CASE("nav2d new-task distractors share exactly one attribute, in distribution") {
  Nav2dGenOpts opts;
  for (const auto& name : igen::nav2d_new_task_names()) {
    Nav2dLabel label = igen::parse_nav_label(name);
    Rng rng = igen::make_rng(8, {"test", "navnew", name});
    auto eps = gen_nav2d(label, 20, rng, opts);
    for (const auto& ep : eps) {
      const auto& t = ep.target();
      const auto& d = ep.distractor();
      bool same_color = t.color == d.color;
      bool same_shape = t.shape == d.shape;
      CHECK(same_color != same_shape);
      // Distractor combination stays inside the training tables: warm
      // colors pair with cone/sphere, cool colors with bowl/cube.
      bool warm = d.color == 0 || d.color == 1;
      bool small_shape = d.shape == 0 || d.shape == 1;
      CHECK(warm == small_shape);
    }
  }
}

TEST_CASE("nav2d progress metric") {
  CHECK_FALSE(igen::eval_nav2d_progress({1, 1}, {1, 1}, {3, 3}));  // stationary
  CHECK(igen::eval_nav2d_progress({1, 1}, {3, 3}, {3, 3}));        // at target
  CHECK_FALSE(igen::eval_nav2d_progress({1, 1}, {0, 0}, {3, 3}));  // receded
}

TEST_CASE("nav2d step clipping worked example") {
  auto next = igen::nav2d_step({1.5, 2.5}, {0.5, 0.5}, 0.25);
  CHECK(next[0] == doctest::Approx(1.5 + 0.17678).epsilon(1e-4));
  CHECK(next[1] == doctest::Approx(2.5 + 0.17678).epsilon(1e-4));
  // Action within the limit passes through unchanged.
  auto small = igen::nav2d_step({0.0, 0.0}, {0.1, 0.0}, 0.25);
  CHECK(small[0] == 0.1);
}

TEST_CASE("nav2d path success metric") {
  std::vector<std::array<double, 2>> path = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CHECK(igen::nav2d_path_success(path, {3, 0.1}, {1.5, 3.0}, 0.25));
  // Touching the distractor first fails even if the target is reached later.
  CHECK_FALSE(igen::nav2d_path_success(path, {3, 0.1}, {1.0, 0.1}, 0.25));
  // Never reaching the target fails.
  CHECK_FALSE(igen::nav2d_path_success(path, {0, 4}, {4, 4}, 0.25));
}

TEST_CASE("kinematic reachability bound with an oracle plan") {
  // A perfect plan pointing at the target reaches it within
  // ceil(dist / v_max) + slack steps.
  std::array<double, 2> pos = {0.5, 0.5};
  std::array<double, 2> target = {3.5, 2.5};
  double v_max = 0.25;
  double dist = std::hypot(target[0] - pos[0], target[1] - pos[1]);
  int64_t bound = static_cast<int64_t>(std::ceil(dist / v_max)) + 2;
  int64_t steps = 0;
  while (std::hypot(pos[0] - target[0], pos[1] - target[1]) >= 0.25) {
    pos = igen::nav2d_step(pos, {target[0] - pos[0], target[1] - pos[1]}, v_max);
    ++steps;
    REQUIRE(steps <= bound);
  }
  CHECK(steps <= bound);
}
