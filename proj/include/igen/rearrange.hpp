#ifndef IGEN_REARRANGE_HPP_
#define IGEN_REARRANGE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "igen/rng.hpp"
#include "igen/tensor.hpp"

namespace igen {

enum class ShapeKind { Circle = 0, Triangle = 1, Square = 2 };
constexpr int kShapeCount = 3;
const char* shape_name(ShapeKind s);

struct SceneObject {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double angle = 0.0;
};

// One rearrangement state: three objects, one 7-feature block per slot
// (x, y, radius, angle, one-hot shape type), flattened to width 21. In
// generated data slot i always carries shape i; parsed model output may
// put any shape (or duplicates) anywhere.
struct Scene {
  static constexpr int64_t kFlatWidth = 21;

  std::array<SceneObject, 3> objects;
  std::array<int, 3> shape_of_slot = {0, 1, 2};

  std::array<double, kFlatWidth> flatten() const;
  Tensor flat_tensor() const;
  static Scene from_flat(const double* v);

  // Slot index holding the given shape; nullopt when missing or duplicated.
  std::optional<int> slot_of(ShapeKind s) const;
};

enum class Relation { RightOf, Above };

struct RelationSpec {
  Relation rel;
  ShapeKind a;
  ShapeKind b;
  bool operator==(const RelationSpec&) const = default;
};

struct DiagonalSpec {
  ShapeKind a;
  ShapeKind b;
};

// Parsed task label: a conjunction of pairwise training relations,
// diagonal clauses, and/or the three-shapes-on-a-ring clause.
struct LabelSpec {
  std::string name;
  std::vector<RelationSpec> relations;
  std::vector<DiagonalSpec> diagonals;
  bool ring = false;

  bool single_training_relation() const {
    return relations.size() == 1 && diagonals.empty() && !ring;
  }
};

// Generation-time (strict) predicates.
bool strict_relation(const SceneObject& a, const SceneObject& b, Relation rel);
bool strict_scene_relation(const Scene& scene, const RelationSpec& spec);

// Evaluation-time (relaxed) predicates.
bool relaxed_relation(const SceneObject& a, const SceneObject& b, Relation rel);
bool relaxed_diagonal(const SceneObject& a, const SceneObject& b);

// Circumcircle radius of the three slot centers; nullopt when collinear.
std::optional<double> circumradius(const Scene& scene);

constexpr double kRingRadius = 1.67;
constexpr double kRingTolerance = 0.3;

// Relaxed conjunction for the label; false on missing/duplicate shapes.
bool eval_rearrangement(const Scene& scene, const LabelSpec& label);

struct RearrangeGenOpts {
  int64_t budget_per_scene = 100000;
  // New-task demos must not contain strict training relations beyond the
  // label's own required set.
  bool filter_incidental = false;
  double xy_min = 0.0;
  double xy_max = 5.0;
  double r_min = 0.3;
  double r_max = 1.0;
};

struct GenReport {
  int64_t attempts = 0;
  int64_t accepted = 0;
  double acceptance_rate() const {
    return attempts == 0 ? 0.0
                         : static_cast<double>(accepted) /
                               static_cast<double>(attempts);
  }
};

// Rejection sampler; ring and diagonal clauses are placed constructively,
// everything else is uniform subject to the strict predicates and
// non-overlap. Throws BudgetError when the attempt budget is exhausted.
std::vector<Scene> gen_rearrangement(const LabelSpec& label, int64_t count,
                                     Rng& rng, const RearrangeGenOpts& opts,
                                     GenReport* report = nullptr);

// Every strict predicate of the label holds (used by generator soundness
// tests; distinct from the relaxed eval).
bool strict_scene_check(const Scene& scene, const LabelSpec& label);

// Label grammar: "A right of B" | "A above B" | "A diagonal to B" |
// "circle" | "line" | clause " and " clause ...
LabelSpec parse_label(const std::string& name);

struct RearrangeTask {
  enum class Kind { TrainingComposition, NewConcept, NewPlusTraining };
  Kind kind;
  LabelSpec eval_label;       // full predicate scored at evaluation time
  std::string demo_label;     // label whose demos drive inversion
  std::string training_partner;  // NewPlusTraining: concept composed at w=1
  int64_t demo_count = 5;
};

// The 12 single-relation training labels, in canonical order.
std::vector<std::string> rearrange_training_label_names();
// The 5 + 5 + 5 new tasks.
std::vector<RearrangeTask> rearrange_new_tasks();

}  // namespace igen

#endif  // IGEN_REARRANGE_HPP_
