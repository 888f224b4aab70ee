#ifndef IGEN_NAV2D_HPP_
#define IGEN_NAV2D_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "igen/diffusion.hpp"
#include "igen/rearrange.hpp"  // GenReport
#include "igen/rng.hpp"
#include "igen/tensor.hpp"

namespace igen {

// Colors: red, yellow, purple, green. Shapes: cone, sphere, bowl, cube.
constexpr int kNavColorCount = 4;
constexpr int kNavShapeCount = 4;
const char* nav_color_name(int c);
const char* nav_shape_name(int s);

struct Nav2dObject {
  double x = 0.0;
  double y = 0.0;
  int color = 0;
  int shape = 0;
};

// A goal-reaching episode on the [0,5]^2 plane: two attribute-typed objects
// (slot order: ascending x), the agent start, and the H=32 demonstrated
// agent path. Conditioning state s0 is 22 wide: agent xy, then per object
// xy + color one-hot(4) + shape one-hot(4).
struct Nav2dEpisode {
  static constexpr int64_t kHorizon = 32;
  static constexpr int64_t kStateWidth = 22;
  static constexpr int64_t kTrajWidth = 2 * kHorizon;

  double agent_x = 0.0;
  double agent_y = 0.0;
  std::array<Nav2dObject, 2> objects;
  std::vector<std::array<double, 2>> traj;
  int target_slot = 0;

  const Nav2dObject& target() const {
    return objects[static_cast<size_t>(target_slot)];
  }
  const Nav2dObject& distractor() const {
    return objects[static_cast<size_t>(1 - target_slot)];
  }

  Tensor s0_tensor() const;    // raw (unnormalized) 22-vector
  Tensor traj_tensor() const;  // raw flattened {x0,y0,x1,y1,...}, width 64

  static Tensor s0_from_parts(double ax, double ay,
                              const std::array<Nav2dObject, 2>& objects);
};

// Target attribute requirements; -1 means unconstrained.
struct Nav2dLabel {
  std::string name;
  int want_color = -1;
  int want_shape = -1;
};

// "go to red object" | "go to bowl" | "go to red bowl" ...
Nav2dLabel parse_nav_label(const std::string& name);
std::vector<std::string> nav2d_training_label_names();  // 4 single-attribute
std::vector<std::string> nav2d_new_task_names();        // 5 compositions

// True when the object satisfies every constrained attribute.
bool nav_label_matches(const Nav2dLabel& label, const Nav2dObject& obj);

struct Nav2dGenOpts {
  int64_t budget_per_episode = 100000;
  double v_max = 0.25;
  double jitter_sigma = 0.02;
  double arrival_radius = 0.25;
  double xy_min = 0.0;
  double xy_max = 5.0;
  double min_separation = 1.2;   // object-object and object-agent spacing
  double corridor_clearance = 0.6;  // distractor distance from the demo path
  double max_start_distance = 6.0;
};

// Episodes whose target matches the label and whose distractor shares
// exactly one attribute with it while staying inside the training
// attribute tables. The demo walks straight at v_max with Gaussian jitter
// and parks inside the arrival radius.
std::vector<Nav2dEpisode> gen_nav2d(const Nav2dLabel& label, int64_t count,
                                    Rng& rng, const Nav2dGenOpts& opts,
                                    GenReport* report = nullptr);

// Progress metric: strictly closer to the target at the end than at the
// start.
bool eval_nav2d_progress(const std::array<double, 2>& start,
                         const std::array<double, 2>& finish,
                         const std::array<double, 2>& target);

// Success metric on a state path: enters the target radius at some step
// without ever entering the distractor radius first (or at all).
bool nav2d_path_success(const std::vector<std::array<double, 2>>& path,
                        const std::array<double, 2>& target,
                        const std::array<double, 2>& distractor,
                        double arrival_radius);

// Kinematics: apply an action clipped to v_max.
std::array<double, 2> nav2d_step(const std::array<double, 2>& pos,
                                 const std::array<double, 2>& action,
                                 double v_max);

enum class RolloutOutcome { ReachedTarget, ReachedDistractor, Timeout };

struct RolloutResult {
  RolloutOutcome outcome = RolloutOutcome::Timeout;
  bool success = false;
  std::vector<std::array<double, 2>> trace;
  int64_t replans = 0;
};

struct RolloutOpts {
  int64_t replan_every = 5;
  int64_t max_steps = 96;
  int64_t plan_offset = 5;  // execute toward plan state t+offset
  double v_max = 0.25;
  double arrival_radius = 0.25;
};

// Closed loop: plan from the current observation with the diffusion model,
// act toward the plan's t+offset state, replan every replan_every steps.
RolloutResult closed_loop_rollout(const MlpDenoiser& model,
                                  const DiffusionSchedule& sched,
                                  const CompositionSpec& spec,
                                  const Nav2dEpisode& episode,
                                  const RolloutOpts& opts, Rng& rng);

// Decodes a normalized model sample back into a state path.
std::vector<std::array<double, 2>> nav2d_decode_traj(const Tensor& flat_norm);

}  // namespace igen

#endif  // IGEN_NAV2D_HPP_
