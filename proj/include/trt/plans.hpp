#pragma once

#include <vector>

#include "trt/core.hpp"
#include "trt/geometry.hpp"
#include "trt/reward.hpp"
#include "trt/rng.hpp"

namespace trt {

struct Maze;  // couch_moving.hpp

struct PlanConfig {
  double epsilon_spacing = 0.1;  // target inter-state distance, world units
  int p = 2;                     // sub-sample skip steps
  int L_max = 32;                // maximum prompt length
  uint64_t seed = 0;             // heuristic variant randomness
};

struct ReplanTrigger {
  enum class Kind { final_state_matched, timeout };
  Kind kind = Kind::timeout;
  int max_steps = 200;  // horizon for the timeout trigger
};

// Interpolate/deduplicate so consecutive spacing lies in
// (epsilon_spacing/2, epsilon_spacing], keeping the original first and last
// states verbatim. The final segment may be shorter.
AbstractTrajectory preprocess(const AbstractTrajectory& traj, double epsilon_spacing);

// Sub-sampled prompt: every p-th state of s_1..s_{n-1} plus s_n, with the
// original (0-based) indices retained for timestep embeddings. Rewards are
// always computed against the full trajectory, never this.
struct SubsampledPrompt {
  AbstractTrajectory traj;
  std::vector<int> orig_indices;
  int size() const { return traj.size(); }
};

SubsampledPrompt subsample(const AbstractTrajectory& traj, int p, int L_max);

// Greedy split so no chunk revisits a state (pairwise distance < epsilon/2).
// Concatenation of the chunks equals the input.
std::vector<AbstractTrajectory> chunk_periodic(const AbstractTrajectory& traj, double epsilon);

bool should_replan(const MatchTracker& tracker, int step, const ReplanTrigger& trigger);

// Box pusher heuristic: approach the box axis-by-axis, grasp, carry to the
// goal axis-by-axis. Four axis-order variants; one is chosen uniformly among
// the variants whose agent path and carried-box sweep clear every obstacle
// by at least one box width. Output is preprocess()-ed.
AbstractTrajectory plan_box_pusher(const HighState& high, const Vec2& goal,
                                   const std::vector<Rect>& obstacles, double box_width,
                                   double epsilon_spacing, Rng& rng);

// Couch heuristic: the maze path itself as 2D positions, preprocess()-ed.
AbstractTrajectory plan_couch(const Maze& maze, double epsilon_spacing);

// Same, but starting from the path cell nearest to `position` (re-planning).
AbstractTrajectory plan_couch_from(const Maze& maze, const Vec2& position,
                                   double epsilon_spacing);

}  // namespace trt
