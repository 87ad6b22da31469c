#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "trt/core.hpp"

namespace trt {

struct RewardParams {
  double beta = 5.0;         // progress weight
  double w = 30.0;           // distance-reward sharpness
  double lambda_task = 0.0;  // task-reward scale (box pusher 0.1, couch 0.5)
};

// r_dist(x) = 1 - tanh(w * x); equals 1 at x = 0, strictly decreasing.
double r_dist(double distance, double w);

// Index (1-based) of the high-level state minimizing d among those within
// epsilon; ties broken toward the smallest index; nullopt when none is
// within epsilon.
std::optional<int> match_index(const LowState& low, const AbstractTrajectory& traj,
                               const Dissimilarity& d, double epsilon);

// Incremental record of the farthest matched high-level index over an
// episode. Holds the full (pre-sub-sampling) trajectory.
class MatchTracker {
 public:
  MatchTracker() = default;
  // Rejects trajectories with non-adjacent near-duplicate states
  // (plain distance < epsilon/2); chunk such plans first.
  MatchTracker(std::shared_ptr<const AbstractTrajectory> traj, Dissimilarity d,
               double epsilon);

  int n() const { return traj_ ? traj_->size() : 0; }
  int j_prev() const { return j_prev_; }
  bool complete() const { return traj_ && j_prev_ == n(); }
  double epsilon() const { return epsilon_; }
  const AbstractTrajectory& trajectory() const { return *traj_; }
  const Dissimilarity& dissimilarity() const { return d_; }

  void reset_progress() { j_prev_ = 0; }

  // Advances j_prev to max(j_prev, j') where j' = match_index(low).
  // Returns the trajectory-following reward of this step.
  double step(const LowState& low, const RewardParams& params);

 private:
  std::shared_ptr<const AbstractTrajectory> traj_;
  Dissimilarity d_;
  double epsilon_ = 0.0;
  int j_prev_ = 0;
};

// Convenience wrapper matching the (tracker, low) -> (reward, tracker') shape.
double step_reward(MatchTracker& tracker, const LowState& low, const RewardParams& params);

double combined_reward(double traj_reward, double task_reward, const RewardParams& params);

struct TraceRow {
  int step = 0;        // 1-based position in the episode
  int j = 0;           // farthest matched index after this step
  double reward = 0.0; // trajectory-following reward of this step
  double running = 0.0;
};

// Folds step rewards over an episode of low states against a fresh tracker.
std::vector<TraceRow> reward_trace(const std::vector<LowState>& episode,
                                   std::shared_ptr<const AbstractTrajectory> traj,
                                   const Dissimilarity& d, double epsilon,
                                   const RewardParams& params);

}  // namespace trt
