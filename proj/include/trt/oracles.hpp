#pragma once

#include "trt/box_pusher.hpp"
#include "trt/couch_moving.hpp"
#include "trt/eval.hpp"
#include "trt/reward.hpp"

namespace trt {

// Scripted expert: stages itself on the side of the box opposite the next
// push direction, then pushes along the plan. Deliberately plan-grounded:
// when the actual box strays far from where the plan expects it (an
// intervention), staging keeps following the plan and the episode fails
// unless a re-plan happens.
Vec oracle_box_pusher(const BoxPusherState& s, const AbstractTrajectory& traj,
                      const MatchTracker& tracker, double delta_max);

// Proportional controller toward the next unmatched plan state; rotates
// inside the chamber of the upcoming corner when the exit orientation
// differs. Uses full maze knowledge, unlike the learned policy.
Vec oracle_couch(const CouchState& s, const Maze& maze, const AbstractTrajectory& traj,
                 const MatchTracker& tracker, const CouchParams& params);

// Controller adapter dispatching on the session's environment.
class OracleController : public Controller {
 public:
  void on_plan(Session&) override {}
  void on_obs(Session&, const LowState&) override {}
  Vec act(Session& s) override;
};

}  // namespace trt
