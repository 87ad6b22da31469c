#pragma once

#include <vector>

#include "trt/core.hpp"
#include "trt/geometry.hpp"
#include "trt/rng.hpp"

namespace trt {

// World constants. Agent and box are axis-aligned squares of side box_width
// in a square arena; actions are normalized xy deltas scaled by delta_max
// (half a box width per step, so plan states cannot be skipped outright).
struct BoxPusherConfig {
  double box_width = 0.1;
  double arena = 1.4;       // arena side length, world units
  double delta_max = 0.05;  // max per-axis agent displacement per step
  double min_sep = 0.2;     // min pairwise separation when sampling
  bool with_obstacles = false;
  int max_obstacles = 3;
};

struct BoxPusherState {
  Vec2 agent{0, 0};
  Vec2 box{0, 0};
  Vec2 goal{0, 0};
  std::vector<Rect> obstacles;  // empty at train time
  double box_width = 0.1;
  int step_count = 0;
};

class BoxPusherEnv {
 public:
  explicit BoxPusherEnv(BoxPusherConfig cfg = {}) : cfg_(cfg) {}

  const BoxPusherConfig& config() const { return cfg_; }

  BoxPusherState reset(Rng& rng) const;

  // Kinematic, axis-separated push resolution. The agent stops at obstacle
  // and arena boundaries; penetration into the box displaces the box along
  // the agent's motion (push-only), and the box stops at obstacles too, in
  // which case the agent is pushed back flush.
  BoxPusherState step(const BoxPusherState& s, const Vec2& action) const;

  // (agent, box, goal); obstacles are never observable.
  LowState observe(const BoxPusherState& s) const;

  // -(0.1*||agent-box|| + 0.9*||box-goal||)
  double task_reward(const BoxPusherState& s) const;

  // ||box-goal|| < box_width, strict.
  bool success(const BoxPusherState& s) const;

 private:
  BoxPusherConfig cfg_;
};

}  // namespace trt
