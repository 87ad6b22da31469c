#include "trt/plans.hpp"

#include <cmath>

#include "trt/couch_moving.hpp"

namespace trt {

AbstractTrajectory preprocess(const AbstractTrajectory& traj, double epsilon_spacing) {
  check(traj.size() >= 1, "preprocess: empty trajectory");
  check(epsilon_spacing > 0.0, "preprocess: epsilon_spacing must be positive");

  // Drop originals closer than epsilon to the last kept state, then make
  // sure the original last state survives (the final segment may be short).
  std::vector<HighState> kept;
  kept.push_back(traj.states.front());
  for (int i = 1; i < traj.size(); ++i) {
    if ((traj[i].v - kept.back().v).norm() >= epsilon_spacing) kept.push_back(traj[i]);
  }
  const HighState& last = traj.states.back();
  if ((last.v - kept.back().v).norm() > 0.0) kept.push_back(last);

  // Subdivide each segment into ceil(len/epsilon) equal pieces.
  AbstractTrajectory out;
  out.states.push_back(kept.front());
  for (size_t i = 1; i < kept.size(); ++i) {
    const Vec& a = kept[i - 1].v;
    const Vec& b = kept[i].v;
    const double len = (b - a).norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / epsilon_spacing)));
    for (int j = 1; j < pieces; ++j) {
      const double t = static_cast<double>(j) / pieces;
      out.states.emplace_back(Vec(a + t * (b - a)));
    }
    out.states.push_back(kept[i]);  // segment endpoints exactly
  }
  return out;
}

SubsampledPrompt subsample(const AbstractTrajectory& traj, int p, int L_max) {
  check(traj.size() >= 1, "subsample: empty trajectory");
  check(L_max >= 2, "subsample: L_max must be >= 2");
  const int n = traj.size();
  const int step = std::max(1, p);
  SubsampledPrompt out;
  for (int i = 0; i < n - 1; i += step) {
    out.orig_indices.push_back(i);
    out.traj.states.push_back(traj[i]);
  }
  out.orig_indices.push_back(n - 1);
  out.traj.states.push_back(traj[n - 1]);
  if (out.size() > L_max) {
    throw ConfigError("subsample: prompt of length " + std::to_string(out.size()) +
                      " exceeds L_max=" + std::to_string(L_max) + " (n=" + std::to_string(n) +
                      ", p=" + std::to_string(p) + ")");
  }
  return out;
}

std::vector<AbstractTrajectory> chunk_periodic(const AbstractTrajectory& traj, double epsilon) {
  std::vector<AbstractTrajectory> chunks;
  if (traj.empty()) return chunks;
  AbstractTrajectory cur;
  for (const auto& s : traj.states) {
    bool revisit = false;
    for (const auto& prev : cur.states) {
      if ((s.v - prev.v).norm() < epsilon / 2.0) {
        revisit = true;
        break;
      }
    }
    if (revisit) {
      chunks.push_back(std::move(cur));
      cur = AbstractTrajectory{};
    }
    cur.states.push_back(s);
  }
  if (!cur.empty()) chunks.push_back(std::move(cur));
  return chunks;
}

bool should_replan(const MatchTracker& tracker, int step, const ReplanTrigger& trigger) {
  switch (trigger.kind) {
    case ReplanTrigger::Kind::final_state_matched:
      return tracker.j_prev() == tracker.n();
    case ReplanTrigger::Kind::timeout:
      return step >= trigger.max_steps && tracker.j_prev() < tracker.n();
  }
  return false;
}

namespace {

HighState bp_state(const Vec2& agent, const Vec2& box) {
  Vec v(4);
  v << agent.x(), agent.y(), box.x(), box.y();
  return HighState(std::move(v));
}

void append_if_moved(std::vector<HighState>& states, const HighState& s) {
  if (states.empty() || (states.back().v - s.v).norm() > 0.0) states.push_back(s);
}

// One box-width clearance between a swept square (agent or carried box) and
// every obstacle: test the center segment against obstacles inflated by
// half the square plus the clearance.
bool sweep_clear(const Vec2& a, const Vec2& b, const std::vector<Rect>& obstacles,
                 double box_width) {
  const double r = 1.5 * box_width;
  for (const auto& ob : obstacles) {
    if (segment_hits_rect(a, b, ob.inflated(r))) return false;
  }
  return true;
}

}  // namespace

AbstractTrajectory plan_box_pusher(const HighState& high, const Vec2& goal,
                                   const std::vector<Rect>& obstacles, double box_width,
                                   double epsilon_spacing, Rng& rng) {
  check(high.dim() == 4, "plan_box_pusher: high state must be 4-dimensional");
  const Vec2 agent(high.v[0], high.v[1]);
  const Vec2 box(high.v[2], high.v[3]);

  // 2 approach orders x 2 carry orders
  std::vector<std::vector<HighState>> feasible;
  for (int approach_x_first = 0; approach_x_first < 2; ++approach_x_first) {
    for (int carry_x_first = 0; carry_x_first < 2; ++carry_x_first) {
      const Vec2 wp_a = approach_x_first ? Vec2(box.x(), agent.y()) : Vec2(agent.x(), box.y());
      const Vec2 wp_c = carry_x_first ? Vec2(goal.x(), box.y()) : Vec2(box.x(), goal.y());
      if (!sweep_clear(agent, wp_a, obstacles, box_width)) continue;
      if (!sweep_clear(wp_a, box, obstacles, box_width)) continue;
      if (!sweep_clear(box, wp_c, obstacles, box_width)) continue;
      if (!sweep_clear(wp_c, goal, obstacles, box_width)) continue;

      std::vector<HighState> states;
      append_if_moved(states, bp_state(agent, box));
      append_if_moved(states, bp_state(wp_a, box));
      append_if_moved(states, bp_state(box, box));  // grasp: agent on the box
      append_if_moved(states, bp_state(wp_c, wp_c));
      append_if_moved(states, bp_state(goal, goal));
      feasible.push_back(std::move(states));
    }
  }
  if (feasible.empty())
    throw PlanningError("plan_box_pusher: no obstacle-free variant");

  const auto& pick = feasible[static_cast<size_t>(rng.uniform_int(
      0, static_cast<int>(feasible.size()) - 1))];
  AbstractTrajectory raw;
  raw.states = pick;
  if (raw.states.empty()) raw.states.push_back(bp_state(agent, box));
  return preprocess(raw, epsilon_spacing);
}

AbstractTrajectory plan_couch(const Maze& maze, double epsilon_spacing) {
  AbstractTrajectory raw;
  for (const auto& cell : maze.path) {
    const Vec2 p = maze.cell_center(cell);
    Vec v(2);
    v << p.x(), p.y();
    raw.states.emplace_back(std::move(v));
  }
  return preprocess(raw, epsilon_spacing);
}

AbstractTrajectory plan_couch_from(const Maze& maze, const Vec2& position,
                                   double epsilon_spacing) {
  const int start = maze.nearest_path_idx(position);
  AbstractTrajectory raw;
  Vec cur(2);
  cur << position.x(), position.y();
  raw.states.emplace_back(std::move(cur));
  for (size_t i = start; i < maze.path.size(); ++i) {
    const Vec2 p = maze.cell_center(maze.path[i]);
    Vec v(2);
    v << p.x(), p.y();
    raw.states.emplace_back(std::move(v));
  }
  return preprocess(raw, epsilon_spacing);
}

}  // namespace trt
