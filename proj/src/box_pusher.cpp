#include "trt/box_pusher.hpp"

#include <cmath>

#include "trt/plans.hpp"

namespace trt {

namespace {

// Clamp a square of side `side` centered at x (1D) so it stays inside
// [0, arena] and outside the obstacle slabs it would newly overlap.
// Returns the clamped center coordinate for motion along axis `ax`.
double clamp_axis_move(double from, double to, double other, double half, int ax,
                       double arena, const std::vector<Rect>& obstacles) {
  double x = std::clamp(to, half, arena - half);
  const double dir = x - from;
  for (const auto& ob : obstacles) {
    // Only obstacles overlapping on the other axis can block this move.
    const double olo = (ax == 0) ? ob.lo.y() : ob.lo.x();
    const double ohi = (ax == 0) ? ob.hi.y() : ob.hi.x();
    if (other + half <= olo || other - half >= ohi) continue;
    const double blo = (ax == 0) ? ob.lo.x() : ob.lo.y();
    const double bhi = (ax == 0) ? ob.hi.x() : ob.hi.y();
    if (x + half > blo && x - half < bhi) {
      if (dir > 0) x = std::min(x, blo - half);
      else if (dir < 0) x = std::max(x, bhi + half);
    }
  }
  return x;
}

}  // namespace

BoxPusherState BoxPusherEnv::reset(Rng& rng) const {
  const double bw = cfg_.box_width;
  const double half = bw / 2.0;
  const double lo = half, hi = cfg_.arena - half;

  BoxPusherState s;
  s.box_width = bw;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 1000)
      throw ConfigError("box pusher reset: no valid layout after 1000 attempts");
    s.agent = Vec2(rng.uniform(lo, hi), rng.uniform(lo, hi));
    s.box = Vec2(rng.uniform(lo, hi), rng.uniform(lo, hi));
    s.goal = Vec2(rng.uniform(lo, hi), rng.uniform(lo, hi));
    if ((s.agent - s.box).norm() < cfg_.min_sep) continue;
    if ((s.agent - s.goal).norm() < cfg_.min_sep) continue;
    if ((s.box - s.goal).norm() < cfg_.min_sep) continue;

    s.obstacles.clear();
    if (cfg_.with_obstacles) {
      const int count = rng.uniform_int(1, cfg_.max_obstacles);
      bool ok = true;
      for (int i = 0; i < count && ok; ++i) {
        bool placed = false;
        for (int t = 0; t < 100 && !placed; ++t) {
          const double w = rng.uniform(1.5 * bw, 4.0 * bw);
          const double h = rng.uniform(1.5 * bw, 4.0 * bw);
          const Vec2 c(rng.uniform(w / 2, cfg_.arena - w / 2),
                       rng.uniform(h / 2, cfg_.arena - h / 2));
          const Rect r = Rect::centered(c, w / 2, h / 2);
          // keep clear of the three footprints so the episode starts legal
          const double m = bw;
          if (r.inflated(m).overlaps(Rect::square(s.agent, bw))) continue;
          if (r.inflated(m).overlaps(Rect::square(s.box, bw))) continue;
          if (r.inflated(m).overlaps(Rect::square(s.goal, bw))) continue;
          bool hits_prev = false;
          for (const auto& prev : s.obstacles)
            if (r.inflated(bw).overlaps(prev)) hits_prev = true;
          if (hits_prev) continue;
          s.obstacles.push_back(r);
          placed = true;
        }
        if (!placed) ok = false;
      }
      if (!ok) continue;
      // the heuristic planner must have at least one clear variant
      HighState high(Vec(4));
      high.v << s.agent.x(), s.agent.y(), s.box.x(), s.box.y();
      Rng probe(0);
      try {
        plan_box_pusher(high, s.goal, s.obstacles, bw, bw, probe);
      } catch (const PlanningError&) {
        continue;
      }
    }
    break;
  }
  return s;
}

BoxPusherState BoxPusherEnv::step(const BoxPusherState& s, const Vec2& action) const {
  const double bw = s.box_width;
  const double half = bw / 2.0;
  BoxPusherState n = s;

  Vec2 delta;
  for (int ax = 0; ax < 2; ++ax)
    delta[ax] = std::clamp(action[ax], -1.0, 1.0) * cfg_.delta_max;

  for (int ax = 0; ax < 2; ++ax) {
    if (delta[ax] == 0.0) continue;
    const double other_a = n.agent[1 - ax];
    double a = clamp_axis_move(n.agent[ax], n.agent[ax] + delta[ax], other_a, half, ax,
                               cfg_.arena, n.obstacles);
    // push resolution against the box
    const bool overlap_other = std::abs(other_a - n.box[1 - ax]) < bw;
    if (overlap_other) {
      const double pen = (delta[ax] > 0) ? (a + half) - (n.box[ax] - half)
                                         : (n.box[ax] + half) - (a - half);
      if (pen > 0 && std::abs(a - n.box[ax]) < bw) {
        const double sign = (delta[ax] > 0) ? 1.0 : -1.0;
        const double b = clamp_axis_move(n.box[ax], n.box[ax] + sign * pen, n.box[1 - ax],
                                         half, ax, cfg_.arena, n.obstacles);
        n.box[ax] = b;
        // box blocked: agent ends flush against it
        a = (delta[ax] > 0) ? std::min(a, b - bw) : std::max(a, b + bw);
      }
    }
    n.agent[ax] = a;
  }
  n.step_count = s.step_count + 1;
  return n;
}

LowState BoxPusherEnv::observe(const BoxPusherState& s) const {
  Vec v(6);
  v << s.agent.x(), s.agent.y(), s.box.x(), s.box.y(), s.goal.x(), s.goal.y();
  return LowState(std::move(v));
}

double BoxPusherEnv::task_reward(const BoxPusherState& s) const {
  return -(0.1 * (s.agent - s.box).norm() + 0.9 * (s.box - s.goal).norm());
}

bool BoxPusherEnv::success(const BoxPusherState& s) const {
  return (s.box - s.goal).norm() < s.box_width;
}

}  // namespace trt
