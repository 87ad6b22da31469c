#include "trt/oracles.hpp"

#include <cmath>

namespace trt {

namespace {

inline double wrap_mod_pi(double x) {
  // reduce an orientation error to (-pi/2, pi/2]; the couch is symmetric
  x = std::fmod(x, M_PI);
  if (x > M_PI / 2.0) x -= M_PI;
  if (x <= -M_PI / 2.0) x += M_PI;
  return x;
}

}  // namespace

Vec oracle_box_pusher(const BoxPusherState& s, const AbstractTrajectory& traj,
                      const MatchTracker& tracker, double delta_max) {
  const double bw = s.box_width;
  const int n = traj.size();
  const int j = std::max(1, tracker.j_prev());
  auto plan_box = [&](int i) { return Vec2(traj[i - 1].v[2], traj[i - 1].v[3]); };

  Vec a = Vec::Zero(2);
  const Vec2 expected = plan_box(j);  // where the plan thinks the box is

  // next index at which the plan's box moves
  int i2 = -1;
  for (int i = j + 1; i <= n; ++i) {
    if ((plan_box(i) - expected).norm() > 1e-9) {
      i2 = i;
      break;
    }
  }
  if (i2 < 0) return a;  // no box motion left: hold, keep matching s_n

  // extend through the current axis-aligned run of box motion
  const Vec2 first = plan_box(i2) - expected;
  const int axis = std::abs(first.x()) >= std::abs(first.y()) ? 0 : 1;
  const double sgn = first[axis] >= 0 ? 1.0 : -1.0;
  int i3 = i2;
  while (i3 + 1 <= n) {
    const Vec2 d = plan_box(i3 + 1) - plan_box(i3);
    if (d.norm() < 1e-12) break;
    const int ax = std::abs(d.x()) >= std::abs(d.y()) ? 0 : 1;
    if (ax != axis || (d[ax] >= 0 ? 1.0 : -1.0) != sgn) break;
    ++i3;
  }
  const Vec2 target = plan_box(i3);

  Vec2 u(0, 0);
  u[axis] = sgn;
  const Vec2 v(-u.y(), u.x());
  // stage against the actual box only while it is where the plan expects it;
  // otherwise keep following the plan (interventions are not recovered
  // without a re-plan)
  const Vec2 actual = s.box;
  const Vec2 ref = (actual - expected).norm() <= 2.5 * bw ? actual : expected;
  const double along = (s.agent - ref).dot(u);
  const double perp = (s.agent - ref).dot(v);
  const double tol = 0.05 * bw;

  auto move_toward = [&](const Vec2& dir, double dist) {
    a[0] = std::clamp(dir.x() * dist / delta_max, -1.0, 1.0);
    a[1] = std::clamp(dir.y() * dist / delta_max, -1.0, 1.0);
  };

  if (along > -bw + 1e-12 || std::abs(perp) > tol) {
    if (along > -1.2 * bw && std::abs(perp) < 1.2 * bw) {
      // beside or ahead of the box: clear out sideways first
      const double dir = perp >= 0 ? 1.0 : -1.0;
      move_toward(v * dir, 1.3 * bw - std::abs(perp));
    } else if (along > -1.7 * bw) {
      move_toward(-u, along + 1.7 * bw);
    } else {
      move_toward(v * (perp >= 0 ? -1.0 : 1.0), std::abs(perp));
    }
  } else {
    const double remaining = (target - actual).dot(u);
    if (remaining > 0.25 * delta_max) {
      const double gap = -along - bw;  // free travel before contact
      move_toward(u, gap + remaining);
    }
  }
  return a;
}

Vec oracle_couch(const CouchState& s, const Maze& maze, const AbstractTrajectory& traj,
                 const MatchTracker& tracker, const CouchParams& params) {
  const int n = traj.size();
  const int i_next = std::min(tracker.j_prev() + 1, n);
  const Vec2 target(traj[i_next - 1].v[0], traj[i_next - 1].v[1]);

  // rotate inside the chamber of the upcoming corner when the exit
  // orientation differs from the current one
  const int near = maze.nearest_path_idx(s.pos);
  int corner = -1;
  for (const int ci : maze.corner_path_idx) {
    if (ci >= near) {
      corner = ci;
      break;
    }
  }
  bool rotating = false;
  Vec2 hold(0, 0);
  double theta_target = 0.0;
  if (corner >= 0) {
    const Vec2 cc = maze.cell_center(maze.path[corner]);
    const Vec2 exit_dir = maze.forward_dir(corner);
    const bool need_x = std::abs(exit_dir.x()) >= std::abs(exit_dir.y());
    const bool have_x = std::abs(std::cos(s.theta)) >= std::abs(std::sin(s.theta));
    if (need_x != have_x && (s.pos - cc).norm() < 0.45) {
      rotating = true;
      hold = cc;
      theta_target = need_x ? 0.0 : M_PI / 2.0;
    }
  }

  Vec a = Vec::Zero(3);
  if (rotating) {
    const Vec2 f = 12.0 * (hold - s.pos) - 5.0 * s.vel;
    a[0] = std::clamp(f.x(), -1.0, 1.0);
    a[1] = std::clamp(f.y(), -1.0, 1.0);
    const double err = wrap_mod_pi(theta_target - s.theta);
    a[2] = std::clamp(4.0 * err - 1.5 * s.omega, -1.0, 1.0);
    return a;
  }

  const Vec2 delta = target - s.pos;
  const double dist = delta.norm();
  const double v_max = 0.85 * params.lin_damping * params.f_max * params.dt /
                       (1.0 - params.lin_damping);  // just under terminal speed
  Vec2 v_des(0, 0);
  if (dist > 1e-9) v_des = delta / dist * std::min(v_max, 6.0 * dist);
  const Vec2 f = 2.5 * (v_des - s.vel);
  a[0] = std::clamp(f.x(), -1.0, 1.0);
  a[1] = std::clamp(f.y(), -1.0, 1.0);
  // keep the current snapped orientation while translating
  const double snapped = std::round(s.theta / (M_PI / 2.0)) * (M_PI / 2.0);
  const double err = wrap_mod_pi(snapped - s.theta);
  a[2] = std::clamp(4.0 * err - 1.5 * s.omega, -1.0, 1.0);
  return a;
}

Vec OracleController::act(Session& s) {
  if (s.config().tag == EnvTag::box_pusher) {
    return oracle_box_pusher(s.box_state(), s.full_plan(), s.tracker(),
                             s.config().box.delta_max);
  }
  return oracle_couch(s.couch_state(), s.maze(), s.full_plan(), s.tracker(),
                      s.config().couch);
}

}  // namespace trt
