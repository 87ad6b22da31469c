#include "trt/couch_moving.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace trt {

namespace {

const std::array<Cell, 4> kDirs = {Cell(0, 1), Cell(1, 0), Cell(0, -1), Cell(-1, 0)};

double normalize_angle(double t) {
  double x = std::fmod(t + M_PI, 2.0 * M_PI);
  if (x <= 0.0) x += 2.0 * M_PI;
  return x - M_PI;
}

}  // namespace

const char* variant_name(Maze::Variant v) {
  return v == Maze::Variant::short_range ? "short" : "long";
}

Maze::Variant variant_from_name(const std::string& name) {
  if (name == "short") return Maze::Variant::short_range;
  if (name == "long") return Maze::Variant::long_range;
  throw ConfigError("unknown maze variant: " + name);
}

bool Maze::wall_at(const Vec2& p) const {
  const Cell c = cell_of(p);
  return wall(c.x(), c.y());
}

int Maze::nearest_path_idx(const Vec2& p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (size_t i = 0; i < path.size(); ++i) {
    const double d = (cell_center(path[i]) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Vec2 Maze::forward_dir(int path_idx) const {
  const int n = static_cast<int>(path.size());
  int a = path_idx, b = path_idx + 1;
  if (b >= n) {
    a = n - 2;
    b = n - 1;
  }
  if (a < 0) return Vec2(1, 0);
  const Cell d = path[b] - path[a];
  return Vec2(static_cast<double>(d.y()), static_cast<double>(d.x()));
}

void Maze::rebuild_path(const Cell& start_cell, const Cell& goal_cell) {
  // distance-from-goal BFS, then a greedy walk with a fixed neighbor order;
  // deterministic, so generation and file loading agree on the same path.
  const int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<size_t>(rows) * cols, inf);
  auto idx = [&](const Cell& c) { return c.x() * cols + c.y(); };
  std::deque<Cell> queue;
  dist[idx(goal_cell)] = 0;
  queue.push_back(goal_cell);
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (const auto& d : kDirs) {
      const Cell n = c + d;
      if (wall(n.x(), n.y())) continue;
      if (dist[idx(n)] != inf) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  check(dist[idx(start_cell)] != inf, "maze: start and goal are not connected");

  path.clear();
  Cell cur = start_cell;
  Cell last_dir(0, 0);
  path.push_back(cur);
  while (cur != goal_cell) {
    int best = dist[idx(cur)];
    for (const auto& d : kDirs) {
      const Cell n = cur + d;
      if (!wall(n.x(), n.y())) best = std::min(best, dist[idx(n)]);
    }
    check(best < dist[idx(cur)], "maze: greedy walk stalled");
    // ties go straight ahead, so turns happen at chamber centers
    Cell next = cur;
    if (last_dir != Cell(0, 0)) {
      const Cell n = cur + last_dir;
      if (!wall(n.x(), n.y()) && dist[idx(n)] == best) next = n;
    }
    if (next == cur) {
      for (const auto& d : kDirs) {
        const Cell n = cur + d;
        if (!wall(n.x(), n.y()) && dist[idx(n)] == best) {
          next = n;
          break;
        }
      }
    }
    last_dir = next - cur;
    path.push_back(next);
    cur = next;
  }

  corner_path_idx.clear();
  for (size_t i = 1; i + 1 < path.size(); ++i) {
    const Cell din = path[i] - path[i - 1];
    const Cell dout = path[i + 1] - path[i];
    if (din != dout) corner_path_idx.push_back(static_cast<int>(i));
  }
}

Maze generate_maze(Maze::Variant variant, int n_corners, Rng& rng) {
  check(n_corners >= 1, "generate_maze: n_corners must be >= 1");
  const int lo = variant == Maze::Variant::short_range ? 3 : 5;
  const int hi = variant == Maze::Variant::short_range ? 5 : 7;

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::set<std::pair<int, int>> carved;
    auto carve_chamber = [&](const Cell& c) {
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) carved.insert({c.x() + dr, c.y() + dc});
    };
    auto blocked = [&](const std::vector<Cell>& cand, const Cell& prev_node) {
      std::set<std::pair<int, int>> cand_set;
      for (const auto& c : cand) cand_set.insert({c.x(), c.y()});
      for (const auto& c : cand) {
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const std::pair<int, int> q{c.x() + dr, c.y() + dc};
            if (!carved.count(q) || cand_set.count(q)) continue;
            // contact with the chamber we are leaving is expected
            if (std::abs(q.first - prev_node.x()) <= 1 && std::abs(q.second - prev_node.y()) <= 1)
              continue;
            return true;
          }
        }
      }
      return false;
    };

    std::vector<Cell> nodes{Cell(0, 0)};
    std::vector<int> lengths;
    carve_chamber(nodes[0]);
    int dir_i = rng.uniform_int(0, 3);
    Cell goal_cell;
    bool ok = true;

    for (int i = 0; i < n_corners + 1 && ok; ++i) {
      const bool tail = (i == n_corners);
      const Cell d = kDirs[dir_i];
      const int len = rng.uniform_int(lo, hi);
      const Cell prev = nodes.back();
      std::vector<Cell> cand;
      for (int k = 2; k <= len + 1; ++k) cand.push_back(prev + d * k);
      if (!tail) {
        const Cell node = prev + d * (len + 3);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) cand.push_back(node + Cell(dr, dc));
        if (blocked(cand, prev)) {
          ok = false;
          break;
        }
        for (const auto& c : cand) carved.insert({c.x(), c.y()});
        nodes.push_back(node);
        lengths.push_back(len);
        // perpendicular turn, random side
        const int sign = rng.bernoulli(0.5) ? 1 : -1;
        dir_i = (dir_i % 2 == 0) ? (sign > 0 ? 1 : 3) : (sign > 0 ? 0 : 2);
      } else {
        if (blocked(cand, prev)) {
          ok = false;
          break;
        }
        for (const auto& c : cand) carved.insert({c.x(), c.y()});
        goal_cell = prev + d * (len + 1);
        lengths.push_back(len);
      }
    }
    if (!ok) continue;

    int rmin = 1 << 30, rmax = -(1 << 30), cmin = 1 << 30, cmax = -(1 << 30);
    for (const auto& [r, c] : carved) {
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
    Maze m;
    m.variant = variant;
    m.n_corners = n_corners;
    m.rows = rmax - rmin + 3;
    m.cols = cmax - cmin + 3;
    m.occ.assign(static_cast<size_t>(m.rows) * m.cols, 1);
    const Cell off(1 - rmin, 1 - cmin);
    for (const auto& [r, c] : carved) m.occ[(r + off.x()) * m.cols + (c + off.y())] = 0;
    for (const auto& n : nodes) m.chamber_centers.push_back(n + off);
    m.corridor_lengths = lengths;
    m.rebuild_path(nodes.front() + off, goal_cell + off);
    check(static_cast<int>(m.corner_path_idx.size()) == n_corners,
          "generate_maze: derived corner count mismatch");
    return m;
  }
  throw ConfigError("generate_maze: no valid layout after 100 attempts");
}

CouchState CouchMovingEnv::reset(const Maze& maze) const {
  CouchState s;
  s.pos = maze.start();
  const Vec2 d = maze.forward_dir(0);
  s.theta = std::atan2(d.y(), d.x());
  if (s.theta <= -M_PI) s.theta = M_PI;
  return s;
}

std::array<Vec2, 4> CouchMovingEnv::corners(const CouchState& s) const {
  const Vec2 u(std::cos(s.theta), std::sin(s.theta));
  const Vec2 v(-u.y(), u.x());
  const Vec2 a = u * (p_.length / 2.0);
  const Vec2 b = v * (p_.width / 2.0);
  return {s.pos + a + b, s.pos + a - b, s.pos - a - b, s.pos - a + b};
}

namespace {

struct Mtv {
  bool hit = false;
  Vec2 axis{0, 0};
  double depth = 0.0;
};

Mtv obb_cell_mtv(const Vec2& center, double hl, double hw, const Vec2& u, const Vec2& v,
                 const Rect& cell) {
  const Vec2 cc = cell.center();
  const double hx = cell.width() / 2.0, hy = cell.height() / 2.0;
  const std::array<Vec2, 4> axes = {Vec2(1, 0), Vec2(0, 1), u, v};
  Mtv out;
  out.depth = std::numeric_limits<double>::max();
  for (const auto& n : axes) {
    const double r_obb = hl * std::abs(n.dot(u)) + hw * std::abs(n.dot(v));
    const double r_cell = hx * std::abs(n.x()) + hy * std::abs(n.y());
    const double sep = std::abs(n.dot(center - cc));
    const double overlap = r_obb + r_cell - sep;
    if (overlap <= 0.0) return Mtv{};  // separating axis
    if (overlap < out.depth) {
      out.depth = overlap;
      out.axis = n.dot(center - cc) >= 0 ? n : Vec2(-n);
    }
  }
  out.hit = true;
  return out;
}

}  // namespace

bool CouchMovingEnv::collides(const CouchState& s, const Maze& maze) const {
  const Vec2 u(std::cos(s.theta), std::sin(s.theta));
  const Vec2 v(-u.y(), u.x());
  const double hl = p_.length / 2.0, hw = p_.width / 2.0;
  const double reach = hl + hw;
  const Cell c0 = maze.cell_of(s.pos - Vec2(reach, reach));
  const Cell c1 = maze.cell_of(s.pos + Vec2(reach, reach));
  for (int r = c0.x(); r <= c1.x(); ++r) {
    for (int c = c0.y(); c <= c1.y(); ++c) {
      if (!maze.wall(r, c)) continue;
      const Vec2 lo(c * Maze::kCellSize, r * Maze::kCellSize);
      const Rect cell{lo, lo + Vec2(Maze::kCellSize, Maze::kCellSize)};
      if (obb_cell_mtv(s.pos, hl, hw, u, v, cell).hit) return true;
    }
  }
  return false;
}

CouchState CouchMovingEnv::step(const CouchState& s, const Maze& maze, const Vec& action) const {
  check(action.size() == 3, "couch step: action must be 3-dimensional");
  CouchState n = s;
  const double ax = std::clamp(action[0], -1.0, 1.0) * p_.f_max;
  const double ay = std::clamp(action[1], -1.0, 1.0) * p_.f_max;
  const double tau = std::clamp(action[2], -1.0, 1.0) * p_.tau_max;

  n.vel = (n.vel + Vec2(ax, ay) * (p_.dt / p_.mass)) * p_.lin_damping;
  n.omega = (n.omega + tau * (p_.dt / p_.inertia())) * p_.ang_damping;
  n.pos += n.vel * p_.dt;
  n.theta = normalize_angle(n.theta + n.omega * p_.dt);

  const double hl = p_.length / 2.0, hw = p_.width / 2.0;
  bool resolved = false;
  for (int iter = 0; iter < 8; ++iter) {
    const Vec2 u(std::cos(n.theta), std::sin(n.theta));
    const Vec2 v(-u.y(), u.x());
    const double reach = hl + hw;
    const Cell c0 = maze.cell_of(n.pos - Vec2(reach, reach));
    const Cell c1 = maze.cell_of(n.pos + Vec2(reach, reach));
    Mtv deepest;
    for (int r = c0.x(); r <= c1.x(); ++r) {
      for (int c = c0.y(); c <= c1.y(); ++c) {
        if (!maze.wall(r, c)) continue;
        const Vec2 lo(c * Maze::kCellSize, r * Maze::kCellSize);
        const Rect cell{lo, lo + Vec2(Maze::kCellSize, Maze::kCellSize)};
        const Mtv m = obb_cell_mtv(n.pos, hl, hw, u, v, cell);
        if (m.hit && (!deepest.hit || m.depth > deepest.depth)) deepest = m;
      }
    }
    if (!deepest.hit) {
      resolved = true;
      break;
    }
    n.pos += deepest.axis * (deepest.depth + 1e-9);
    const double vn = n.vel.dot(deepest.axis);
    if (vn < 0.0) n.vel -= deepest.axis * vn;
  }
  if (!resolved && collides(n, maze)) {
    n.pos = s.pos;
    n.theta = s.theta;
    n.vel.setZero();
    n.omega = 0.0;
  }
  n.step_count = s.step_count + 1;
  return n;
}

LowState CouchMovingEnv::observe(const CouchState& s, const Maze& maze) const {
  Vec v(13);
  const Vec2 u(std::cos(s.theta), std::sin(s.theta));
  const Vec2 w(-u.y(), u.x());
  int k = 0;
  for (int i = -1; i <= 1; ++i) {     // across the couch
    for (int j = -1; j <= 1; ++j) {   // along the couch
      const Vec2 p = s.pos + (u * j + w * i) * Maze::kCellSize;
      v[k++] = maze.wall_at(p) ? 1.0 : 0.0;
    }
  }
  const Vec2 fwd = maze.forward_dir(maze.nearest_path_idx(s.pos));
  v[9] = fwd.x();
  v[10] = fwd.y();
  v[11] = s.pos.x();
  v[12] = s.pos.y();
  return LowState(std::move(v));
}

namespace {

// Snap an angle to the nearest axis: true when the long side runs along x.
bool long_axis_is_x(double theta) {
  return std::abs(std::cos(theta)) >= std::abs(std::sin(theta));
}

}  // namespace

double CouchMovingEnv::task_reward(const CouchState& s, const Maze& maze) const {
  for (const auto& ch : maze.chamber_centers) {
    if ((maze.cell_center(ch) - s.pos).norm() < kChamberRadius) return 0.0;
  }
  const int near = maze.nearest_path_idx(s.pos);
  Vec2 required = maze.forward_dir(near);
  for (const int ci : maze.corner_path_idx) {
    if (ci >= near) {
      required = maze.forward_dir(ci);  // direction leaving the corner
      break;
    }
  }
  const bool need_x = std::abs(required.x()) >= std::abs(required.y());
  return long_axis_is_x(s.theta) == need_x ? 0.0 : -1.0;
}

bool CouchMovingEnv::success(const CouchState& s, const Maze& maze) const {
  return (s.pos - maze.goal()).norm() < kGoalRadius;
}

}  // namespace trt
