#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <deque>
#include <set>

#include "doctest.h"
#include "trt/couch_moving.hpp"
#include "trt/io.hpp"

using namespace trt;

namespace {

Vec act3(double fx, double fy, double tau) {
  Vec a(3);
  a << fx, fy, tau;
  return a;
}

// independent flood fill over open cells
int flood_count(const Maze& m, const Cell& from) {
  std::set<std::pair<int, int>> seen;
  std::deque<Cell> q{from};
  seen.insert({from.x(), from.y()});
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    const Cell dirs[4] = {Cell(0, 1), Cell(1, 0), Cell(0, -1), Cell(-1, 0)};
    for (const auto& d : dirs) {
      const Cell n = c + d;
      if (m.wall(n.x(), n.y())) continue;
      if (seen.insert({n.x(), n.y()}).second) q.push_back(n);
    }
  }
  return static_cast<int>(seen.size());
}

int open_count(const Maze& m) {
  int n = 0;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) n += m.wall(r, c) ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("maze generation yields the requested corner count and connectivity") {
  Rng rng(31);
  for (int i = 0; i < 25; ++i) {
    const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
    CHECK(m.corner_path_idx.size() == 3);
    CHECK(m.chamber_centers.size() == 4);  // start + one per corner
    CHECK_FALSE(m.wall(m.path.front().x(), m.path.front().y()));
    CHECK_FALSE(m.wall(m.path.back().x(), m.path.back().y()));
    CHECK(flood_count(m, m.path.front()) == open_count(m));  // fully connected
    // the path itself is connected and open
    for (size_t k = 1; k < m.path.size(); ++k) {
      CHECK((m.path[k] - m.path[k - 1]).cwiseAbs().sum() == 1);
      CHECK_FALSE(m.wall(m.path[k].x(), m.path[k].y()));
    }
  }
  const Maze long5 = generate_maze(Maze::Variant::long_range, 5, rng);
  CHECK(long5.corner_path_idx.size() == 5);
}

TEST_CASE("long corridors are about 1.5x the short ones") {
  Rng rng(32);
  double short_sum = 0, long_sum = 0;
  int short_n = 0, long_n = 0;
  for (int i = 0; i < 100; ++i) {
    const Maze s = generate_maze(Maze::Variant::short_range, 3, rng);
    for (const int len : s.corridor_lengths) {
      short_sum += len;
      ++short_n;
    }
    const Maze l = generate_maze(Maze::Variant::long_range, 3, rng);
    for (const int len : l.corridor_lengths) {
      long_sum += len;
      ++long_n;
    }
  }
  const double ratio = (long_sum / long_n) / (short_sum / short_n);
  CHECK(ratio > 1.5 * 0.8);
  CHECK(ratio < 1.5 * 1.2);
}

TEST_CASE("zero action from rest leaves the couch still") {
  Rng rng(33);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  const CouchState s0 = env.reset(m);
  const CouchState s1 = env.step(s0, m, act3(0, 0, 0));
  CHECK(s1.pos == s0.pos);
  CHECK(s1.theta == s0.theta);
  CHECK(s1.vel.norm() == 0.0);
}

TEST_CASE("constant force follows the damped-integration closed form") {
  Rng rng(34);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  CouchState s = env.reset(m);
  // independent recurrence for the same dynamics
  const CouchParams& p = env.params();
  const Vec2 fwd = m.forward_dir(0);
  double v_ref = 0.0, x_ref = s.pos.dot(fwd);
  double last_x = x_ref;
  for (int t = 0; t < 12; ++t) {
    s = env.step(s, m, act3(fwd.x(), fwd.y(), 0));
    v_ref = (v_ref + p.f_max / p.mass * p.dt) * p.lin_damping;
    x_ref += v_ref * p.dt;
    const double x = s.pos.dot(fwd);
    CHECK(x == doctest::Approx(x_ref).epsilon(1e-9));
    CHECK(x > last_x);  // monotone toward terminal speed
    last_x = x;
  }
}

TEST_CASE("pure torque in a chamber spins in place") {
  Rng rng(35);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  CouchState s = env.reset(m);  // start chamber center
  const Vec2 start = s.pos;
  const double theta0 = s.theta;
  for (int t = 0; t < 5; ++t) s = env.step(s, m, act3(0, 0, 1));
  CHECK((s.pos - start).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.theta != theta0);
}

TEST_CASE("observation: patch, forward direction, own position") {
  Rng rng(36);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  const CouchState s0 = env.reset(m);
  const LowState o = env.observe(s0, m);
  REQUIRE(o.dim() == 13);
  CHECK(o.v[11] == doctest::Approx(s0.pos.x()));
  CHECK(o.v[12] == doctest::Approx(s0.pos.y()));
  const Vec2 fwd = m.forward_dir(m.nearest_path_idx(s0.pos));
  CHECK(o.v[9] == doctest::Approx(fwd.x()));
  CHECK(o.v[10] == doctest::Approx(fwd.y()));
  // start chamber is 3x3 open: all nine patch samples are free space
  for (int i = 0; i < 9; ++i) CHECK(o.v[i] == 0.0);

  // a couch aligned with a corridor sees walls across it
  int mid = -1;
  for (size_t k = 0; k < m.path.size(); ++k) {
    bool near_chamber = false;
    for (const auto& ch : m.chamber_centers)
      if ((m.path[k] - ch).cwiseAbs().maxCoeff() <= 2) near_chamber = true;
    if (!near_chamber) {
      mid = static_cast<int>(k);
      break;
    }
  }
  REQUIRE(mid >= 0);
  CouchState corridor;
  corridor.pos = m.cell_center(m.path[mid]);
  const Vec2 dir = m.forward_dir(mid);
  corridor.theta = std::atan2(dir.y(), dir.x());
  const LowState oc = env.observe(corridor, m);
  // rows across the couch (indices 0..2 and 6..8) are walls
  for (int j = 0; j < 3; ++j) {
    CHECK(oc.v[j] == 1.0);
    CHECK(oc.v[6 + j] == 1.0);
  }
  CHECK(oc.v[4] == 0.0);  // the center cell is free
}

TEST_CASE("observation only depends on the local patch") {
  Rng rng(37);
  Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  const CouchState s0 = env.reset(m);
  const LowState before = env.observe(s0, m);
  // edit a wall far outside the 3x3 neighborhood
  const Cell c = m.cell_of(s0.pos);
  for (int r = 0; r < m.rows; ++r) {
    for (int cc = 0; cc < m.cols; ++cc) {
      if (std::abs(r - c.x()) > 3 || std::abs(cc - c.y()) > 3) {
        Maze edited = m;
        edited.occ[r * m.cols + cc] ^= 1;
        CHECK(env.observe(s0, edited).v.head(9) == before.v.head(9));
        r = m.rows;  // one edit is enough
        break;
      }
    }
  }
}

TEST_CASE("task reward: chambers are free, orientation gates corridors") {
  Rng rng(38);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  CouchState s = env.reset(m);
  CHECK(env.task_reward(s, m) == 0.0);  // start chamber

  // a corridor cell before the first corner
  const int corner = m.corner_path_idx.front();
  int cell_idx = -1;
  for (int k = corner; k >= 0; --k) {
    bool in_chamber = false;
    for (const auto& ch : m.chamber_centers)
      if ((m.path[k] - ch).cwiseAbs().maxCoeff() <= 1) in_chamber = true;
    if (!in_chamber && (m.cell_center(m.path[k]) - m.cell_center(m.path[corner])).norm() >
                           CouchMovingEnv::kChamberRadius) {
      cell_idx = k;
      break;
    }
  }
  REQUIRE(cell_idx >= 0);
  CouchState c;
  c.pos = m.cell_center(m.path[cell_idx]);
  const Vec2 exit_dir = m.forward_dir(corner);
  // oriented for the upcoming corner's exit: reward 0
  c.theta = std::atan2(exit_dir.y(), exit_dir.x());
  CHECK(env.task_reward(c, m) == 0.0);
  // wrongly oriented: -1
  c.theta += M_PI / 2.0;
  CHECK(env.task_reward(c, m) == -1.0);
}

TEST_CASE("success is strict within one cell of the goal") {
  Rng rng(39);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  CouchState s;
  s.pos = m.goal();
  CHECK(env.success(s, m));
  s.pos = m.goal() + Vec2(2 * Maze::kCellSize, 0);
  CHECK_FALSE(env.success(s, m));
  s.pos = m.goal() + Vec2(CouchMovingEnv::kGoalRadius, 0);
  CHECK_FALSE(env.success(s, m));  // boundary: strict
}

TEST_CASE("no tunneling: couch corners never end inside walls") {
  Rng rng(40);
  const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
  CouchMovingEnv env;
  CouchState s = env.reset(m);
  Rng noise(41);
  for (int t = 0; t < 400; ++t) {
    s = env.step(s, m,
                 act3(noise.uniform(-1, 1), noise.uniform(-1, 1), noise.uniform(-1, 1)));
    const auto cs = env.corners(s);
    for (int i = 0; i < 4; ++i) {
      // corners and edge midpoints stay in free space
      CHECK_FALSE(m.wall_at(cs[i]));
      CHECK_FALSE(m.wall_at(0.5 * (cs[i] + cs[(i + 1) % 4])));
    }
  }
}

TEST_CASE("a wrongly oriented couch cannot pass a corner") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
    CouchMovingEnv env;
    CouchState s = env.reset(m);  // aligned with the entry corridor
    const int corner = m.corner_path_idx.front();
    // drive along the path with no rotation: the couch stays aligned with
    // the entry corridor, which is perpendicular to the exit
    int best_idx = 0;
    for (int t = 0; t < 500; ++t) {
      const int near = m.nearest_path_idx(s.pos);
      best_idx = std::max(best_idx, near);
      const int target = std::min(near + 2, static_cast<int>(m.path.size()) - 1);
      const Vec2 d = m.cell_center(m.path[target]) - s.pos;
      Vec a = act3(0, 0, 0);
      const Vec2 f = 8.0 * d - 4.0 * s.vel;
      a[0] = std::clamp(f.x(), -1.0, 1.0);
      a[1] = std::clamp(f.y(), -1.0, 1.0);
      // hold the initial orientation
      a[2] = std::clamp(-4.0 * s.omega, -1.0, 1.0);
      s = env.step(s, m, a);
    }
    CHECK(best_idx <= corner + 1);  // stalls at the corner cell
  }
}

TEST_CASE("a scripted rotation completes inside every chamber") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const Maze m = generate_maze(Maze::Variant::short_range, 3, rng);
    CouchMovingEnv env;
    for (const auto& ch : m.chamber_centers) {
      CouchState s;
      s.pos = m.cell_center(ch);
      s.theta = 0.0;
      CHECK_FALSE(env.collides(s, m));
      bool touched = false;
      int steps = 0;
      while (s.theta < M_PI / 2.0 - 0.05 && steps < 200) {
        const Vec2 before = s.pos;
        s = env.step(s, m, act3(std::clamp(12.0 * (m.cell_center(ch).x() - s.pos.x()), -1.0, 1.0),
                                std::clamp(12.0 * (m.cell_center(ch).y() - s.pos.y()), -1.0, 1.0),
                                std::clamp(2.0 * (M_PI / 2.0 - s.theta) - 1.5 * s.omega, -1.0, 1.0)));
        if ((s.pos - before).norm() > 0.2) touched = true;  // collision kick
        ++steps;
      }
      CHECK(s.theta >= M_PI / 2.0 - 0.05);
      CHECK_FALSE(touched);
      CHECK_FALSE(env.collides(s, m));
    }
  }
}

TEST_CASE("maze files round-trip exactly") {
  Rng rng(44);
  const Maze m = generate_maze(Maze::Variant::long_range, 4, rng);
  const std::string text = maze_to_text(m);
  const Maze back = maze_from_text(text);
  CHECK(back.rows == m.rows);
  CHECK(back.cols == m.cols);
  CHECK(back.occ == m.occ);
  CHECK(back.n_corners == m.n_corners);
  REQUIRE(back.path.size() == m.path.size());
  for (size_t i = 0; i < m.path.size(); ++i) CHECK(back.path[i] == m.path[i]);
  CHECK(back.corner_path_idx == m.corner_path_idx);
  REQUIRE(back.chamber_centers.size() == m.chamber_centers.size());
  CHECK(maze_to_text(back) == text);
}
