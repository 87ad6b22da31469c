#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "trt/box_pusher.hpp"
#include "trt/rng.hpp"

using namespace trt;

namespace {

BoxPusherState make_state(Vec2 agent, Vec2 box, Vec2 goal) {
  BoxPusherState s;
  s.agent = agent;
  s.box = box;
  s.goal = goal;
  s.box_width = 0.1;
  return s;
}

Vec act2(double x, double y) {
  Vec a(2);
  a << x, y;
  return a;
}

bool rects_overlap_oracle(const Rect& a, const Rect& b) {
  const bool sep = a.hi.x() <= b.lo.x() || b.hi.x() <= a.lo.x() || a.hi.y() <= b.lo.y() ||
                   b.hi.y() <= a.lo.y();
  return !sep;
}

}  // namespace

TEST_CASE("train reset has no obstacles and respects separations") {
  BoxPusherEnv env;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const BoxPusherState s = env.reset(rng);
    CHECK(s.obstacles.empty());
    CHECK((s.agent - s.box).norm() >= 0.2);
    CHECK((s.agent - s.goal).norm() >= 0.2);
    CHECK((s.box - s.goal).norm() >= 0.2);
  }
}

TEST_CASE("reset is deterministic under a fixed seed") {
  BoxPusherEnv env;
  Rng a(99), b(99);
  const BoxPusherState s1 = env.reset(a);
  const BoxPusherState s2 = env.reset(b);
  CHECK(s1.agent == s2.agent);
  CHECK(s1.box == s2.box);
  CHECK(s1.goal == s2.goal);
}

TEST_CASE("test reset keeps obstacles clear of box and goal") {
  BoxPusherConfig cfg;
  cfg.with_obstacles = true;
  BoxPusherEnv env(cfg);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const BoxPusherState s = env.reset(rng);
    REQUIRE(!s.obstacles.empty());
    CHECK(s.obstacles.size() <= 3);
    for (const auto& ob : s.obstacles) {
      CHECK_FALSE(rects_overlap_oracle(ob, Rect::square(s.box, s.box_width)));
      CHECK_FALSE(rects_overlap_oracle(ob, Rect::square(s.goal, s.box_width)));
      CHECK_FALSE(rects_overlap_oracle(ob, Rect::square(s.agent, s.box_width)));
    }
  }
}

TEST_CASE("a free move leaves the box alone") {
  BoxPusherEnv env;
  const BoxPusherState s = make_state({0.3, 0.3}, {0.8, 0.8}, {1.0, 1.0});
  const BoxPusherState n = env.step(s, act2(1, 0));
  CHECK(n.agent.x() == doctest::Approx(0.35));  // one delta_max
  CHECK(n.agent.y() == 0.3);
  CHECK(n.box == s.box);
  CHECK(n.step_count == 1);
}

TEST_CASE("pushing from flush contact displaces the box exactly") {
  BoxPusherEnv env;
  // agent flush against the box's left face
  const BoxPusherState s = make_state({0.6, 0.5}, {0.7, 0.5}, {1.2, 0.5});
  const BoxPusherState n = env.step(s, act2(1, 0));
  CHECK(n.box.x() == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(n.agent.x() == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(n.box.y() == 0.5);
}

TEST_CASE("push-only: moving away never drags the box") {
  BoxPusherEnv env;
  const BoxPusherState s = make_state({0.6, 0.5}, {0.7, 0.5}, {1.2, 0.5});
  const BoxPusherState n = env.step(s, act2(-1, 0));
  CHECK(n.box == s.box);
  CHECK(n.agent.x() == doctest::Approx(0.55));
}

TEST_CASE("agents stop at obstacle boundaries") {
  BoxPusherConfig cfg;
  BoxPusherEnv env(cfg);
  BoxPusherState s = make_state({0.5, 0.5}, {1.2, 1.2}, {1.3, 1.3});
  s.obstacles.push_back(Rect{Vec2(0.58, 0.4), Vec2(0.7, 0.6)});
  const BoxPusherState n = env.step(s, act2(1, 0));
  CHECK(n.agent.x() == doctest::Approx(0.53).epsilon(1e-12));  // flush at 0.58 - 0.05
  const BoxPusherState n2 = env.step(n, act2(1, 0));
  CHECK(n2.agent.x() == doctest::Approx(0.53).epsilon(1e-12));  // stays put
  CHECK(n2.agent.y() == 0.5);
}

TEST_CASE("boxes stop at obstacles and the agent ends flush") {
  BoxPusherConfig cfg;
  BoxPusherEnv env(cfg);
  BoxPusherState s = make_state({0.5, 0.5}, {0.6, 0.5}, {1.3, 0.5});
  s.obstacles.push_back(Rect{Vec2(0.68, 0.4), Vec2(0.8, 0.6)});
  BoxPusherState n = s;
  for (int i = 0; i < 5; ++i) n = env.step(n, act2(1, 0));
  CHECK(n.box.x() == doctest::Approx(0.63).epsilon(1e-12));  // flush at 0.68 - 0.05
  CHECK(n.agent.x() == doctest::Approx(0.53).epsilon(1e-12));
}

TEST_CASE("observation is (agent, box, goal) and hides obstacles") {
  BoxPusherEnv env;
  BoxPusherState s = make_state({0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6});
  const LowState o = env.observe(s);
  REQUIRE(o.dim() == 6);
  CHECK(o.v[0] == 0.1);
  CHECK(o.v[1] == 0.2);
  CHECK(o.v[2] == 0.3);
  CHECK(o.v[3] == 0.4);
  CHECK(o.v[4] == 0.5);
  CHECK(o.v[5] == 0.6);

  BoxPusherState s2 = s;
  s2.goal = Vec2(0.9, 1.0);
  const LowState o2 = env.observe(s2);
  CHECK(o2.v.head(4) == o.v.head(4));  // only the last two entries change
  CHECK(o2.v[4] == 0.9);

  BoxPusherState s3 = s;
  s3.obstacles.push_back(Rect{Vec2(0.7, 0.7), Vec2(0.8, 0.8)});
  CHECK(env.observe(s3).v == o.v);
}

TEST_CASE("task reward matches the weighted-distance formula") {
  BoxPusherEnv env;
  CHECK(env.task_reward(make_state({0.4, 0.4}, {0.4, 0.4}, {0.4, 0.4})) == 0.0);
  CHECK(env.task_reward(make_state({0, 0}, {1, 0}, {1, 2})) ==
        doctest::Approx(-1.9).epsilon(1e-12));
  // moving the box one unit closer to the goal (agent kept equidistant)
  // raises the reward by exactly 0.9
  const double r1 = env.task_reward(make_state({1, 0.5}, {1, 0}, {1, 2}));
  const double r2 = env.task_reward(make_state({1, 0.5}, {1, 1}, {1, 2}));
  CHECK(r2 - r1 == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("success is strict at one box width") {
  BoxPusherEnv env;
  CHECK(env.success(make_state({0, 0}, {0.7, 0.7}, {0.7, 0.7})));
  CHECK_FALSE(env.success(make_state({0, 0}, {0.7, 0.7}, {0.8, 0.7})));  // exactly bw
  CHECK(env.success(make_state({0, 0}, {0.7, 0.7}, {0.799, 0.7})));
}

TEST_CASE("random episodes keep the push-only and clipping invariants") {
  BoxPusherConfig cfg;
  cfg.with_obstacles = true;
  BoxPusherEnv env(cfg);
  Rng rng(21);
  for (int ep = 0; ep < 20; ++ep) {
    BoxPusherState s = env.reset(rng);
    for (int t = 0; t < 60; ++t) {
      const Vec a = act2(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
      const BoxPusherState n = env.step(s, a);
      const Vec2 da = n.agent - s.agent;
      const Vec2 db = n.box - s.box;
      CHECK(std::abs(da.x()) <= 0.05 + 1e-12);
      CHECK(std::abs(da.y()) <= 0.05 + 1e-12);
      CHECK(da.dot(db) >= -1e-12);  // never pulled
      for (const auto& ob : n.obstacles) {
        CHECK_FALSE(rects_overlap_oracle(ob, Rect::square(n.agent, s.box_width)));
        CHECK_FALSE(rects_overlap_oracle(ob, Rect::square(n.box, s.box_width)));
      }
      CHECK_FALSE(rects_overlap_oracle(Rect::square(n.agent, s.box_width * 0.999),
                                       Rect::square(n.box, s.box_width * 0.999)));
      // determinism
      const BoxPusherState n2 = env.step(s, a);
      CHECK(n2.agent == n.agent);
      CHECK(n2.box == n.box);
      s = n;
    }
  }
}
