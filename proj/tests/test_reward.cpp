#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <memory>

#include "doctest.h"
#include "trt/reward.hpp"
#include "trt/rng.hpp"

using namespace trt;

namespace {

// 2-d test world: the low state is the high state
const StateMap kMap2{EnvTag::couch_moving, 2, {0, 1}};

LowState low2(double x, double y) {
  Vec v(2);
  v << x, y;
  return LowState(std::move(v));
}

HighState high2(double x, double y) {
  Vec v(2);
  v << x, y;
  return HighState(std::move(v));
}

std::shared_ptr<AbstractTrajectory> line3() {
  auto t = std::make_shared<AbstractTrajectory>();
  t->states = {high2(0, 0), high2(1, 0), high2(2, 0)};
  return t;
}

// Brute-force re-computation of Eq.-style rewards from scratch: j'_k via a
// full argmin for every step seen so far, j_t as the running max, and the
// three reward branches evaluated directly.
struct BruteForce {
  std::shared_ptr<const AbstractTrajectory> traj;
  Dissimilarity d;
  double eps;
  RewardParams params;
  std::vector<LowState> seen;

  std::pair<double, int> step(const LowState& low) {
    seen.push_back(low);
    const int n = traj->size();
    auto match = [&](const LowState& s) {
      int best = 0;  // 0 = none
      double best_d = eps;
      for (int i = 0; i < n; ++i) {
        const double dist = d(s, (*traj)[i]);
        if (dist < best_d) {
          best_d = dist;
          best = i + 1;
        }
      }
      return best;
    };
    int j_prev = 0;
    for (size_t k = 0; k + 1 < seen.size(); ++k) j_prev = std::max(j_prev, match(seen[k]));
    const int jp = match(low);
    const int j = std::max(j_prev, jp);
    double r = 0.0;
    if (j == n) {
      r = 1.0 - std::tanh(params.w * d(low, (*traj)[n - 1]));
    } else if (jp > j_prev) {
      r = (1.0 + params.beta * jp) * (1.0 - std::tanh(params.w * d(low, (*traj)[jp - 1])));
    }
    return {r, j};
  }
};

}  // namespace

TEST_CASE("r_dist values and bounds") {
  CHECK(r_dist(0.0, 30.0) == 1.0);
  CHECK(r_dist(0.1, 30.0) == doctest::Approx(1.0 - std::tanh(3.0)).epsilon(1e-15));
  CHECK(r_dist(0.05, 30.0) == doctest::Approx(1.0 - std::tanh(1.5)).epsilon(1e-15));
  Rng rng(3);
  // stay where doubles can still represent 1 - tanh(w d); the reward is
  // indistinguishable from 0 beyond w d of about 19
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(0, 0.45);
    const double b = a + rng.uniform(1e-3, 0.05);
    CHECK(r_dist(a, 30.0) > r_dist(b, 30.0));
    CHECK(r_dist(a, 30.0) > 0.0);
    CHECK(r_dist(a, 30.0) <= 1.0);
    CHECK(r_dist(rng.uniform(0, 10), 30.0) <= 1.0);
    CHECK(r_dist(rng.uniform(0, 10), 30.0) >= 0.0);
  }
}

TEST_CASE("match_index follows the thresholded argmin") {
  const auto traj = line3();
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  auto m = match_index(low2(1.1, 0), *traj, d, 0.3);
  REQUIRE(m.has_value());
  CHECK(*m == 2);  // distances 1.1, 0.1, 0.9
  CHECK_FALSE(match_index(low2(0.5, 0), *traj, d, 0.3).has_value());
  m = match_index(low2(0, 0), *traj, d, 0.3);
  REQUIRE(m.has_value());
  CHECK(*m == 1);
}

TEST_CASE("match_index breaks ties toward the smaller index") {
  AbstractTrajectory traj;
  traj.states = {high2(0, 0), high2(1, 0)};
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  const auto m = match_index(low2(0.5, 0), traj, d, 0.8);  // equidistant
  REQUIRE(m.has_value());
  CHECK(*m == 1);
}

TEST_CASE("step_reward branches of the trajectory-following reward") {
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  RewardParams params;  // beta 5, w 30

  SUBCASE("progress pays (1 + beta j') r_dist") {
    MatchTracker t(line3(), d, 0.3);
    const double r = step_reward(t, low2(0.05, 0), params);
    CHECK(r == doctest::Approx(6.0 * (1.0 - std::tanh(1.5))).epsilon(1e-12));
    CHECK(t.j_prev() == 1);
  }
  SUBCASE("no new match pays zero") {
    MatchTracker t(line3(), d, 0.3);
    step_reward(t, low2(1.0, 0), params);  // matches index 2
    CHECK(t.j_prev() == 2);
    const double r = step_reward(t, low2(1.05, 0), params);
    CHECK(r == 0.0);
    CHECK(t.j_prev() == 2);
  }
  SUBCASE("matching the final state switches to plain r_dist") {
    MatchTracker t(line3(), d, 0.3);
    step_reward(t, low2(1.0, 0), params);
    const double r = step_reward(t, low2(2.0, 0), params);
    CHECK(r == doctest::Approx(1.0).epsilon(1e-12));  // r_dist(0) = 1
    CHECK(t.j_prev() == 3);
    // and stays on the third branch afterwards
    const double r2 = step_reward(t, low2(1.9, 0), params);
    CHECK(r2 == doctest::Approx(1.0 - std::tanh(30.0 * 0.1)).epsilon(1e-9));
  }
}

TEST_CASE("no-match step makes no progress") {
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  MatchTracker t(line3(), d, 0.3);
  RewardParams params;
  CHECK(step_reward(t, low2(0.5, 0), params) == 0.0);
  CHECK(t.j_prev() == 0);
}

TEST_CASE("tracker rejects trajectories that revisit a state") {
  AbstractTrajectory traj;
  traj.states = {high2(0, 0), high2(1, 0), high2(0.01, 0)};
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  CHECK_THROWS_AS(MatchTracker(std::make_shared<AbstractTrajectory>(traj), d, 0.3),
                  ConfigError);
  // adjacent closeness (a short final segment) is allowed
  AbstractTrajectory ok;
  ok.states = {high2(0, 0), high2(1, 0), high2(1.05, 0)};
  CHECK_NOTHROW(MatchTracker(std::make_shared<AbstractTrajectory>(ok), d, 0.3));
}

TEST_CASE("combined reward scales the task term") {
  RewardParams p;
  p.lambda_task = 0.1;
  CHECK(combined_reward(1.0, -1.9, p) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(combined_reward(0.0, 0.0, p) == 0.0);
  p.lambda_task = 0.5;
  CHECK(combined_reward(0.5691, 0.0, p) == doctest::Approx(0.5691));
}

TEST_CASE("reward_trace: zeros, growth, and plateaus") {
  const Dissimilarity d = Dissimilarity::unit(kMap2);
  RewardParams params;

  SUBCASE("an episode that never matches is all zero") {
    std::vector<LowState> ep{low2(5, 5), low2(6, 6), low2(7, 7)};
    const auto rows = reward_trace(ep, line3(), d, 0.3, params);
    for (const auto& r : rows) {
      CHECK(r.reward == 0.0);
      CHECK(r.running == 0.0);
    }
  }
  SUBCASE("matching state i at step i grows strictly until the end") {
    std::vector<LowState> ep{low2(0, 0), low2(1, 0), low2(2, 0)};
    const auto rows = reward_trace(ep, line3(), d, 0.3, params);
    CHECK(rows[0].running > 0.0);
    CHECK(rows[1].running > rows[0].running);
    CHECK(rows[2].running > rows[1].running);
    CHECK(rows[2].j == 3);
  }
  SUBCASE("a stall segment gives a flat running sum") {
    std::vector<LowState> ep{low2(0, 0), low2(0.5, 0), low2(0.55, 0), low2(0.5, 0),
                             low2(1, 0)};
    const auto rows = reward_trace(ep, line3(), d, 0.3, params);
    CHECK(rows[1].running == rows[2].running);  // plateau while off-plan
    CHECK(rows[2].running == rows[3].running);
    CHECK(rows[4].running > rows[3].running);
  }
}

TEST_CASE("incremental fold equals brute-force recomputation") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(2, 24);
    auto traj = std::make_shared<AbstractTrajectory>();
    Vec2 p(rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (int i = 0; i < n; ++i) {
      traj->states.push_back(high2(p.x(), p.y()));
      p += Vec2(rng.uniform(0.05, 0.3), rng.uniform(-0.1, 0.1));
    }
    RewardParams params;
    params.beta = rng.uniform(0, 8);
    params.w = rng.uniform(5, 50);
    const double eps = rng.uniform(0.02, 0.2);
    const Dissimilarity d = Dissimilarity::unit(kMap2);

    MatchTracker tracker(traj, d, eps);
    BruteForce oracle{traj, d, eps, params, {}};
    Vec2 q(rng.uniform(-1, 1), rng.uniform(-1, 1));
    int last_j = 0;
    for (int t = 0; t < 40; ++t) {
      q += Vec2(rng.uniform(-0.05, 0.15), rng.uniform(-0.05, 0.05));
      const LowState s = low2(q.x(), q.y());
      const double r = step_reward(tracker, s, params);
      const auto [r_ref, j_ref] = oracle.step(s);
      CHECK(tracker.j_prev() == j_ref);
      CHECK(r == doctest::Approx(r_ref).epsilon(1e-12));
      CHECK(tracker.j_prev() >= last_j);  // monotone
      last_j = tracker.j_prev();
      CHECK(r >= 0.0);
      CHECK(r <= (1.0 + params.beta * n) * 1.0);
    }
  }
}
