#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "trt/core.hpp"
#include "trt/rng.hpp"

using namespace trt;

namespace {

LowState bp_low(double ax, double ay, double bx, double by, double gx, double gy) {
  Vec v(6);
  v << ax, ay, bx, by, gx, gy;
  return LowState(std::move(v));
}

LowState couch_low(double px, double py) {
  Vec v = Vec::Zero(13);
  v[11] = px;
  v[12] = py;
  return LowState(std::move(v));
}

// brute-force weighted norm, written independently of Dissimilarity
double weighted_norm_oracle(const Vec& a, const Vec& b, const Vec& w) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = w[i] * (a[i] - b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("state map projects box pusher low states") {
  const LowState low = bp_low(1, 2, 3, 4, 9, 9);
  const HighState high = apply_state_map(low, StateMap::box_pusher());
  REQUIRE(high.dim() == 4);
  CHECK(high.v[0] == 1);
  CHECK(high.v[1] == 2);
  CHECK(high.v[2] == 3);
  CHECK(high.v[3] == 4);
}

TEST_CASE("state map projects couch low states to position only") {
  const HighState high = apply_state_map(couch_low(5, 6), StateMap::couch_moving());
  REQUIRE(high.dim() == 2);
  CHECK(high.v[0] == 5);
  CHECK(high.v[1] == 6);
}

TEST_CASE("state map rejects dimension mismatch") {
  Vec v = Vec::Zero(5);
  CHECK_THROWS_AS(apply_state_map(LowState(v), StateMap::box_pusher()), ConfigError);
}

TEST_CASE("dissimilarity is zero at the projection") {
  const Dissimilarity d = Dissimilarity::box_pusher();
  const LowState low = bp_low(0.3, 0.4, 0.8, 0.2, 1.0, 1.0);
  CHECK(d(low, apply_state_map(low, d.map)) == 0.0);
}

TEST_CASE("dissimilarity matches direct evaluation with unit weights") {
  StateMap map{EnvTag::couch_moving, 2, {0, 1}};
  const Dissimilarity d = Dissimilarity::unit(map);
  Vec a(2), b(2);
  a << 1.1, 0.0;
  b << 1.0, 0.0;
  CHECK(d(LowState(a), HighState(b)) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("box pusher weights scale agent coordinates by 0.1") {
  const Dissimilarity d = Dissimilarity::box_pusher();
  const LowState low = bp_low(1, 0, 0, 0, 0, 0);
  const HighState zero(Vec::Zero(4));
  CHECK(d(low, zero) == doctest::Approx(0.1).epsilon(1e-12));
  // against an independently coded weighted norm
  Vec w(4);
  w << 0.1, 0.1, 0.9, 0.9;
  Vec proj(4);
  proj << 1, 0, 0, 0;
  CHECK(d(low, zero) == doctest::Approx(weighted_norm_oracle(proj, Vec::Zero(4), w)));
}

TEST_CASE("dissimilarity properties: nonnegative, symmetric, zero iff equal") {
  Rng rng(7);
  const Dissimilarity d = Dissimilarity::box_pusher();
  for (int i = 0; i < 1000; ++i) {
    Vec a(4), b(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = rng.uniform(-2, 2);
      b[k] = rng.uniform(-2, 2);
    }
    const double ab = d.between(HighState(a), HighState(b));
    const double ba = d.between(HighState(b), HighState(a));
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-15));
    if (ab == 0.0) CHECK((a - b).norm() == 0.0);
    CHECK(d.between(HighState(a), HighState(a)) == 0.0);
  }
}

TEST_CASE("projection identity holds over random reachable states") {
  Rng rng(11);
  const Dissimilarity bp = Dissimilarity::box_pusher();
  const Dissimilarity cm = Dissimilarity::couch_moving();
  for (int i = 0; i < 10000; ++i) {
    const LowState a =
        bp_low(rng.uniform(0, 1.4), rng.uniform(0, 1.4), rng.uniform(0, 1.4),
               rng.uniform(0, 1.4), rng.uniform(0, 1.4), rng.uniform(0, 1.4));
    CHECK(bp(a, apply_state_map(a, bp.map)) == 0.0);
    const LowState b = couch_low(rng.uniform(0, 20), rng.uniform(0, 20));
    CHECK(cm(b, apply_state_map(b, cm.map)) == 0.0);
  }
}

TEST_CASE("doubling a group weight doubles that group's contribution") {
  Dissimilarity d = Dissimilarity::box_pusher();
  Vec a = Vec::Zero(4), b = Vec::Zero(4);
  b[2] = 0.7;  // only object coordinates differ
  const double base = d.between(HighState(a), HighState(b));
  d.weights[2] *= 2.0;
  d.weights[3] *= 2.0;
  CHECK(d.between(HighState(a), HighState(b)) == doctest::Approx(2.0 * base).epsilon(1e-15));
}
