#include "trt/core.hpp"

namespace trt {

const char* env_tag_name(EnvTag tag) {
  switch (tag) {
    case EnvTag::box_pusher: return "box_pusher";
    case EnvTag::couch_moving: return "couch_moving";
  }
  return "?";
}

EnvTag env_tag_from_name(const std::string& name) {
  if (name == "box_pusher") return EnvTag::box_pusher;
  if (name == "couch_moving") return EnvTag::couch_moving;
  throw ConfigError("unknown environment tag: " + name);
}

StateMap StateMap::box_pusher() {
  // low = (agent xy, box xy, goal xy); high = (agent xy, box xy)
  return StateMap{EnvTag::box_pusher, 6, {0, 1, 2, 3}};
}

StateMap StateMap::couch_moving() {
  // low = (3x3 patch, forward dir, position); high = position
  return StateMap{EnvTag::couch_moving, 13, {11, 12}};
}

StateMap StateMap::for_env(EnvTag tag) {
  return tag == EnvTag::box_pusher ? box_pusher() : couch_moving();
}

HighState apply_state_map(const LowState& low, const StateMap& map) {
  check(low.dim() == map.low_dim, "apply_state_map: low state has dimension " +
                                      std::to_string(low.dim()) + ", map expects " +
                                      std::to_string(map.low_dim));
  Vec out(map.high_dim());
  for (int i = 0; i < map.high_dim(); ++i) out[i] = low.v[map.pick[i]];
  return HighState(std::move(out));
}

Dissimilarity Dissimilarity::box_pusher() {
  Dissimilarity d;
  d.map = StateMap::box_pusher();
  d.weights = Vec(4);
  d.weights << 0.1, 0.1, 0.9, 0.9;
  return d;
}

Dissimilarity Dissimilarity::couch_moving() {
  Dissimilarity d;
  d.map = StateMap::couch_moving();
  d.weights = Vec::Ones(2);
  return d;
}

Dissimilarity Dissimilarity::unit(const StateMap& map) {
  Dissimilarity d;
  d.map = map;
  d.weights = Vec::Ones(map.high_dim());
  return d;
}

Dissimilarity Dissimilarity::for_env(EnvTag tag) {
  return tag == EnvTag::box_pusher ? box_pusher() : couch_moving();
}

double Dissimilarity::operator()(const LowState& low, const HighState& high) const {
  return between(apply_state_map(low, map), high);
}

double Dissimilarity::between(const HighState& a, const HighState& b) const {
  check(a.dim() == b.dim() && a.dim() == static_cast<int>(weights.size()),
        "dissimilarity: dimension mismatch");
  return (weights.cwiseProduct(a.v - b.v)).norm();
}

}  // namespace trt
