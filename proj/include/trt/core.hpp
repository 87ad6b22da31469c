#pragma once

#include <vector>

#include "trt/common.hpp"

namespace trt {

enum class EnvTag { box_pusher, couch_moving };

const char* env_tag_name(EnvTag tag);
EnvTag env_tag_from_name(const std::string& name);

// Full executable-world observation. Dimension is environment specific
// (box pusher: 6, couch moving: 13).
struct LowState {
  Vec v;
  LowState() = default;
  explicit LowState(Vec x) : v(std::move(x)) {}
  int dim() const { return static_cast<int>(v.size()); }
};

// Point-mass world state (box pusher: 4 = agent xy + box xy, couch: 2).
struct HighState {
  Vec v;
  HighState() = default;
  explicit HighState(Vec x) : v(std::move(x)) {}
  int dim() const { return static_cast<int>(v.size()); }
};

// Ordered sequence of high-level states, tau^H.
struct AbstractTrajectory {
  std::vector<HighState> states;

  int size() const { return static_cast<int>(states.size()); }
  bool empty() const { return states.empty(); }
  int dim() const { return states.empty() ? 0 : states.front().dim(); }
  const HighState& operator[](int i) const { return states[i]; }
};

// Projection f from the low-level state space onto the high-level one.
// Realized as an index gather, which covers both environments.
struct StateMap {
  EnvTag tag;
  int low_dim = 0;
  std::vector<int> pick;  // high[i] = low[pick[i]]

  static StateMap box_pusher();
  static StateMap couch_moving();
  static StateMap for_env(EnvTag tag);

  int high_dim() const { return static_cast<int>(pick.size()); }
};

HighState apply_state_map(const LowState& low, const StateMap& map);

// Weighted L2 dissimilarity d(s^L, s^H) = ||w .* (f(s^L) - s^H)||.
// Weights multiply the coordinate differences before the norm.
struct Dissimilarity {
  StateMap map;
  Vec weights;  // one entry per high-level coordinate

  // Agent coordinates weighted 0.1, object coordinates 0.9.
  static Dissimilarity box_pusher();
  // No manipulated object: unit weights on the point-mass position.
  static Dissimilarity couch_moving();
  // Unit weights everywhere; used by tests.
  static Dissimilarity unit(const StateMap& map);
  static Dissimilarity for_env(EnvTag tag);

  double operator()(const LowState& low, const HighState& high) const;
  // Same metric evaluated between two already-projected high states.
  double between(const HighState& a, const HighState& b) const;
};

}  // namespace trt
