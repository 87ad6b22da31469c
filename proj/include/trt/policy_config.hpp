#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trt/common.hpp"

namespace trt {

enum class Backbone { causal_attention, recurrent, feedforward_gc, feedforward_sgc };

const char* backbone_name(Backbone b);
Backbone backbone_from_name(const std::string& name);

// Translation-network shape. Defaults are the box pusher values; couch
// moving overrides k=5, L_max=50, embed_dim=64, obs_dim=13, high_dim=2,
// action_dim=3.
struct PolicyConfig {
  Backbone backbone = Backbone::causal_attention;
  int k = 2;               // low-state stack size
  int L_max = 32;          // max prompt length
  int embed_dim = 32;      // state-embedding token width
  std::vector<int> layer_dims = {128, 128, 128, 128};  // sequential module
  std::vector<int> head_dims = {128, 128};             // actor/critic MLP
  int n_heads = 4;
  int ff_mult = 2;         // feedforward expansion inside attention blocks
  double dropout = 0.1;
  bool timestep_embeddings = true;
  int max_timestep = 96;   // timestep-embedding table size
  double init_log_std = -0.5;
  int action_dim = 2;
  int obs_dim = 6;
  int high_dim = 4;
  int goal_dim = 0;        // GC/SGC input; 0 otherwise
  int sgc_lookahead = 5;

  int model_width() const {
    check(!layer_dims.empty(), "PolicyConfig: layer_dims empty");
    for (int d : layer_dims)
      check(d == layer_dims.front(), "PolicyConfig: layer_dims must be uniform");
    return layer_dims.front();
  }
  int n_layers() const { return static_cast<int>(layer_dims.size()); }

  void validate() const;

  bool same_architecture(const PolicyConfig& o) const;

  static PolicyConfig box_pusher_default();
  static PolicyConfig couch_default();
};

}  // namespace trt
