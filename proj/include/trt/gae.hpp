#pragma once

#include <cstdint>
#include <vector>

#include "trt/common.hpp"

namespace trt {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// Generalized advantage estimation over one stream of steps.
// next_values[t] = V(s_{t+1}): 0 at terminals, the bootstrap estimate at
// truncations, values[t+1] otherwise. chain_cut[t] = 1 whenever the episode
// ends after step t (terminal or truncated), which stops the recursion.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& next_values,
                      const std::vector<uint8_t>& chain_cut, double gamma, double lam);

}  // namespace trt
