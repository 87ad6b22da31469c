#pragma once

#include <string>
#include <vector>

#include "trt/couch_moving.hpp"
#include "trt/eval.hpp"
#include "trt/plans.hpp"
#include "trt/policy.hpp"

namespace trt {

// Final-token attention over the prompt positions, averaged across all heads
// and layers, min-max scaled to [0, 1] (at least one entry is 1 per step).
struct AttentionMap {
  std::vector<std::vector<double>> per_step;  // step -> prompt-position weights
  int prompt_len = 0;

  // spatial projection onto maze cells (couch moving only): per step, a
  // rows x cols grid with attention mass binned by the prompt state's cell
  int rows = 0, cols = 0;
  std::vector<std::vector<double>> grids;  // step -> row-major grid
};

// Mean over heads and layers of the final-token rows, prompt columns only,
// min-max scaled. attn_blocks: per block, heads x (Lp + k).
std::vector<double> aggregate_final_token_attention(
    const std::vector<Mat>& attn_blocks, int prompt_len);

// Replays a recorded episode through the policy and extracts the map.
// Throws ConfigError for backbones without attention.
template <class S>
AttentionMap attention_heatmap(ActorCritic<S>& ac, const SubsampledPrompt& prompt,
                               const std::vector<LowState>& episode_obs, const Maze* maze);

// Writes a grayscale portable pixmap (P3) of one grid, darker = more mass.
void write_ppm(const std::string& path, const std::vector<double>& grid, int rows, int cols,
               int scale = 16);

}  // namespace trt
