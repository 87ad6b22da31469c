#include "trt/attention.hpp"

#include <algorithm>
#include <fstream>

namespace trt {

std::vector<double> aggregate_final_token_attention(const std::vector<Mat>& attn_blocks,
                                                    int prompt_len) {
  check(!attn_blocks.empty(), "aggregate_final_token_attention: no attention rows");
  std::vector<double> acc(prompt_len, 0.0);
  int count = 0;
  for (const auto& rows : attn_blocks) {
    for (Eigen::Index h = 0; h < rows.rows(); ++h) {
      for (int i = 0; i < prompt_len; ++i) acc[i] += rows(h, i);
      ++count;
    }
  }
  for (auto& v : acc) v /= count;
  const double mx = *std::max_element(acc.begin(), acc.end());
  const double mn = *std::min_element(acc.begin(), acc.end());
  if (mx - mn < 1e-15) {
    std::fill(acc.begin(), acc.end(), 1.0);  // flat map scales to all ones
  } else {
    for (auto& v : acc) v = (v - mn) / (mx - mn);
  }
  return acc;
}

template <class S>
AttentionMap attention_heatmap(ActorCritic<S>& ac, const SubsampledPrompt& prompt,
                               const std::vector<LowState>& episode_obs, const Maze* maze) {
  check(ac.actor.is_gpt(),
        "attention_heatmap: backbone '" + std::string(backbone_name(ac.cfg.backbone)) +
            "' has no attention");
  check(!episode_obs.empty(), "attention_heatmap: empty episode");

  MatX<S> states(prompt.size(), prompt.traj.dim());
  for (int i = 0; i < prompt.size(); ++i)
    states.row(i) = prompt.traj[i].v.transpose().template cast<S>();
  const net::PromptCtx<S> ctx =
      ac.actor.encode_prompt(states, prompt.orig_indices, false, nullptr);

  AttentionMap map;
  map.prompt_len = prompt.size();
  if (maze) {
    map.rows = maze->rows;
    map.cols = maze->cols;
  }

  ObsStack stack(ac.cfg.k, ac.cfg.obs_dim);
  stack.start(episode_obs.front());
  for (size_t t = 0; t < episode_obs.size(); ++t) {
    if (t > 0) stack.push(episode_obs[t]);
    const MatX<S> hist = stack.history().template cast<S>();
    const auto out =
        ac.actor.forward_tail(ctx, hist, VecX<S>(), false, nullptr, true, nullptr);
    std::vector<Mat> blocks;
    blocks.reserve(out.attn.size());
    for (const auto& b : out.attn) blocks.push_back(b.template cast<double>());
    std::vector<double> step_map = aggregate_final_token_attention(blocks, prompt.size());

    if (maze) {
      std::vector<double> grid(static_cast<size_t>(maze->rows) * maze->cols, 0.0);
      for (int i = 0; i < prompt.size(); ++i) {
        const Vec2 p(prompt.traj[i].v[0], prompt.traj[i].v[1]);
        const Cell c = maze->cell_of(p);
        if (maze->in_grid(c.x(), c.y()))
          grid[c.x() * maze->cols + c.y()] += step_map[i];
      }
      const double mx = *std::max_element(grid.begin(), grid.end());
      if (mx > 1e-15)
        for (auto& v : grid) v /= mx;
      map.grids.push_back(std::move(grid));
    }
    map.per_step.push_back(std::move(step_map));
  }
  return map;
}

void write_ppm(const std::string& path, const std::vector<double>& grid, int rows, int cols,
               int scale) {
  check(static_cast<int>(grid.size()) == rows * cols, "write_ppm: grid size mismatch");
  std::ofstream out(path);
  check(static_cast<bool>(out), "write_ppm: cannot open " + path);
  out << "P3\n" << cols * scale << " " << rows * scale << "\n255\n";
  for (int r = 0; r < rows * scale; ++r) {
    for (int c = 0; c < cols * scale; ++c) {
      const double v = grid[(r / scale) * cols + (c / scale)];
      // attention in blue on white
      const int other = static_cast<int>(255.0 * (1.0 - std::clamp(v, 0.0, 1.0)));
      out << other << " " << other << " 255 ";
    }
    out << "\n";
  }
}

template AttentionMap attention_heatmap<float>(ActorCritic<float>&, const SubsampledPrompt&,
                                               const std::vector<LowState>&, const Maze*);
template AttentionMap attention_heatmap<double>(ActorCritic<double>&, const SubsampledPrompt&,
                                                const std::vector<LowState>&, const Maze*);

}  // namespace trt
