#pragma once

#include <optional>
#include <string>
#include <utility>

#include "trt/couch_moving.hpp"
#include "trt/ppo.hpp"

namespace trt {

// Trajectory files: `dim=<D> env=<tag>` header, one comma-separated high
// state per line.
void write_trajectory(const std::string& path, const AbstractTrajectory& traj, EnvTag env);
std::pair<AbstractTrajectory, EnvTag> read_trajectory(const std::string& path);

// Box pusher snapshot: tag line + key=value fields + obstacle rows.
void write_box_snapshot(const std::string& path, const BoxPusherState& s);
BoxPusherState read_box_snapshot(const std::string& path);

// Maze file: header line + ASCII grid (# wall, . empty, S start, G goal,
// C chamber, K corner).
void write_maze(const std::string& path, const Maze& maze);
Maze read_maze(const std::string& path);
std::string maze_to_text(const Maze& maze);
Maze maze_from_text(const std::string& text);

enum class SnapshotKind { box_pusher, maze };
SnapshotKind sniff_snapshot(const std::string& path);

// Episode record: the full plan, every visited observation, and enough
// context (p, L_max, eps, maze) to recompute prompts, traces and attention.
struct EpisodeRecord {
  EnvTag env = EnvTag::box_pusher;
  AbstractTrajectory traj;          // full preprocessed plan
  std::vector<LowState> obs;        // s_0 .. s_T
  int p = 2;
  int L_max = 32;
  double eps = 0.1;
  std::optional<Maze> maze;
};

void write_episode(const std::string& path, const EpisodeRecord& rec);
EpisodeRecord read_episode(const std::string& path);

// Run configuration: nested key/value JSON capturing env, plan, reward,
// policy and PPO settings.
RunConfig default_run_config(const std::string& env_name, Backbone backbone);
void save_run_config(const std::string& path, const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

}  // namespace trt
