#pragma once

#include <Eigen/Core>
#include <vector>

#include "trt/core.hpp"
#include "trt/geometry.hpp"
#include "trt/rng.hpp"

namespace trt {

using Cell = Eigen::Vector2i;  // (row, col)

// Grid maze of corridors (width 1 cell), 3x3 chambers, and corners. Each
// corner sits at the center of its chamber: the couch is too long to turn
// in a corridor and can only rotate inside a chamber, so a turn has to be
// prepared there. The start region is a chamber too.
struct Maze {
  static constexpr double kCellSize = 0.5;  // world units per cell

  enum class Variant { short_range, long_range };

  Variant variant = Variant::short_range;
  int n_corners = 3;
  uint64_t seed = 0;
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> occ;  // row-major; 1 = wall, 0 = open

  std::vector<Cell> path;              // ordered open cells, start -> goal
  std::vector<int> corner_path_idx;    // indices into path (turn cells)
  std::vector<Cell> chamber_centers;   // start chamber + one per corner
  std::vector<int> corridor_lengths;   // sampled segment lengths (cells)

  bool in_grid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  bool wall(int r, int c) const { return !in_grid(r, c) || occ[r * cols + c] != 0; }
  bool wall_at(const Vec2& p) const;

  Vec2 cell_center(const Cell& cell) const {
    return Vec2((cell.y() + 0.5) * kCellSize, (cell.x() + 0.5) * kCellSize);
  }
  Cell cell_of(const Vec2& p) const {
    return Cell(static_cast<int>(std::floor(p.y() / kCellSize)),
                static_cast<int>(std::floor(p.x() / kCellSize)));
  }

  Vec2 start() const { return cell_center(path.front()); }
  Vec2 goal() const { return cell_center(path.back()); }

  int nearest_path_idx(const Vec2& p) const;
  // Unit direction toward the goal at a path cell (world axes).
  Vec2 forward_dir(int path_idx) const;

  // Derives path/corners/chambers from the grid + marks; used after both
  // generation and file loading so the two agree exactly.
  void rebuild_path(const Cell& start_cell, const Cell& goal_cell);
};

const char* variant_name(Maze::Variant v);
Maze::Variant variant_from_name(const std::string& name);

// Exactly n_corners corners with random turn directions, corridor lengths
// from the variant's range (long is 1.5x short on average). Retries
// internally on self-intersecting layouts.
Maze generate_maze(Maze::Variant variant, int n_corners, Rng& rng);

struct CouchParams {
  double length = 0.9;   // long extent, world units (1.8 cells)
  double width = 0.3;    // short extent (0.6 cells)
  double mass = 1.0;
  double dt = 0.1;
  double lin_damping = 0.6;  // velocity retained per step
  double ang_damping = 0.6;
  double f_max = 10.0;
  double tau_max = 2.0;
  double inertia() const { return mass * (length * length + width * width) / 12.0; }
};

struct CouchState {
  Vec2 pos{0, 0};
  double theta = 0.0;  // radians, normalized to (-pi, pi]
  Vec2 vel{0, 0};
  double omega = 0.0;
  int step_count = 0;
};

class CouchMovingEnv {
 public:
  explicit CouchMovingEnv(CouchParams params = {}) : p_(params) {}

  const CouchParams& params() const { return p_; }

  // Couch at the start chamber center, aligned with the first corridor.
  CouchState reset(const Maze& maze) const;

  // Semi-implicit integration with damping; collision response projects the
  // couch rectangle out of walls and removes the normal velocity component.
  CouchState step(const CouchState& s, const Maze& maze, const Vec& action) const;

  // 9 local occupancy samples (3x3, couch frame), forward direction of the
  // nearest path cell, own 2D position. No full-maze access.
  LowState observe(const CouchState& s, const Maze& maze) const;

  // 0 in a chamber; otherwise 0 if the snapped long axis is parallel to the
  // corridor leaving the upcoming corner, -1 if not.
  double task_reward(const CouchState& s, const Maze& maze) const;

  // ||center - goal|| < one cell, strict.
  bool success(const CouchState& s, const Maze& maze) const;

  // Couch rectangle corners in world coordinates.
  std::array<Vec2, 4> corners(const CouchState& s) const;
  bool collides(const CouchState& s, const Maze& maze) const;

  static constexpr double kChamberRadius = 0.5;  // world units
  static constexpr double kGoalRadius = 0.5;

 private:
  CouchParams p_;
};

}  // namespace trt
