#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "unitele/core/config.hpp"
#include "unitele/core/grid.hpp"
#include "unitele/core/types.hpp"

namespace unitele::planning {

/// What the planner can see of a grid: known cells plus discovered semi-known cells,
/// with an exact squared distance field (in cells) to the nearest visible obstacle.
class PlannerView {
 public:
  PlannerView(const OccupancyGrid& grid, double inflation_m);
  /// View over an explicit occupancy mask (row-major, 1 = occupied).
  PlannerView(int width, int height, double resolution, Pose2D origin, std::vector<std::uint8_t> occupied,
              double inflation_m);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Pose2D& origin() const { return origin_; }
  double inflation() const { return inflation_; }

  bool in_bounds(CellIndex c) const { return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_; }
  std::size_t flat(CellIndex c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }
  std::optional<CellIndex> world_to_grid(double x, double y) const;
  Eigen::Vector2d grid_to_world(CellIndex c) const;

  bool occupied(CellIndex c) const { return occupied_[flat(c)] != 0; }
  /// Occupied or within the inflation radius; what the global planner avoids.
  bool blocked(CellIndex c) const { return blocked_[flat(c)] != 0; }
  /// Squared distance, in cells, from c to the nearest occupied cell center; INT32_MAX when none.
  std::int64_t dist2_cells(CellIndex c) const { return dist2_[flat(c)]; }
  /// Distance in meters from a point to the nearest visible obstacle; negative outside the grid.
  double clearance(double x, double y) const;

  const std::vector<std::uint8_t>& occupied_mask() const { return occupied_; }

 private:
  void build();

  int width_, height_;
  double resolution_;
  Pose2D origin_;
  double inflation_;
  std::vector<std::uint8_t> occupied_;
  std::vector<std::uint8_t> blocked_;
  std::vector<std::int64_t> dist2_;
};

/// Cell-distance to meters: resolution * sqrt(d2) - resolution / 2 (distance to the cell's near edge).
double clearance_from_dist2(std::int64_t d2, double resolution);

struct GlobalPath {
  std::vector<Pose2D> waypoints;  // cell centers, heading along the outgoing segment
  std::vector<CellIndex> cells;
  int axial_steps = 0;
  int diagonal_steps = 0;
  double length_m = 0.0;
  /// Cost in cell units: axial + diagonal * sqrt(2).
  double cost() const;
};

class PlanError : public std::runtime_error {
 public:
  enum class Kind { StartBlocked, GoalBlocked, NoPath };
  PlanError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// 8-connected Dijkstra over unblocked cells. Throws PlanError.
GlobalPath plan_global(const PlannerView& view, const Pose2D& start, const Pose2D& goal);
GlobalPath plan_global(const PlannerView& view, CellIndex start, CellIndex goal);

struct BaseState {
  Pose2D pose;
  BaseVelocity velocity;
};

struct ScoreTerms {
  double heading = 0.0;
  double clearance = 0.0;
  double velocity = 0.0;
  double total = 0.0;
};

struct LocalTrajectory {
  BaseVelocity command;
  std::vector<Pose2D> poses;  // poses[0] is the start pose, then one per dt_plan
  ScoreTerms score;
  double min_clearance_m = 0.0;
  bool admissible = false;
};

struct DwaResult {
  BaseVelocity command;
  LocalTrajectory trajectory;
  bool blocked = false;
  int admissible_count = 0;
};

/// Candidate commands of the dynamic window around the current velocity.
std::vector<BaseVelocity> dynamic_window(const BaseVelocity& current, const DwaConfig& p);
LocalTrajectory rollout(const Pose2D& start, const BaseVelocity& cmd, const DwaConfig& p, const VehicleConfig& v);
/// Point on the path `ahead_m` past the path point nearest to `p`.
Eigen::Vector2d path_target(const GlobalPath& path, const Pose2D& p, double ahead_m);
/// Scores a rolled-out trajectory in place. Sets admissible and min_clearance_m.
void score_trajectory(LocalTrajectory& t, const PlannerView& view, const Eigen::Vector2d& target,
                      const DwaConfig& p);
/// Strict ordering used for argmax: higher total, then lower |v_gamma|, lower v_x, lower v_gamma.
bool better_candidate(const LocalTrajectory& a, const LocalTrajectory& b);

DwaResult dwa_step(const BaseState& state, const PlannerView& view, const GlobalPath& path, const DwaConfig& p,
                   const VehicleConfig& v);

/// Throws std::out_of_range when the trajectory has k or fewer samples.
Pose2D lookahead_pose(const LocalTrajectory& traj, int k = 40);

}  // namespace unitele::planning
