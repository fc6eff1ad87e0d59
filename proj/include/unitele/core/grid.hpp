#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unitele/core/types.hpp"

namespace unitele {

/// Obstacle taxonomy of a map cell.
///   Known: in the prior map and seen by lidar.
///   SemiKnown: absent from the prior map, seen by lidar once in range.
///   Unknown: never mapped, transparent to lidar; only collisions reveal it.
enum class CellClass : std::uint8_t { Free = 0, Known = 1, SemiKnown = 2, Unknown = 3 };

char cell_class_char(CellClass c);

struct CellIndex {
  int col = 0;  // along world x
  int row = 0;  // along world y

  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

/// Axis-aligned occupancy grid. Cell classes are fixed at construction; the
/// per-cell discovered flag only ever goes from false to true.
///
/// Text form: one line per row, first line is the row with the largest y.
/// '.' free, '#' known, 's' semi-known, 'u' unknown.
class OccupancyGrid {
 public:
  OccupancyGrid(double resolution, int width, int height, Pose2D origin,
                std::vector<CellClass> cells);

  static OccupancyGrid from_text(std::string_view text, double resolution, Pose2D origin);
  static OccupancyGrid load(const std::filesystem::path& path, double resolution, Pose2D origin);
  std::string to_text() const;

  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Pose2D& origin() const { return origin_; }
  std::size_t size() const { return static_cast<std::size_t>(width_) * height_; }

  bool in_bounds(CellIndex c) const {
    return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_;
  }
  std::size_t flat(CellIndex c) const {
    return static_cast<std::size_t>(c.row) * width_ + c.col;
  }
  CellIndex unflat(std::size_t i) const {
    return {static_cast<int>(i % width_), static_cast<int>(i / width_)};
  }

  /// Cell containing (x, y); std::nullopt when outside the grid (never clamped).
  std::optional<CellIndex> world_to_grid(double x, double y) const;
  std::optional<CellIndex> world_to_grid(const Pose2D& p) const { return world_to_grid(p.x, p.y); }
  Eigen::Vector2d grid_to_world(CellIndex c) const;

  CellClass cell_class(CellIndex c) const { return (*cells_)[flat(c)]; }
  CellClass cell_class(std::size_t i) const { return (*cells_)[i]; }
  bool occupied(CellIndex c) const { return cell_class(c) != CellClass::Free; }

  bool discovered(CellIndex c) const { return discovered_[flat(c)] != 0; }
  bool discovered(std::size_t i) const { return discovered_[i] != 0; }
  /// Returns true when the flag flipped.
  bool mark_discovered(CellIndex c);
  std::size_t discovered_count() const { return discovered_count_; }

  /// True if both grids share the same class layout and geometry.
  bool same_layout(const OccupancyGrid& o) const;

 private:
  double resolution_;
  int width_;
  int height_;
  Pose2D origin_;
  std::shared_ptr<const std::vector<CellClass>> cells_;
  std::vector<std::uint8_t> discovered_;
  std::size_t discovered_count_ = 0;
};

}  // namespace unitele
