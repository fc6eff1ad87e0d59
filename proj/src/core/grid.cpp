#include "unitele/core/grid.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace unitele {

char cell_class_char(CellClass c) {
  switch (c) {
    case CellClass::Free: return '.';
    case CellClass::Known: return '#';
    case CellClass::SemiKnown: return 's';
    case CellClass::Unknown: return 'u';
  }
  return '?';
}

OccupancyGrid::OccupancyGrid(double resolution, int width, int height, Pose2D origin,
                             std::vector<CellClass> cells)
    : resolution_(resolution), width_(width), height_(height), origin_(origin) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("grid resolution must be > 0");
  }
  if (width <= 0 || height <= 0) throw std::invalid_argument("grid must be non-empty");
  if (origin.gamma != 0.0) throw std::invalid_argument("grid origin must be axis aligned (gamma = 0)");
  if (cells.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("grid cell count does not match width*height");
  }
  cells_ = std::make_shared<const std::vector<CellClass>>(std::move(cells));
  discovered_.assign(size(), 0);
}

OccupancyGrid OccupancyGrid::from_text(std::string_view text, double resolution, Pose2D origin) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw std::invalid_argument("map text is empty");
  const int width = static_cast<int>(lines.front().size());
  const int height = static_cast<int>(lines.size());
  std::vector<CellClass> cells(static_cast<std::size_t>(width) * height, CellClass::Free);
  for (int r = 0; r < height; ++r) {
    const std::string& l = lines[r];
    if (static_cast<int>(l.size()) != width) {
      throw std::invalid_argument("map line " + std::to_string(r + 1) + " has width " +
                                  std::to_string(l.size()) + ", expected " + std::to_string(width));
    }
    const int row = height - 1 - r;
    for (int col = 0; col < width; ++col) {
      CellClass c;
      switch (l[col]) {
        case '.': c = CellClass::Free; break;
        case '#': c = CellClass::Known; break;
        case 's': c = CellClass::SemiKnown; break;
        case 'u': c = CellClass::Unknown; break;
        default:
          throw std::invalid_argument("map line " + std::to_string(r + 1) + ": bad cell character '" +
                                      std::string(1, l[col]) + "'");
      }
      cells[static_cast<std::size_t>(row) * width + col] = c;
    }
  }
  return OccupancyGrid(resolution, width, height, origin, std::move(cells));
}

OccupancyGrid OccupancyGrid::load(const std::filesystem::path& path, double resolution, Pose2D origin) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open map file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str(), resolution, origin);
}

std::string OccupancyGrid::to_text() const {
  std::string out;
  out.reserve(size() + height_);
  for (int row = height_ - 1; row >= 0; --row) {
    for (int col = 0; col < width_; ++col) out.push_back(cell_class_char(cell_class(CellIndex{col, row})));
    out.push_back('\n');
  }
  return out;
}

std::optional<CellIndex> OccupancyGrid::world_to_grid(double x, double y) const {
  const double fx = (x - origin_.x) / resolution_;
  const double fy = (y - origin_.y) / resolution_;
  if (!(fx >= 0.0) || !(fy >= 0.0) || fx >= width_ || fy >= height_) return std::nullopt;
  CellIndex c{static_cast<int>(fx), static_cast<int>(fy)};
  if (!in_bounds(c)) return std::nullopt;
  return c;
}

Eigen::Vector2d OccupancyGrid::grid_to_world(CellIndex c) const {
  return {origin_.x + (c.col + 0.5) * resolution_, origin_.y + (c.row + 0.5) * resolution_};
}

bool OccupancyGrid::mark_discovered(CellIndex c) {
  auto& d = discovered_[flat(c)];
  if (d) return false;
  d = 1;
  ++discovered_count_;
  return true;
}

bool OccupancyGrid::same_layout(const OccupancyGrid& o) const {
  return resolution_ == o.resolution_ && width_ == o.width_ && height_ == o.height_ &&
         origin_ == o.origin_ && (cells_ == o.cells_ || *cells_ == *o.cells_);
}

}  // namespace unitele
