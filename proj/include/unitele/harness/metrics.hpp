#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace unitele::harness {

using Point2 = Eigen::Vector2d;

struct DeviationMetrics {
  double mae_x = 0.0;  // along the reference tangent
  double mae_y = 0.0;  // along the reference normal
  std::size_t samples = 0;
};

/// Per-sample offsets of `actual` from the nearest point of `reference`, in that point's
/// tangent/normal frame. The reference is resampled by arc length at `step_m` first.
/// Throws std::invalid_argument when the reference has fewer than two distinct points.
std::vector<Point2> path_frame_offsets(const std::vector<Point2>& actual, const std::vector<Point2>& reference,
                                       double step_m = 0.01);

DeviationMetrics deviation_mae(const std::vector<Point2>& actual, const std::vector<Point2>& reference,
                               double step_m = 0.01);

/// Mean absolute value of each component.
DeviationMetrics mae_of(const std::vector<Point2>& offsets);

std::vector<Point2> resample_by_arc_length(const std::vector<Point2>& polyline, double step_m);

double polyline_length(const std::vector<Point2>& polyline);

}  // namespace unitele::harness
