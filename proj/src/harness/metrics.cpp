#include "unitele/harness/metrics.hpp"

#include <cmath>
#include <limits>

namespace unitele::harness {

double polyline_length(const std::vector<Point2>& p) {
  double s = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) s += (p[i] - p[i - 1]).norm();
  return s;
}

std::vector<Point2> resample_by_arc_length(const std::vector<Point2>& p, double step) {
  if (!(step > 0)) throw std::invalid_argument("resample step must be positive");
  std::vector<Point2> out;
  if (p.empty()) return out;
  out.push_back(p.front());
  double carry = 0.0;  // arc length already covered since the last emitted point
  for (std::size_t i = 1; i < p.size(); ++i) {
    const Point2 a = p[i - 1], b = p[i];
    const double len = (b - a).norm();
    if (len == 0.0) continue;
    double s = step - carry;
    while (s <= len) {
      out.push_back(a + (b - a) * (s / len));
      s += step;
    }
    carry = len - (s - step);
  }
  if ((out.back() - p.back()).norm() > 1e-12) out.push_back(p.back());
  return out;
}

std::vector<Point2> path_frame_offsets(const std::vector<Point2>& actual, const std::vector<Point2>& reference,
                                       double step) {
  const auto ref = resample_by_arc_length(reference, step);
  if (ref.size() < 2) throw std::invalid_argument("reference needs at least two distinct points");
  std::vector<Point2> out;
  out.reserve(actual.size());
  for (const auto& a : actual) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double d = (ref[i] - a).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    // tangent from the neighbouring samples
    const std::size_t i0 = best == 0 ? 0 : best - 1;
    const std::size_t i1 = best + 1 < ref.size() ? best + 1 : best;
    const Point2 t = (ref[i1] - ref[i0]).normalized();
    const Point2 n(-t.y(), t.x());
    const Point2 r = a - ref[best];
    out.emplace_back(r.dot(t), r.dot(n));
  }
  return out;
}

DeviationMetrics mae_of(const std::vector<Point2>& offsets) {
  DeviationMetrics m;
  m.samples = offsets.size();
  if (offsets.empty()) return m;
  for (const auto& o : offsets) {
    m.mae_x += std::abs(o.x());
    m.mae_y += std::abs(o.y());
  }
  m.mae_x /= static_cast<double>(offsets.size());
  m.mae_y /= static_cast<double>(offsets.size());
  return m;
}

DeviationMetrics deviation_mae(const std::vector<Point2>& actual, const std::vector<Point2>& reference, double step) {
  if (actual.empty()) throw std::invalid_argument("actual trajectory is empty");
  return mae_of(path_frame_offsets(actual, reference, step));
}

}  // namespace unitele::harness
