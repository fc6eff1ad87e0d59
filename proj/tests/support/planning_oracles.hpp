#pragma once

// Independent reference implementations for the planners, shared by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "unitele/core/angles.hpp"
#include "unitele/core/motion.hpp"
#include "unitele/planning/planner.hpp"

namespace unitele::planning::oracle {

inline PlannerView random_view(std::mt19937_64& rng, int w, int h, double density, double res, double inflation) {
  std::bernoulli_distribution b(density);
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(w) * h);
  for (auto& o : occ) o = b(rng) ? 1 : 0;
  return PlannerView(w, h, res, Pose2D{}, occ, inflation);
}

// Bellman-Ford style relaxation to a fixed point, tracking (axial, diagonal) step counts.
inline std::optional<std::pair<int, int>> oracle_cost(const PlannerView& v, CellIndex s, CellIndex g) {
  const int w = v.width(), h = v.height();
  const double r2 = std::sqrt(2.0);
  std::vector<std::pair<int, int>> best(static_cast<std::size_t>(w) * h, {-1, -1});
  auto key = [&](std::pair<int, int> p) { return p.first + p.second * r2; };
  best[v.flat(s)] = {0, 0};
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const CellIndex cur{c, r};
        const auto cb = best[v.flat(cur)];
        if (cb.first < 0) continue;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (!dr && !dc) continue;
            const CellIndex nb{c + dc, r + dr};
            if (!v.in_bounds(nb) || v.blocked(nb)) continue;
            const std::pair<int, int> cand = (dr && dc) ? std::pair{cb.first, cb.second + 1}
                                                        : std::pair{cb.first + 1, cb.second};
            auto& nbb = best[v.flat(nb)];
            if (nbb.first < 0 || key(cand) < key(nbb)) {
              nbb = cand;
              changed = true;
            }
          }
      }
  }
  if (best[v.flat(g)].first < 0) return std::nullopt;
  return best[v.flat(g)];
}

inline std::int64_t brute_dist2(const PlannerView& v, CellIndex c) {
  std::int64_t best = std::numeric_limits<std::int32_t>::max();
  for (int r = 0; r < v.height(); ++r)
    for (int q = 0; q < v.width(); ++q)
      if (v.occupied({q, r})) {
        const std::int64_t dc = q - c.col, dr = r - c.row;
        best = std::min(best, dc * dc + dr * dr);
      }
  return best;
}

inline double brute_clearance(const PlannerView& v, double x, double y) {
  const auto c = v.world_to_grid(x, y);
  if (!c) return -1.0;
  return v.resolution() * std::sqrt(static_cast<double>(brute_dist2(v, *c))) - 0.5 * v.resolution();
}

struct Rescored {
  BaseVelocity cmd;
  double total;
};

// Re-scores every candidate with brute-force clearance and returns the argmax.
inline std::optional<BaseVelocity> oracle_dwa(const BaseState& s, const PlannerView& view, const GlobalPath& path,
                                       const DwaConfig& p, const VehicleConfig& veh) {
  const Eigen::Vector2d target = path_target(path, s.pose, p.path_lookahead_m);
  std::optional<Rescored> best;
  for (const auto& cmd : dynamic_window(s.velocity, p)) {
    const auto t = rollout(s.pose, cmd, p, veh);
    double mc = std::numeric_limits<double>::infinity();
    for (const auto& q : t.poses) mc = std::min(mc, brute_clearance(view, q.x, q.y));
    if (!(mc > p.footprint_radius_m)) continue;
    const auto& e = t.poses.back();
    const double h = 1.0 - std::abs(normalize_angle(std::atan2(target.y() - e.y, target.x() - e.x) - e.gamma)) / kPi;
    const double c = std::min(mc - p.footprint_radius_m, p.clearance_cap_m) / p.clearance_cap_m;
    const double vel = std::abs(cmd.v_x) / 0.5;
    const double total = p.w_heading * h + p.w_clearance * c + p.w_velocity * vel;
    const Rescored cand{cmd, total};
    auto wins = [](const Rescored& a, const Rescored& b) {
      if (a.total != b.total) return a.total > b.total;
      if (std::abs(a.cmd.v_gamma) != std::abs(b.cmd.v_gamma)) return std::abs(a.cmd.v_gamma) < std::abs(b.cmd.v_gamma);
      if (a.cmd.v_x != b.cmd.v_x) return a.cmd.v_x < b.cmd.v_x;
      return a.cmd.v_gamma < b.cmd.v_gamma;
    };
    if (!best || wins(cand, *best)) best = cand;
  }
  if (!best) return std::nullopt;
  return best->cmd;
}

}  // namespace unitele::planning::oracle
