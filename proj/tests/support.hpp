#pragma once

// Scene builders and brute-force oracles shared by the unit and acceptance
// tests. The oracles deliberately avoid the library's geometry helpers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "escortsim/episode.hpp"
#include "escortsim/world.hpp"

namespace escortsim::testing {

inline WorldState world_with_payload(Vec2 at = {25.0, 25.0}, Vec2 dir = {1.0, 0.0}) {
  WorldState w;
  w.bodies.push_back({0, BodyKind::Payload, at, {}, kPayloadRadius, kPayloadMaxSpeed});
  w.payload_start = at;
  w.payload_path_direction = dir;
  w.goal = at + dir * 20.0;
  w.next_id = 1;
  return w;
}

inline BodyId add_body(WorldState& w, BodyKind kind, Vec2 pos, Vec2 vel = {},
                       Vec2 desired = {1.0, 0.0}) {
  const BodyId id = w.next_id++;
  const double r = kind == BodyKind::Escort ? kEscortRadius : kObstacleRadius;
  const double vmax = kind == BodyKind::Escort ? kEscortMaxSpeed : kObstacleMaxSpeed;
  w.bodies.push_back({id, kind, pos, vel, r, vmax});
  if (kind == BodyKind::Obstacle) w.obstacle_intents[id] = {desired, kObstacleMaxSpeed};
  return id;
}

/// Smallest hit distance of a ray over the 9 periodic images of a circle,
/// found by marching in `step` increments. Returns +inf when nothing is hit
/// before max_range.
inline double march_ray(Vec2 origin, double angle, Vec2 center, double radius, double max_range,
                        double width, double height, double step = 1e-3) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const double cx = center.x + i * width - origin.x;
      const double cy = center.y + j * height - origin.y;
      if (cx * cx + cy * cy < radius * radius) return 0.0;
      const double along = cx * dx + cy * dy;
      if (along + radius < 0.0 || std::hypot(cx, cy) > max_range + radius) continue;
      // No sample before along - radius can be inside the circle.
      const long first = std::max(0L, static_cast<long>(std::floor((along - radius) / step)) - 1);
      const long last = static_cast<long>(std::ceil(std::min(max_range, along + radius) / step)) + 1;
      for (long k = first; k <= last; ++k) {
        const double t = static_cast<double>(k) * step;
        if (t > max_range) break;
        const double px = t * dx - cx;
        const double py = t * dy - cy;
        if (px * px + py * py <= radius * radius) {
          best = std::min(best, t);
          break;
        }
      }
    }
  }
  return best;
}

/// Elliptic repulsive potential written out from its definition, with the
/// relative position r = self - other given as components.
inline double potential_oracle(double rx, double ry, double vx, double vy, double v0, double sigma,
                               double step_time) {
  const double r = std::sqrt(rx * rx + ry * ry);
  const double sx = rx - vx * step_time, sy = ry - vy * step_time;
  const double s = std::sqrt(sx * sx + sy * sy);
  const double stride = std::sqrt(vx * vx + vy * vy) * step_time;
  const double b = 0.5 * std::sqrt((r + s) * (r + s) - stride * stride);
  return v0 * std::exp(-b / sigma);
}

/// Cordon penalty summed directly over obstacles with a hand-rolled
/// minimum-image distance.
inline double breach_oracle(const WorldState& w, double c, double cordon, double width, double height) {
  Vec2 p;
  for (const auto& b : w.bodies) {
    if (b.kind == BodyKind::Payload) p = b.position;
  }
  double sum = 0.0;
  for (const auto& b : w.bodies) {
    if (b.kind != BodyKind::Obstacle) continue;
    double dx = std::abs(b.position.x - p.x);
    double dy = std::abs(b.position.y - p.y);
    dx = std::min(dx, width - dx);
    dy = std::min(dy, height - dy);
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < cordon) sum += 1.0 - d / cordon;
  }
  return -c * sum;
}

/// Advantages straight from the definition: sum_l (gamma lambda)^l delta_{t+l},
/// stopping after the first terminal step.
inline std::vector<double> gae_double_sum(const std::vector<double>& r, const std::vector<double>& v,
                                          const std::vector<std::uint8_t>& done, double gamma,
                                          double lambda) {
  const std::size_t T = r.size();
  std::vector<double> delta(T);
  for (std::size_t t = 0; t < T; ++t) delta[t] = r[t] + gamma * (done[t] ? 0.0 : v[t + 1]) - v[t];
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double weight = 1.0;
    for (std::size_t l = t; l < T; ++l) {
      adv[t] += weight * delta[l];
      if (done[l]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace escortsim::testing
