#include "escortsim/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "escortsim/error.hpp"

namespace escortsim {

void LidarConfig::validate() const {
  if (n_rays < 4) throw Error(ErrorCode::InvalidConfig, "lidar: n_rays must be >= 4");
  if (!(max_range > 0.0)) throw Error(ErrorCode::InvalidConfig, "lidar: max_range must be > 0");
  if (history_len < 1) throw Error(ErrorCode::InvalidConfig, "lidar: history_len must be >= 1");
}

double LidarConfig::ray_angle(int k) const {
  return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_rays);
}

std::size_t LidarConfig::channel_of(BodyKind kind) {
  for (std::size_t i = 0; i < channel_order.size(); ++i) {
    if (channel_order[i] == kind) return i;
  }
  return 0;
}

LidarFrame LidarFrame::empty(int n_rays) {
  LidarFrame f;
  for (auto& ch : f.channels) ch.assign(static_cast<std::size_t>(n_rays), 1.0);
  return f;
}

double ray_circle_distance(Vec2 direction, Vec2 center, double radius) {
  const double c2 = center.squared_norm();
  const double r2 = radius * radius;
  if (c2 < r2) return 0.0;
  const double proj = direction.dot(center);
  if (proj < 0.0) return std::numeric_limits<double>::infinity();
  const double disc = r2 - (c2 - proj * proj);
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  return std::max(proj - std::sqrt(disc), 0.0);
}

namespace {

const std::vector<Vec2>& ray_directions(const LidarConfig& config) {
  thread_local std::vector<Vec2> dirs;
  thread_local int cached_n = -1;
  if (cached_n != config.n_rays) {
    dirs.resize(static_cast<std::size_t>(config.n_rays));
    for (int k = 0; k < config.n_rays; ++k) dirs[static_cast<std::size_t>(k)] = Vec2::from_angle(config.ray_angle(k));
    cached_n = config.n_rays;
  }
  return dirs;
}

}  // namespace

LidarFrame cast_rays(BodyId escort_id, const WorldState& world, const LidarConfig& config,
                     const ArenaConfig& arena) {
  const Body* self = world.find(escort_id);
  if (self == nullptr || self->kind != BodyKind::Escort) {
    throw Error(ErrorCode::UnknownBody, "no escort with id " + std::to_string(escort_id));
  }
  const auto& dirs = ray_directions(config);
  const int n = config.n_rays;
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  LidarFrame frame = LidarFrame::empty(n);

  for (const Body& other : world.bodies) {
    if (other.id == self->id) continue;
    auto& channel = frame.channels[LidarConfig::channel_of(other.kind)];
    const Vec2 c = toroidal_delta(self->position, other.position, arena);
    const double d = c.norm();
    if (d - other.radius > config.max_range) continue;
    if (d < other.radius) {
      std::fill(channel.begin(), channel.end(), 0.0);
      continue;
    }
    // Only rays inside the circle's angular footprint (padded by one ray on
    // each side) can hit it.
    const double half_width = d > 0.0 ? std::asin(std::min(other.radius / d, 1.0)) : std::numbers::pi;
    const double centre = std::atan2(c.y, c.x);
    const long lo = static_cast<long>(std::floor((centre - half_width) / step)) - 1;
    const long hi = std::min(static_cast<long>(std::ceil((centre + half_width) / step)) + 1, lo + n - 1);
    for (long k = lo; k <= hi; ++k) {
      const auto idx = static_cast<std::size_t>(((k % n) + n) % n);
      const double t = ray_circle_distance(dirs[idx], c, other.radius);
      if (t <= config.max_range) channel[idx] = std::min(channel[idx], t / config.max_range);
    }
  }
  return frame;
}

ObservationStack::ObservationStack(const LidarFrame& initial, int history_len) {
  for (int i = 0; i < history_len; ++i) frames_.push_back(initial);
}

void ObservationStack::push(LidarFrame frame) {
  if (frames_.empty()) return;
  frames_.pop_front();
  frames_.push_back(std::move(frame));
}

std::vector<double> flatten(const ObservationStack& stack, const LidarConfig& config) {
  std::vector<double> out;
  out.reserve(config.flat_size());
  for (std::size_t t = 0; t < stack.size(); ++t) {
    for (const auto& ch : stack[t].channels) out.insert(out.end(), ch.begin(), ch.end());
  }
  return out;
}

}  // namespace escortsim
