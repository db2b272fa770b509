#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "escortsim/world.hpp"

namespace escortsim {

struct LidarConfig {
  static constexpr std::array<BodyKind, 3> channel_order{
      BodyKind::Escort, BodyKind::Payload, BodyKind::Obstacle};
  static constexpr std::size_t n_channels = channel_order.size();

  int n_rays{512};
  double max_range{8.0};
  int history_len{3};

  void validate() const;
  std::size_t frame_size() const { return n_channels * static_cast<std::size_t>(n_rays); }
  std::size_t flat_size() const { return frame_size() * static_cast<std::size_t>(history_len); }
  double ray_angle(int k) const;
  /// Channel slot of a body kind in channel_order.
  static std::size_t channel_of(BodyKind kind);
};

/// Normalized ranges (distance / max_range, 1.0 = no hit), one array per
/// channel in LidarConfig::channel_order.
struct LidarFrame {
  std::array<std::vector<double>, LidarConfig::n_channels> channels;

  static LidarFrame empty(int n_rays);
  std::span<const double> channel(BodyKind kind) const {
    return channels[LidarConfig::channel_of(kind)];
  }
  bool operator==(const LidarFrame&) const = default;
};

/// Distance along a unit ray from the origin to the first intersection with a
/// circle centred at `center`. Returns 0 when the origin is inside the circle
/// and +inf when the ray misses.
double ray_circle_distance(Vec2 direction, Vec2 center, double radius);

LidarFrame cast_rays(BodyId escort_id, const WorldState& world,
                     const LidarConfig& config, const ArenaConfig& arena);

class ObservationStack {
 public:
  ObservationStack() = default;
  /// History filled with copies of the initial frame.
  ObservationStack(const LidarFrame& initial, int history_len);

  void push(LidarFrame frame);
  std::size_t size() const { return frames_.size(); }
  const LidarFrame& operator[](std::size_t i) const { return frames_[i]; }
  const LidarFrame& oldest() const { return frames_.front(); }
  const LidarFrame& newest() const { return frames_.back(); }

 private:
  std::deque<LidarFrame> frames_;
};

/// Time-major layout: frame (oldest first), then channel, then ray.
std::vector<double> flatten(const ObservationStack& stack, const LidarConfig& config);

inline std::size_t flat_index(const LidarConfig& config, std::size_t frame,
                              std::size_t channel, std::size_t ray) {
  return frame * config.frame_size() + channel * static_cast<std::size_t>(config.n_rays) + ray;
}

}  // namespace escortsim
