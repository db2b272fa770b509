#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "escortsim/vec2.hpp"

namespace escortsim {

struct ArenaConfig {
  double width{50.0};
  double height{50.0};
};

enum class BodyKind : std::uint8_t { Payload, Escort, Obstacle };

std::string_view to_string(BodyKind kind);
std::optional<BodyKind> body_kind_from_string(std::string_view name);

using BodyId = std::int64_t;

struct Body {
  BodyId id{0};
  BodyKind kind{BodyKind::Obstacle};
  Vec2 position;
  Vec2 velocity;
  double radius{0.5};
  double max_speed{1.0};
};

// Nominal body properties.
inline constexpr double kPayloadRadius = 1.5;
inline constexpr double kPayloadMaxSpeed = 0.25;
inline constexpr double kEscortRadius = 0.5;
inline constexpr double kEscortMaxSpeed = 3.0;
inline constexpr double kObstacleRadius = 0.5;
inline constexpr double kObstacleMaxSpeed = 1.0;

struct ObstacleIntent {
  Vec2 desired_direction{1.0, 0.0};
  double desired_speed{kObstacleMaxSpeed};
};

struct WorldState {
  int step_index{0};
  std::vector<Body> bodies;
  Vec2 goal;
  Vec2 payload_path_direction{1.0, 0.0};
  Vec2 payload_start;
  double payload_travel{0.0};
  std::map<BodyId, ObstacleIntent> obstacle_intents;
  BodyId next_id{0};

  const Body& payload() const;
  Body& payload();
  const Body* find(BodyId id) const;
  Body* find(BodyId id);
  std::vector<BodyId> ids_of(BodyKind kind) const;
  std::size_t count(BodyKind kind) const;
};

Vec2 wrap_position(Vec2 p, const ArenaConfig& arena);

/// Minimum-image displacement from `from` to `to`; each component lies in
/// [-extent/2, extent/2).
Vec2 toroidal_delta(Vec2 from, Vec2 to, const ArenaConfig& arena);

inline double toroidal_distance(Vec2 a, Vec2 b, const ArenaConfig& arena) {
  return toroidal_delta(a, b, arena).norm();
}

/// Explicit Euler step. The command is clamped to the body's max speed.
/// Throws Error(CorruptAction) on a non-finite command.
Body integrate_body(const Body& b, Vec2 commanded_velocity, double dt,
                    const ArenaConfig& arena);

/// Strict overlap test on the torus: touching bodies do not collide.
bool bodies_collide(const Body& a, const Body& b, const ArenaConfig& arena);

}  // namespace escortsim
