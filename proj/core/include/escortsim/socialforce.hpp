#pragma once

#include "escortsim/rng.hpp"
#include "escortsim/world.hpp"

namespace escortsim {

/// Obstacle motion model: driving term toward the desired velocity plus
/// elliptic exponential repulsion from neighbours inside a vision cone.
struct SocialForceParams {
  double amplitude_V0{7.8};        // m^2/s^2
  double range_sigma{0.3};         // m
  double influence_radius{5.0};    // m
  double vision_half_angle{100.0}; // degrees
  double relaxation_tau{0.7};      // s
  double ellipse_step_time{2.0};   // s
  double fluctuation_std{0.0};     // m/s^2
  bool payload_emits_force{false};

  /// Throws Error(InvalidConfig) when a field is out of range.
  void validate() const;
};

struct ForceBreakdown {
  Vec2 driving;
  Vec2 repulsion_obstacles;
  /// Escorts, and the payload when it emits force.
  Vec2 repulsion_escorts;
  Vec2 fluctuation;
  Vec2 total;
};

Vec2 driving_force(Vec2 current_velocity, Vec2 desired_direction,
                   double desired_speed, double tau);

/// Semi-minor axis b of the repulsion ellipse for relative position
/// r = self - other and the other body's velocity.
double ellipse_semi_minor(Vec2 r, Vec2 other_velocity, double step_time);

/// V(b) = V0 exp(-b / sigma). No cutoffs applied.
double repulsive_potential(Vec2 r, Vec2 other_velocity,
                           const SocialForceParams& params);

/// -grad_r V(b(r)) with the influence radius and vision cone cutoffs applied.
/// Throws Error(DegenerateGeometry) if the two positions coincide.
Vec2 repulsive_force(Vec2 self_pos, Vec2 self_heading, Vec2 other_pos,
                     Vec2 other_velocity, const SocialForceParams& params,
                     const ArenaConfig& arena);

/// Direction of motion used for the vision cone. A stationary obstacle looks
/// along its desired direction.
Vec2 obstacle_heading(const Body& obstacle, const ObstacleIntent& intent);

ForceBreakdown total_force(BodyId obstacle_id, const WorldState& world,
                           const SocialForceParams& params,
                           const ArenaConfig& arena, Rng& rng);

/// Synchronous update of every obstacle against the frozen pre-step world.
/// One key is drawn from `rng`; each obstacle's fluctuation stream is derived
/// from (key, obstacle id), so results do not depend on evaluation order.
void step_obstacles(WorldState& world, const SocialForceParams& params,
                    const ArenaConfig& arena, Rng& rng, double dt);

}  // namespace escortsim
