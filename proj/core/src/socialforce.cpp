#include "escortsim/socialforce.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "escortsim/error.hpp"

namespace escortsim {

void SocialForceParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, std::string("social force: ") + what);
  };
  require(amplitude_V0 > 0.0, "amplitude_V0 must be > 0");
  require(range_sigma > 0.0, "range_sigma must be > 0");
  require(influence_radius > 0.0, "influence_radius must be > 0");
  require(vision_half_angle > 0.0 && vision_half_angle <= 180.0,
          "vision_half_angle must lie in (0, 180]");
  require(relaxation_tau > 0.0, "relaxation_tau must be > 0");
  require(ellipse_step_time > 0.0, "ellipse_step_time must be > 0");
  require(fluctuation_std >= 0.0, "fluctuation_std must be >= 0");
}

Vec2 driving_force(Vec2 current_velocity, Vec2 desired_direction, double desired_speed,
                   double tau) {
  return (desired_direction * desired_speed - current_velocity) / tau;
}

double ellipse_semi_minor(Vec2 r, Vec2 other_velocity, double step_time) {
  const Vec2 stride = other_velocity * step_time;
  const double focal_sum = r.norm() + (r - stride).norm();
  const double b2 = focal_sum * focal_sum - stride.squared_norm();
  return 0.5 * std::sqrt(std::max(b2, 0.0));
}

double repulsive_potential(Vec2 r, Vec2 other_velocity, const SocialForceParams& params) {
  const double b = ellipse_semi_minor(r, other_velocity, params.ellipse_step_time);
  return params.amplitude_V0 * std::exp(-b / params.range_sigma);
}

Vec2 repulsive_force(Vec2 self_pos, Vec2 self_heading, Vec2 other_pos, Vec2 other_velocity,
                     const SocialForceParams& params, const ArenaConfig& arena) {
  const Vec2 r = toroidal_delta(other_pos, self_pos, arena);
  const double dist = r.norm();
  if (dist == 0.0) {
    throw Error(ErrorCode::DegenerateGeometry, "social force between coincident positions");
  }
  if (dist > params.influence_radius) return {};

  const double cos_to_other = self_heading.dot(-r) / dist;
  const double cos_limit = std::cos(params.vision_half_angle * std::numbers::pi / 180.0);
  if (cos_to_other < cos_limit) return {};

  const Vec2 stride = other_velocity * params.ellipse_step_time;
  const Vec2 r_ahead = r - stride;
  const double dist_ahead = r_ahead.norm();
  const double focal_sum = dist + dist_ahead;
  const double b = 0.5 * std::sqrt(std::max(focal_sum * focal_sum - stride.squared_norm(), 0.0));
  // Self on the segment swept by the other body: the ellipse collapses and
  // the gradient has no defined direction.
  if (b <= 1e-12 || dist_ahead == 0.0) return {};

  const double dv_db = params.amplitude_V0 / params.range_sigma * std::exp(-b / params.range_sigma);
  const Vec2 dfocal = r / dist + r_ahead / dist_ahead;
  return dfocal * (dv_db * focal_sum / (4.0 * b));
}

Vec2 obstacle_heading(const Body& obstacle, const ObstacleIntent& intent) {
  if (obstacle.velocity.squared_norm() > 0.0) return obstacle.velocity.normalized();
  return intent.desired_direction.normalized();
}

ForceBreakdown total_force(BodyId obstacle_id, const WorldState& world,
                           const SocialForceParams& params, const ArenaConfig& arena, Rng& rng) {
  const Body* self = world.find(obstacle_id);
  if (self == nullptr || self->kind != BodyKind::Obstacle) {
    throw Error(ErrorCode::UnknownBody, "no obstacle with id " + std::to_string(obstacle_id));
  }
  auto intent_it = world.obstacle_intents.find(obstacle_id);
  if (intent_it == world.obstacle_intents.end()) {
    throw Error(ErrorCode::UnknownBody, "obstacle " + std::to_string(obstacle_id) + " has no intent");
  }
  const ObstacleIntent& intent = intent_it->second;
  const Vec2 heading = obstacle_heading(*self, intent);

  ForceBreakdown f;
  f.driving = driving_force(self->velocity, intent.desired_direction, intent.desired_speed,
                            params.relaxation_tau);
  for (const Body& other : world.bodies) {
    if (other.id == self->id) continue;
    switch (other.kind) {
      case BodyKind::Obstacle:
        f.repulsion_obstacles += repulsive_force(self->position, heading, other.position,
                                                 other.velocity, params, arena);
        break;
      case BodyKind::Escort:
        f.repulsion_escorts += repulsive_force(self->position, heading, other.position,
                                               other.velocity, params, arena);
        break;
      case BodyKind::Payload:
        if (params.payload_emits_force) {
          f.repulsion_escorts += repulsive_force(self->position, heading, other.position,
                                                 other.velocity, params, arena);
        }
        break;
    }
  }
  if (params.fluctuation_std > 0.0) {
    std::normal_distribution<double> noise(0.0, params.fluctuation_std);
    const double nx = noise(rng);
    const double ny = noise(rng);
    f.fluctuation = {nx, ny};
  }
  f.total = f.driving + f.repulsion_obstacles + f.repulsion_escorts + f.fluctuation;
  return f;
}

void step_obstacles(WorldState& world, const SocialForceParams& params, const ArenaConfig& arena,
                    Rng& rng, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  const std::uint64_t key = rng();

  std::vector<std::pair<std::size_t, Vec2>> updates;
  for (std::size_t i = 0; i < world.bodies.size(); ++i) {
    const Body& b = world.bodies[i];
    if (b.kind != BodyKind::Obstacle) continue;
    Rng local = make_rng(key, static_cast<std::uint64_t>(b.id));
    updates.emplace_back(i, total_force(b.id, world, params, arena, local).total);
  }
  for (const auto& [i, accel] : updates) {
    Body& b = world.bodies[i];
    b.velocity = clamp_norm(b.velocity + accel * dt, b.max_speed);
    b.position = wrap_position(b.position + b.velocity * dt, arena);
  }
}

}  // namespace escortsim
