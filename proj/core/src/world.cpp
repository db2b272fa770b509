#include "escortsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "escortsim/error.hpp"

namespace escortsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidConfig: return "config";
    case ErrorCode::CorruptAction: return "invalid_action";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::UnknownBody: return "unknown_body";
    case ErrorCode::OverDense: return "over_dense";
    case ErrorCode::ActionArity: return "arity";
    case ErrorCode::EpisodeDone: return "done";
    case ErrorCode::NoEpisode: return "no_episode";
    case ErrorCode::ShapeMismatch: return "shape";
    case ErrorCode::NonFiniteLoss: return "non_finite_loss";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

std::string_view to_string(BodyKind kind) {
  switch (kind) {
    case BodyKind::Payload: return "payload";
    case BodyKind::Escort: return "escort";
    case BodyKind::Obstacle: return "obstacle";
  }
  return "unknown";
}

std::optional<BodyKind> body_kind_from_string(std::string_view name) {
  if (name == "payload") return BodyKind::Payload;
  if (name == "escort") return BodyKind::Escort;
  if (name == "obstacle") return BodyKind::Obstacle;
  return std::nullopt;
}

const Body& WorldState::payload() const {
  auto it = std::find_if(bodies.begin(), bodies.end(),
                         [](const Body& b) { return b.kind == BodyKind::Payload; });
  if (it == bodies.end()) throw Error(ErrorCode::UnknownBody, "world has no payload");
  return *it;
}

Body& WorldState::payload() {
  return const_cast<Body&>(std::as_const(*this).payload());
}

const Body* WorldState::find(BodyId id) const {
  auto it = std::find_if(bodies.begin(), bodies.end(), [id](const Body& b) { return b.id == id; });
  return it == bodies.end() ? nullptr : &*it;
}

Body* WorldState::find(BodyId id) {
  return const_cast<Body*>(std::as_const(*this).find(id));
}

std::vector<BodyId> WorldState::ids_of(BodyKind kind) const {
  std::vector<BodyId> ids;
  for (const Body& b : bodies) {
    if (b.kind == kind) ids.push_back(b.id);
  }
  return ids;
}

std::size_t WorldState::count(BodyKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      bodies.begin(), bodies.end(), [kind](const Body& b) { return b.kind == kind; }));
}

namespace {

double wrap_coordinate(double v, double extent) {
  double r = std::fmod(v, extent);
  if (r < 0.0) r += extent;
  // -tiny + extent can round up to extent itself.
  if (r >= extent) r -= extent;
  return r;
}

double centered_coordinate(double d, double extent) {
  const double half = 0.5 * extent;
  double r = std::fmod(d + half, extent);
  if (r < 0.0) r += extent;
  if (r >= extent) r -= extent;
  return r - half;
}

}  // namespace

Vec2 wrap_position(Vec2 p, const ArenaConfig& arena) {
  return {wrap_coordinate(p.x, arena.width), wrap_coordinate(p.y, arena.height)};
}

Vec2 toroidal_delta(Vec2 from, Vec2 to, const ArenaConfig& arena) {
  return {centered_coordinate(to.x - from.x, arena.width),
          centered_coordinate(to.y - from.y, arena.height)};
}

Body integrate_body(const Body& b, Vec2 commanded_velocity, double dt, const ArenaConfig& arena) {
  if (!commanded_velocity.finite()) {
    throw Error(ErrorCode::CorruptAction,
                "non-finite velocity command for body " + std::to_string(b.id));
  }
  Body out = b;
  out.velocity = clamp_norm(commanded_velocity, b.max_speed);
  out.position = wrap_position(b.position + out.velocity * dt, arena);
  return out;
}

bool bodies_collide(const Body& a, const Body& b, const ArenaConfig& arena) {
  const double reach = a.radius + b.radius;
  return toroidal_delta(a.position, b.position, arena).squared_norm() < reach * reach;
}

}  // namespace escortsim
