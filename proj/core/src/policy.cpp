#include "escortsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "escortsim/error.hpp"

namespace escortsim {

Vec2 sample_action(const GaussianAction& ga, Rng& rng, ActionMode mode) {
  if (mode == ActionMode::Deterministic) return ga.mean;
  std::normal_distribution<double> z(0.0, 1.0);
  const double zx = z(rng);
  const double zy = z(rng);
  return {ga.mean.x + ga.std.x * zx, ga.mean.y + ga.std.y * zy};
}

double log_prob(const GaussianAction& ga, Vec2 action) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double ux = (action.x - ga.mean.x) / ga.std.x;
  const double uy = (action.y - ga.mean.y) / ga.std.y;
  return -0.5 * (ux * ux + uy * uy) - std::log(ga.std.x) - std::log(ga.std.y) - 2.0 * kHalfLog2Pi;
}

StaticFormationPolicy::StaticFormationPolicy(double ring_radius, double gain, double max_arc_step_deg)
    : ring_radius_(ring_radius), gain_(gain), max_arc_step_(max_arc_step_deg * std::numbers::pi / 180.0) {
  if (!(ring_radius > 0.0) || !(gain > 0.0) || !(max_arc_step_ > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "static formation needs positive radius, gain and arc step");
  }
}

std::vector<Vec2> StaticFormationPolicy::station_offsets(std::size_t n_escorts, double ring_radius) {
  std::vector<Vec2> out;
  out.reserve(n_escorts);
  for (std::size_t i = 0; i < n_escorts; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_escorts);
    out.push_back(Vec2::from_angle(angle) * ring_radius);
  }
  return out;
}

Vec2 StaticFormationPolicy::station_command(Vec2 escort_pos, Vec2 payload_pos, Vec2 station_offset,
                                            const ArenaConfig& arena) const {
  const Vec2 rel = toroidal_delta(payload_pos, escort_pos, arena);
  const double here = std::atan2(rel.y, rel.x);
  const double there = std::atan2(station_offset.y, station_offset.x);
  const double gap = std::remainder(there - here, 2.0 * std::numbers::pi);
  Vec2 carrot = station_offset;
  if (std::abs(gap) > max_arc_step_) {
    carrot = Vec2::from_angle(here + std::copysign(max_arc_step_, gap)) * station_offset.norm();
  }
  return clamp_norm((carrot - rel) * gain_, kEscortMaxSpeed);
}

std::vector<Vec2> StaticFormationPolicy::act(const PolicyInput& input, Rng&, ActionMode) {
  const Vec2 payload = input.world.payload().position;
  const auto offsets = station_offsets(input.escort_ids.size(), ring_radius_);
  std::vector<Vec2> out;
  out.reserve(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const Body* escort = input.world.find(input.escort_ids[i]);
    if (escort == nullptr) throw Error(ErrorCode::UnknownBody, "policy input names a missing escort");
    out.push_back(station_command(escort->position, payload, offsets[i], input.arena));
  }
  return out;
}

std::vector<Vec2> RandomPolicy::act(const PolicyInput& input, Rng& rng, ActionMode) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> out;
  out.reserve(input.escort_ids.size());
  for (std::size_t i = 0; i < input.escort_ids.size(); ++i) {
    const double r = max_speed_ * std::sqrt(u(rng));
    const double a = 2.0 * std::numbers::pi * u(rng);
    out.push_back(Vec2::from_angle(a) * r);
  }
  return out;
}

GreedyInterceptPolicy::GreedyInterceptPolicy(double station_radius, double max_speed)
    : station_(station_radius), max_speed_(max_speed) {}

int GreedyInterceptPolicy::select_ray(std::span<const double> obstacle_channel, const LidarConfig& lidar,
                                      Vec2 toward_payload) {
  int best = -1;
  double best_reading = 1.0;
  for (int k = 0; k < lidar.n_rays; ++k) {
    const double reading = obstacle_channel[static_cast<std::size_t>(k)];
    if (reading >= best_reading) continue;
    if (Vec2::from_angle(lidar.ray_angle(k)).dot(toward_payload) < 0.0) continue;
    best = k;
    best_reading = reading;
  }
  return best;
}

std::vector<Vec2> GreedyInterceptPolicy::act(const PolicyInput& input, Rng&, ActionMode) {
  const Vec2 payload = input.world.payload().position;
  const Vec2 station = StaticFormationPolicy::station_offsets(1, station_.ring_radius()).front();
  const std::size_t newest = static_cast<std::size_t>(input.lidar.history_len - 1);
  const std::size_t offset = flat_index(input.lidar, newest, LidarConfig::channel_of(BodyKind::Obstacle), 0);
  std::vector<Vec2> out;
  out.reserve(input.escort_ids.size());
  for (std::size_t i = 0; i < input.escort_ids.size(); ++i) {
    const Body* escort = input.world.find(input.escort_ids[i]);
    if (escort == nullptr) throw Error(ErrorCode::UnknownBody, "policy input names a missing escort");
    const auto& obs = input.observations[i];
    if (obs.size() != input.lidar.flat_size()) {
      throw Error(ErrorCode::ShapeMismatch, "greedy policy got an observation of the wrong length");
    }
    const std::span<const double> channel(obs.data() + offset, static_cast<std::size_t>(input.lidar.n_rays));
    const Vec2 toward = toroidal_delta(escort->position, payload, input.arena);
    const int k = select_ray(channel, input.lidar, toward);
    if (k >= 0) {
      out.push_back(Vec2::from_angle(input.lidar.ray_angle(k)) * max_speed_);
    } else {
      out.push_back(station_.station_command(escort->position, payload, station, input.arena));
    }
  }
  return out;
}

NeuralPolicy::NeuralPolicy(std::shared_ptr<const NetworkParams> params) : params_(std::move(params)) {
  if (!params_) throw Error(ErrorCode::InvalidArgument, "neural policy needs parameters");
}

std::vector<Vec2> NeuralPolicy::act(const PolicyInput& input, Rng& rng, ActionMode mode) {
  std::vector<Vec2> out;
  if (input.observations.empty()) return out;
  const RowMatrix batch = stack_observations(*params_, input.observations);
  for (const GaussianAction& ga : forward_actor_batch(*params_, batch)) {
    out.push_back(sample_action(ga, rng, mode));
  }
  return out;
}

}  // namespace escortsim
