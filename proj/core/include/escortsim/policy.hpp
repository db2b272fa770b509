#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "escortsim/network.hpp"
#include "escortsim/rng.hpp"
#include "escortsim/sensing.hpp"
#include "escortsim/world.hpp"

namespace escortsim {

enum class ActionMode { Stochastic, Deterministic };

/// What a policy sees at one step. `observations[i]` is the flattened stack
/// of escort `escort_ids[i]`. Baselines may also read the world (the neural
/// policy does not).
struct PolicyInput {
  std::span<const std::vector<double>> observations;
  std::span<const BodyId> escort_ids;
  const WorldState& world;
  const LidarConfig& lidar;
  const ArenaConfig& arena;
};

class Policy {
 public:
  virtual ~Policy() = default;
  /// One raw velocity command per escort; the environment clamps speed.
  virtual std::vector<Vec2> act(const PolicyInput& input, Rng& rng, ActionMode mode) = 0;
  virtual std::string name() const = 0;
};

Vec2 sample_action(const GaussianAction& ga, Rng& rng, ActionMode mode);

/// Diagonal Gaussian log density summed over both components.
double log_prob(const GaussianAction& ga, Vec2 action);

/// Escorts hold uniformly spaced stations (angle 2*pi*i/n, radius
/// ring_radius) around the payload's current position.
class StaticFormationPolicy final : public Policy {
 public:
  explicit StaticFormationPolicy(double ring_radius = 3.0, double gain = 2.0,
                                 double max_arc_step_deg = 30.0);

  static std::vector<Vec2> station_offsets(std::size_t n_escorts, double ring_radius);

  /// Proportional command for one escort toward its station. The target
  /// slides along the ring by at most max_arc_step per call so escorts never
  /// cut across the payload.
  Vec2 station_command(Vec2 escort_pos, Vec2 payload_pos, Vec2 station_offset,
                       const ArenaConfig& arena) const;

  std::vector<Vec2> act(const PolicyInput& input, Rng& rng, ActionMode mode) override;
  std::string name() const override { return "static"; }

  double ring_radius() const { return ring_radius_; }

 private:
  double ring_radius_;
  double gain_;
  double max_arc_step_;
};

/// Uniform random command in the disc of radius max_speed.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(double max_speed = kEscortMaxSpeed) : max_speed_(max_speed) {}
  std::vector<Vec2> act(const PolicyInput& input, Rng& rng, ActionMode mode) override;
  std::string name() const override { return "random"; }

 private:
  double max_speed_;
};

/// Each escort runs at max speed toward the nearest obstacle return (newest
/// frame) among rays pointing into the half-plane facing the payload, and
/// holds a radius-3 station otherwise.
class GreedyInterceptPolicy final : public Policy {
 public:
  explicit GreedyInterceptPolicy(double station_radius = 3.0,
                                 double max_speed = kEscortMaxSpeed);
  std::vector<Vec2> act(const PolicyInput& input, Rng& rng, ActionMode mode) override;
  std::string name() const override { return "greedy"; }

  /// Index of the selected ray, or -1 if no obstacle qualifies.
  static int select_ray(std::span<const double> obstacle_channel,
                        const LidarConfig& lidar, Vec2 toward_payload);

 private:
  StaticFormationPolicy station_;
  double max_speed_;
};

/// Shared-parameter Gaussian actor evaluated independently per escort.
class NeuralPolicy final : public Policy {
 public:
  explicit NeuralPolicy(std::shared_ptr<const NetworkParams> params);
  std::vector<Vec2> act(const PolicyInput& input, Rng& rng, ActionMode mode) override;
  std::string name() const override { return "neural"; }
  const NetworkParams& params() const { return *params_; }

 private:
  std::shared_ptr<const NetworkParams> params_;
};

}  // namespace escortsim
