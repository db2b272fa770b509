#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "escortsim/rng.hpp"
#include "escortsim/sensing.hpp"
#include "escortsim/socialforce.hpp"
#include "escortsim/world.hpp"

namespace escortsim {

struct RewardWeights {
  /// Weights for [goal, collision, cordon, step].
  std::array<double, 4> phi{1.0, 1.0, 1.0, 1.0};
  double r_goal{1.0};
  double r_collision{-1.0};
  double r_step{0.01};
  double breach_c{0.05};
  double cordon_radius{5.0};
};

/// Escort count change applied right after the given step completes.
struct EscortScheduleEntry {
  int step{0};
  int delta{0};
};

struct EpisodeConfig {
  int n_escorts{3};
  int n_obstacles{30};
  double goal_distance{20.0};
  double payload_speed{0.25};
  double dt{0.2};
  int max_steps{500};
  RewardWeights reward;
  LidarConfig lidar;
  SocialForceParams sf;
  double transform_frequency{0.0};
  ArenaConfig arena;
  std::uint64_t seed{0};
  std::vector<EscortScheduleEntry> escort_schedule;

  void validate() const;
  /// Steps needed for the payload to cover goal_distance.
  int goal_horizon() const;
};

enum class EventKind { None, Goal, Collision };

struct Event {
  EventKind kind{EventKind::None};
  // Colliding kinds, meaningful for Collision only.
  BodyKind first{BodyKind::Payload};
  BodyKind second{BodyKind::Obstacle};

  static Event none() { return {}; }
  static Event goal() { return {EventKind::Goal, BodyKind::Payload, BodyKind::Payload}; }
  static Event collision(BodyKind a, BodyKind b) { return {EventKind::Collision, a, b}; }
  bool operator==(const Event&) const = default;
};

/// "none", "goal", or "collision:<kind>-<kind>".
std::string to_string(const Event& event);

struct StepOutcome {
  int step_index{0};
  std::vector<BodyId> escort_ids;
  std::vector<std::vector<double>> observations;
  double reward{0.0};
  /// Cordon component of the reward before phi weighting.
  double breach_reward{0.0};
  bool done{false};
  Event event;
  int breach_count{0};
};

enum class Termination { Goal, Collision, StepCap };
std::string_view to_string(Termination t);

struct EpisodeResult {
  bool success{false};
  int steps{0};
  double breach_fraction{0.0};
  double cumulative_reward{0.0};
  Termination termination{Termination::StepCap};
};

/// Triangle wave between 1.5 m and 2.5 m; each monotone segment lasts
/// 1/frequency seconds. Constant 1.5 m for frequency 0.
double payload_radius(double t, double transform_frequency);

WorldState spawn(const EpisodeConfig& config, Rng& rng);

/// Cordon breach term: -c * sum over obstacles inside the cordon of
/// (1 - d / S_cordon), d measured between centres on the torus.
double breach_penalty(const WorldState& world, const RewardWeights& weights,
                      const ArenaConfig& arena);
int breach_count(const WorldState& world, const RewardWeights& weights,
                 const ArenaConfig& arena);

double compute_reward(const WorldState& pre_world, const WorldState& post_world,
                      const Event& event, const RewardWeights& weights,
                      const ArenaConfig& arena);

/// First cross-type overlap in the fixed order payload-obstacle,
/// payload-escort, escort-obstacle; Event::none() if there is none.
Event detect_collision(const WorldState& world, const ArenaConfig& arena);

/// Removes uniformly chosen escorts (delta < 0) or spawns new ones on the
/// annulus around the payload (delta > 0). Throws when removing more escorts
/// than exist or when placement fails.
void add_remove_escorts(WorldState& world, int delta, Rng& rng,
                        const ArenaConfig& arena);

/// A single-owner POMDP episode.
class Episode {
 public:
  Episode(EpisodeConfig config, std::uint64_t seed);

  /// Spawns a fresh world and returns the initial observations (reward 0).
  const StepOutcome& reset();
  StepOutcome step(std::span<const Vec2> actions);
  /// Changes the escort count immediately and refreshes observations.
  const StepOutcome& add_remove_escorts(int delta);

  const WorldState& world() const { return world_; }
  const EpisodeConfig& config() const { return config_; }
  const StepOutcome& last_outcome() const { return last_; }
  bool done() const { return last_.done; }
  std::size_t n_escorts() const { return escort_ids_.size(); }

  /// Test hook: replaces the world between steps.
  void set_world(WorldState world);

 private:
  void refresh_escort_set(bool reset_all);
  void observe(StepOutcome& out);

  EpisodeConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  WorldState world_;
  std::vector<BodyId> escort_ids_;
  std::map<BodyId, ObservationStack> stacks_;
  StepOutcome last_;
  bool started_{false};
};

class Policy;
enum class ActionMode;

using StepObserver = std::function<void(const Episode&, const StepOutcome&)>;

/// Runs reset/step until done. `observer`, if set, sees every outcome after
/// reset and after each step.
EpisodeResult run_episode(const EpisodeConfig& config, Policy& policy,
                          std::uint64_t seed, ActionMode mode,
                          const StepObserver& observer = {});

}  // namespace escortsim
