#include "escortsim/episode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "escortsim/error.hpp"
#include "escortsim/policy.hpp"

namespace escortsim {

namespace {

constexpr int kMaxPlacementAttempts = 10000;
constexpr double kEscortSpawnMin = 2.5;
constexpr double kEscortSpawnMax = 3.5;
constexpr double kObstacleSpawnClearance = 4.6;
constexpr double kPayloadMaxRadius = 2.5;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "episode config: " + what);
}

bool overlaps_any(const WorldState& world, const Body& candidate, const ArenaConfig& arena) {
  return std::any_of(world.bodies.begin(), world.bodies.end(),
                     [&](const Body& b) { return bodies_collide(b, candidate, arena); });
}

Body place_escort(const WorldState& world, Rng& rng, const ArenaConfig& arena) {
  const Vec2 centre = world.payload().position;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> radius(kEscortSpawnMin, kEscortSpawnMax);
  Body escort;
  escort.kind = BodyKind::Escort;
  escort.radius = kEscortRadius;
  escort.max_speed = kEscortMaxSpeed;
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    const double a = angle(rng);
    const double r = radius(rng);
    escort.position = wrap_position(centre + Vec2::from_angle(a) * r, arena);
    if (!overlaps_any(world, escort, arena)) return escort;
  }
  throw Error(ErrorCode::OverDense, "could not place escort around the payload");
}

}  // namespace

std::string to_string(const Event& event) {
  switch (event.kind) {
    case EventKind::None: return "none";
    case EventKind::Goal: return "goal";
    case EventKind::Collision:
      return "collision:" + std::string(to_string(event.first)) + "-" +
             std::string(to_string(event.second));
  }
  return "none";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Goal: return "goal";
    case Termination::Collision: return "collision";
    case Termination::StepCap: return "step_cap";
  }
  return "step_cap";
}

void EpisodeConfig::validate() const {
  if (n_escorts < 0) config_error("n_escorts must be >= 0");
  if (n_obstacles < 0) config_error("n_obstacles must be >= 0");
  if (!(goal_distance > 0.0)) config_error("goal_distance must be > 0");
  if (!(payload_speed > 0.0)) config_error("payload_speed must be > 0");
  if (!(dt > 0.0)) config_error("dt must be > 0");
  if (max_steps < 1) config_error("max_steps must be >= 1");
  if (!(reward.cordon_radius > kPayloadRadius)) config_error("cordon_radius must exceed the payload radius");
  if (!(transform_frequency >= 0.0)) config_error("transform_frequency must be >= 0");
  if (!(arena.width > 0.0) || !(arena.height > 0.0)) config_error("arena dimensions must be > 0");
  for (const auto& e : escort_schedule) {
    if (e.step < 1) config_error("escort_schedule steps must be >= 1");
  }
  lidar.validate();
  sf.validate();
}

int EpisodeConfig::goal_horizon() const {
  return static_cast<int>(std::ceil(goal_distance / (payload_speed * dt) - 1e-9));
}

double payload_radius(double t, double transform_frequency) {
  if (transform_frequency <= 0.0) return kPayloadRadius;
  const double phase = std::fmod(t * transform_frequency, 2.0);
  const double tri = phase <= 1.0 ? phase : 2.0 - phase;
  return kPayloadRadius + (kPayloadMaxRadius - kPayloadRadius) * tri;
}

WorldState spawn(const EpisodeConfig& config, Rng& rng) {
  config.validate();
  const ArenaConfig& arena = config.arena;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  WorldState world;
  Body payload;
  payload.id = world.next_id++;
  payload.kind = BodyKind::Payload;
  payload.position = {0.5 * arena.width, 0.5 * arena.height};
  payload.radius = payload_radius(0.0, config.transform_frequency);
  payload.max_speed = config.payload_speed;
  world.payload_path_direction = Vec2::from_angle(angle(rng));
  world.payload_start = payload.position;
  world.goal = wrap_position(payload.position + world.payload_path_direction * config.goal_distance, arena);
  payload.velocity = world.payload_path_direction * config.payload_speed;
  world.bodies.push_back(payload);

  for (int i = 0; i < config.n_escorts; ++i) {
    Body escort = place_escort(world, rng, arena);
    escort.id = world.next_id++;
    world.bodies.push_back(escort);
  }

  std::uniform_real_distribution<double> ux(0.0, arena.width);
  std::uniform_real_distribution<double> uy(0.0, arena.height);
  for (int i = 0; i < config.n_obstacles; ++i) {
    Body obstacle;
    obstacle.kind = BodyKind::Obstacle;
    obstacle.radius = kObstacleRadius;
    obstacle.max_speed = kObstacleMaxSpeed;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      obstacle.position = wrap_position({ux(rng), uy(rng)}, arena);
      placed = toroidal_distance(obstacle.position, payload.position, arena) >= kObstacleSpawnClearance &&
               !overlaps_any(world, obstacle, arena);
    }
    if (!placed) throw Error(ErrorCode::OverDense, "could not place obstacle " + std::to_string(i));
    ObstacleIntent intent;
    intent.desired_direction = Vec2::from_angle(angle(rng));
    intent.desired_speed = obstacle.max_speed;
    obstacle.velocity = intent.desired_direction * intent.desired_speed;
    obstacle.id = world.next_id++;
    world.obstacle_intents[obstacle.id] = intent;
    world.bodies.push_back(obstacle);
  }
  return world;
}

double breach_penalty(const WorldState& world, const RewardWeights& weights, const ArenaConfig& arena) {
  const Vec2 centre = world.payload().position;
  double sum = 0.0;
  for (const Body& b : world.bodies) {
    if (b.kind != BodyKind::Obstacle) continue;
    const double d = toroidal_distance(centre, b.position, arena);
    if (d < weights.cordon_radius) sum += 1.0 - d / weights.cordon_radius;
  }
  return -weights.breach_c * sum;
}

int breach_count(const WorldState& world, const RewardWeights& weights, const ArenaConfig& arena) {
  const Vec2 centre = world.payload().position;
  int n = 0;
  for (const Body& b : world.bodies) {
    if (b.kind == BodyKind::Obstacle && toroidal_distance(centre, b.position, arena) < weights.cordon_radius) ++n;
  }
  return n;
}

double compute_reward(const WorldState& /*pre_world*/, const WorldState& post_world,
                      const Event& event, const RewardWeights& weights, const ArenaConfig& arena) {
  const double goal = event.kind == EventKind::Goal ? weights.r_goal : 0.0;
  const double collision = event.kind == EventKind::Collision ? weights.r_collision : 0.0;
  const double cordon = breach_penalty(post_world, weights, arena);
  return weights.phi[0] * goal + weights.phi[1] * collision + weights.phi[2] * cordon +
         weights.phi[3] * weights.r_step;
}

Event detect_collision(const WorldState& world, const ArenaConfig& arena) {
  const Body& payload = world.payload();
  for (const Body& b : world.bodies) {
    if (b.kind == BodyKind::Obstacle && bodies_collide(payload, b, arena))
      return Event::collision(BodyKind::Payload, BodyKind::Obstacle);
  }
  for (const Body& b : world.bodies) {
    if (b.kind == BodyKind::Escort && bodies_collide(payload, b, arena))
      return Event::collision(BodyKind::Payload, BodyKind::Escort);
  }
  for (const Body& e : world.bodies) {
    if (e.kind != BodyKind::Escort) continue;
    for (const Body& o : world.bodies) {
      if (o.kind == BodyKind::Obstacle && bodies_collide(e, o, arena))
        return Event::collision(BodyKind::Escort, BodyKind::Obstacle);
    }
  }
  return Event::none();
}

void add_remove_escorts(WorldState& world, int delta, Rng& rng, const ArenaConfig& arena) {
  for (; delta < 0; ++delta) {
    std::vector<std::size_t> escorts;
    for (std::size_t i = 0; i < world.bodies.size(); ++i) {
      if (world.bodies[i].kind == BodyKind::Escort) escorts.push_back(i);
    }
    if (escorts.empty()) throw Error(ErrorCode::InvalidArgument, "no escort left to remove");
    std::uniform_int_distribution<std::size_t> pick(0, escorts.size() - 1);
    world.bodies.erase(world.bodies.begin() + static_cast<std::ptrdiff_t>(escorts[pick(rng)]));
  }
  for (; delta > 0; --delta) {
    Body escort = place_escort(world, rng, arena);
    escort.id = world.next_id++;
    world.bodies.push_back(escort);
  }
}

Episode::Episode(EpisodeConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed), rng_(mix_seed(seed, 0x5eed)) {
  config_.validate();
}

const StepOutcome& Episode::reset() {
  rng_ = Rng(mix_seed(seed_, 0x5eed));
  world_ = spawn(config_, rng_);
  started_ = true;
  last_ = StepOutcome{};
  last_.breach_count = breach_count(world_, config_.reward, config_.arena);
  refresh_escort_set(true);
  observe(last_);
  return last_;
}

void Episode::set_world(WorldState world) {
  world_ = std::move(world);
  started_ = true;
  refresh_escort_set(true);
  last_.done = false;
  last_.step_index = world_.step_index;
  observe(last_);
}

void Episode::refresh_escort_set(bool reset_all) {
  escort_ids_ = world_.ids_of(BodyKind::Escort);
  if (reset_all) stacks_.clear();
  std::erase_if(stacks_, [&](const auto& kv) {
    return std::find(escort_ids_.begin(), escort_ids_.end(), kv.first) == escort_ids_.end();
  });
  for (BodyId id : escort_ids_) {
    if (!stacks_.contains(id)) {
      stacks_.emplace(id, ObservationStack(cast_rays(id, world_, config_.lidar, config_.arena),
                                           config_.lidar.history_len));
    }
  }
}

void Episode::observe(StepOutcome& out) {
  out.step_index = world_.step_index;
  out.escort_ids = escort_ids_;
  out.observations.clear();
  out.observations.reserve(escort_ids_.size());
  for (BodyId id : escort_ids_) out.observations.push_back(flatten(stacks_.at(id), config_.lidar));
}

const StepOutcome& Episode::add_remove_escorts(int delta) {
  if (!started_) throw Error(ErrorCode::NoEpisode, "episode not reset");
  escortsim::add_remove_escorts(world_, delta, rng_, config_.arena);
  refresh_escort_set(false);
  observe(last_);
  return last_;
}

StepOutcome Episode::step(std::span<const Vec2> actions) {
  if (!started_) throw Error(ErrorCode::NoEpisode, "episode not reset");
  if (last_.done) throw Error(ErrorCode::EpisodeDone, "episode is done");
  if (actions.size() != escort_ids_.size()) {
    throw Error(ErrorCode::ActionArity, "expected " + std::to_string(escort_ids_.size()) +
                                            " actions, got " + std::to_string(actions.size()));
  }
  for (const Vec2& a : actions) {
    if (!a.finite()) throw Error(ErrorCode::CorruptAction, "non-finite action");
  }

  const WorldState pre = world_;
  const ArenaConfig& arena = config_.arena;
  const int k = world_.step_index + 1;

  for (std::size_t i = 0; i < escort_ids_.size(); ++i) {
    Body* escort = world_.find(escort_ids_[i]);
    *escort = integrate_body(*escort, actions[i], config_.dt, arena);
  }

  Body& payload = world_.payload();
  world_.payload_travel = std::min(static_cast<double>(k) * config_.payload_speed * config_.dt,
                                   config_.goal_distance);
  payload.position = wrap_position(world_.payload_start + world_.payload_path_direction * world_.payload_travel, arena);
  payload.radius = payload_radius(static_cast<double>(k) * config_.dt, config_.transform_frequency);

  step_obstacles(world_, config_.sf, arena, rng_, config_.dt);
  world_.step_index = k;

  StepOutcome out;
  out.event = detect_collision(world_, arena);
  const bool arrived = world_.payload_travel >= config_.goal_distance * (1.0 - 1e-12);
  if (out.event.kind == EventKind::None && arrived) out.event = Event::goal();
  out.breach_count = breach_count(world_, config_.reward, arena);
  out.breach_reward = breach_penalty(world_, config_.reward, arena);
  out.reward = compute_reward(pre, world_, out.event, config_.reward, arena);
  out.done = out.event.kind != EventKind::None || k >= config_.max_steps;

  bool changed = false;
  if (!out.done) {
    for (const auto& entry : config_.escort_schedule) {
      if (entry.step == k && entry.delta != 0) {
        escortsim::add_remove_escorts(world_, entry.delta, rng_, arena);
        changed = true;
      }
    }
  }
  if (changed) {
    escort_ids_ = world_.ids_of(BodyKind::Escort);
    std::erase_if(stacks_, [&](const auto& kv) {
      return std::find(escort_ids_.begin(), escort_ids_.end(), kv.first) == escort_ids_.end();
    });
  }
  for (BodyId id : escort_ids_) {
    LidarFrame frame = cast_rays(id, world_, config_.lidar, arena);
    auto it = stacks_.find(id);
    if (it == stacks_.end()) {
      stacks_.emplace(id, ObservationStack(frame, config_.lidar.history_len));
    } else {
      it->second.push(std::move(frame));
    }
  }
  observe(out);
  last_ = out;
  return out;
}

EpisodeResult run_episode(const EpisodeConfig& config, Policy& policy, std::uint64_t seed,
                          ActionMode mode, const StepObserver& observer) {
  Episode episode(config, seed);
  Rng policy_rng(mix_seed(seed, 0xac7));
  StepOutcome out = episode.reset();
  if (observer) observer(episode, out);

  EpisodeResult result;
  int breached_steps = 0;
  while (!out.done) {
    const PolicyInput input{out.observations, out.escort_ids, episode.world(), config.lidar, config.arena};
    const std::vector<Vec2> actions = policy.act(input, policy_rng, mode);
    out = episode.step(actions);
    if (observer) observer(episode, out);
    ++result.steps;
    if (out.breach_count >= 1) ++breached_steps;
    result.cumulative_reward += out.reward;
  }
  switch (out.event.kind) {
    case EventKind::Goal: result.termination = Termination::Goal; break;
    case EventKind::Collision: result.termination = Termination::Collision; break;
    case EventKind::None: result.termination = Termination::StepCap; break;
  }
  result.success = result.termination == Termination::Goal;
  result.breach_fraction = result.steps > 0 ? static_cast<double>(breached_steps) / result.steps : 0.0;
  return result;
}

}  // namespace escortsim
