#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "escortsim/error.hpp"
#include "escortsim/episode.hpp"
#include "escortsim/policy.hpp"
#include "support.hpp"

using namespace escortsim;
using escortsim::testing::add_body;
using escortsim::testing::breach_oracle;
using escortsim::testing::world_with_payload;

namespace {

const ArenaConfig arena;

class RamPayload final : public Policy {
 public:
  std::vector<Vec2> act(const PolicyInput& in, Rng&, ActionMode) override {
    std::vector<Vec2> out;
    for (BodyId id : in.escort_ids) {
      out.push_back(toroidal_delta(in.world.find(id)->position, in.world.payload().position, in.arena) * 10.0);
    }
    return out;
  }
  std::string name() const override { return "ram"; }
};

std::vector<Vec2> zeros(std::size_t n) { return std::vector<Vec2>(n, Vec2{0, 0}); }

}  // namespace

TEST(Spawn, Constraints) {
  EpisodeConfig cfg;
  cfg.n_escorts = 6;
  cfg.n_obstacles = 60;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const WorldState w = spawn(cfg, rng);
    const Body& p = w.payload();
    ASSERT_EQ(p.position, (Vec2{25, 25}));
    ASSERT_EQ(w.count(BodyKind::Payload), 1u);
    ASSERT_EQ(w.count(BodyKind::Escort), 6u);
    ASSERT_EQ(w.count(BodyKind::Obstacle), 60u);
    ASSERT_NEAR(toroidal_distance(p.position, w.goal, arena), 20.0, 1e-12);
    ASSERT_NEAR(w.payload_path_direction.norm(), 1.0, 1e-15);
    ASSERT_EQ(w.obstacle_intents.size(), 60u);
    for (const Body& b : w.bodies) {
      const double d = toroidal_distance(p.position, b.position, arena);
      if (b.kind == BodyKind::Escort) {
        ASSERT_GE(d, 2.5);
        ASSERT_LE(d, 3.5);
      }
      if (b.kind == BodyKind::Obstacle) {
        ASSERT_GE(d, 4.6);
        ASSERT_TRUE(w.obstacle_intents.contains(b.id));
        ASSERT_NEAR(w.obstacle_intents.at(b.id).desired_direction.norm(), 1.0, 1e-12);
        ASSERT_EQ(w.obstacle_intents.at(b.id).desired_speed, b.max_speed);
      }
      for (const Body& o : w.bodies) {
        if (o.id == b.id) continue;
        const bool both_escorts = b.kind == BodyKind::Escort && o.kind == BodyKind::Escort;
        if (b.kind == BodyKind::Obstacle || o.kind == BodyKind::Obstacle || both_escorts) {
          ASSERT_FALSE(bodies_collide(b, o, arena)) << b.id << " vs " << o.id;
        }
      }
    }
  }
}

TEST(Spawn, OverDenseFails) {
  EpisodeConfig cfg;
  cfg.n_obstacles = 5000;
  Rng rng(1);
  try {
    spawn(cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverDense);
  }
}

TEST(PayloadRadius, Wave) {
  EXPECT_EQ(payload_radius(0.0, 0.0), 1.5);
  EXPECT_EQ(payload_radius(17.3, 0.0), 1.5);
  EXPECT_NEAR(payload_radius(2.0, 0.5), 2.5, 1e-12);
  EXPECT_NEAR(payload_radius(4.0, 0.5), 1.5, 1e-12);
  EXPECT_NEAR(payload_radius(1.0, 0.5), 2.0, 1e-12);
  EXPECT_NEAR(payload_radius(3.0, 0.5), 2.0, 1e-12);
  for (double t = 0; t < 20; t += 0.01) {
    const double r = payload_radius(t, 1.3);
    ASSERT_GE(r, 1.5);
    ASSERT_LE(r, 2.5);
  }
}

TEST(Reward, Examples) {
  const RewardWeights w;
  WorldState world = world_with_payload({25, 25});
  add_body(world, BodyKind::Obstacle, {27.5, 25});
  EXPECT_NEAR(compute_reward(world, world, Event::none(), w, arena), -0.015, 1e-12);

  const WorldState empty = world_with_payload({25, 25});
  EXPECT_NEAR(compute_reward(empty, empty, Event::goal(), w, arena), 1.01, 1e-12);
  EXPECT_NEAR(compute_reward(empty, empty, Event::collision(BodyKind::Payload, BodyKind::Obstacle), w, arena),
              -0.99, 1e-12);
}

TEST(Reward, PhiWeights) {
  RewardWeights w;
  w.phi = {2.0, 3.0, 0.0, 0.5};
  const WorldState empty = world_with_payload({25, 25});
  EXPECT_NEAR(compute_reward(empty, empty, Event::goal(), w, arena), 2.0 + 0.005, 1e-12);
  WorldState world = world_with_payload({25, 25});
  add_body(world, BodyKind::Obstacle, {26, 25});
  EXPECT_NEAR(compute_reward(world, world, Event::none(), w, arena), 0.005, 1e-12);
}

TEST(Breach, CountsAndOracle) {
  const RewardWeights w;
  WorldState world = world_with_payload({1, 1});
  add_body(world, BodyKind::Obstacle, {49, 1});    // 2 m across the seam
  add_body(world, BodyKind::Obstacle, {1, 6.0});   // exactly on the cordon: outside
  add_body(world, BodyKind::Obstacle, {10, 10});
  EXPECT_EQ(breach_count(world, w, arena), 1);
  EXPECT_NEAR(breach_penalty(world, w, arena), -0.05 * (1 - 2.0 / 5.0), 1e-15);
  EXPECT_NEAR(breach_penalty(world, w, arena), breach_oracle(world, 0.05, 5.0, 50, 50), 1e-15);
}

TEST(Collision, OrderAndKinds) {
  WorldState w = world_with_payload({25, 25});
  EXPECT_EQ(detect_collision(w, arena), Event::none());
  add_body(w, BodyKind::Escort, {31, 25});
  add_body(w, BodyKind::Obstacle, {31.5, 25});
  EXPECT_EQ(detect_collision(w, arena), Event::collision(BodyKind::Escort, BodyKind::Obstacle));
  add_body(w, BodyKind::Escort, {26.5, 25});
  EXPECT_EQ(detect_collision(w, arena), Event::collision(BodyKind::Payload, BodyKind::Escort));
  add_body(w, BodyKind::Obstacle, {25, 26.5});
  EXPECT_EQ(detect_collision(w, arena), Event::collision(BodyKind::Payload, BodyKind::Obstacle));
  EXPECT_EQ(to_string(detect_collision(w, arena)), "collision:payload-obstacle");
}

TEST(Collision, EscortsMayOverlap) {
  WorldState w = world_with_payload({25, 25});
  add_body(w, BodyKind::Escort, {31, 25});
  add_body(w, BodyKind::Escort, {31.2, 25});
  EXPECT_EQ(detect_collision(w, arena), Event::none());
}

TEST(Step, ZeroObstaclesReachGoalAt400) {
  EpisodeConfig cfg;
  cfg.n_obstacles = 0;
  EXPECT_EQ(cfg.goal_horizon(), 400);
  for (int k = 0; k <= 6; ++k) {
    cfg.n_escorts = k;
    StaticFormationPolicy policy;
    const EpisodeResult r = run_episode(cfg, policy, 100 + k, ActionMode::Deterministic);
    EXPECT_TRUE(r.success) << k;
    EXPECT_EQ(r.steps, 400) << k;
    EXPECT_EQ(r.breach_fraction, 0.0);
    EXPECT_EQ(r.termination, Termination::Goal);
  }
}

TEST(Step, ObstacleOnPayloadCollides) {
  EpisodeConfig cfg;
  cfg.n_escorts = 0;
  cfg.n_obstacles = 0;
  cfg.reward.phi[2] = 0.0;
  Episode ep(cfg, 1);
  ep.reset();
  WorldState w = ep.world();
  const Vec2 next = wrap_position(w.payload_start + w.payload_path_direction * 0.05, arena);
  add_body(w, BodyKind::Obstacle, next + w.payload_path_direction * 1.0, {}, w.payload_path_direction);
  ep.set_world(w);
  const StepOutcome o = ep.step({});
  EXPECT_EQ(o.event, Event::collision(BodyKind::Payload, BodyKind::Obstacle));
  EXPECT_TRUE(o.done);
  EXPECT_NEAR(o.reward, -0.99, 1e-12);
  EXPECT_THROW(ep.step({}), Error);
}

TEST(Step, CollisionBeatsGoal) {
  EpisodeConfig cfg;
  cfg.n_escorts = 0;
  cfg.n_obstacles = 0;
  Episode ep(cfg, 2);
  ep.reset();
  WorldState w = ep.world();
  w.step_index = 399;
  const Vec2 end = wrap_position(w.payload_start + w.payload_path_direction * 20.0, arena);
  add_body(w, BodyKind::Obstacle, end + Vec2{0, 1.0}, {}, {0, 1});
  ep.set_world(w);
  const StepOutcome o = ep.step({});
  EXPECT_EQ(o.event.kind, EventKind::Collision);
  EXPECT_EQ(o.step_index, 400);
}

TEST(Step, ErrorsOnArityAndDone) {
  EpisodeConfig cfg;
  cfg.n_escorts = 2;
  Episode ep(cfg, 3);
  EXPECT_THROW(ep.step(zeros(2)), Error);  // not reset
  ep.reset();
  try {
    ep.step(zeros(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ActionArity);
  }
  try {
    ep.step(std::vector<Vec2>{{0, 0}, {NAN, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptAction);
  }
  EXPECT_EQ(ep.world().step_index, 0);  // rejected steps do not advance
}

TEST(Step, Determinism) {
  EpisodeConfig cfg;
  cfg.n_escorts = 3;
  cfg.n_obstacles = 40;
  cfg.sf.fluctuation_std = 1.0;
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<std::vector<Vec2>> script(120);
  for (auto& s : script) s = {{n(gen), n(gen)}, {n(gen), n(gen)}, {n(gen), n(gen)}};
  auto run = [&] {
    std::vector<StepOutcome> outs;
    Episode ep(cfg, 77);
    outs.push_back(ep.reset());
    for (const auto& a : script) {
      if (outs.back().done) break;
      outs.push_back(ep.step(a));
    }
    return outs;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].observations, b[i].observations);
    ASSERT_EQ(std::bit_cast<std::uint64_t>(a[i].reward), std::bit_cast<std::uint64_t>(b[i].reward));
    ASSERT_EQ(a[i].event, b[i].event);
    ASSERT_EQ(a[i].breach_count, b[i].breach_count);
  }
}

TEST(Step, InvariantsOnRandomRollouts) {
  EpisodeConfig cfg;
  cfg.n_escorts = 3;
  cfg.n_obstacles = 50;
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 2.0);
  int steps = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Episode ep(cfg, seed);
    StepOutcome o = ep.reset();
    const Vec2 start = ep.world().payload_start;
    const Vec2 dir = ep.world().payload_path_direction;
    while (!o.done) {
      o = ep.step(std::vector<Vec2>{{n(gen), n(gen)}, {n(gen), n(gen)}, {n(gen), n(gen)}});
      ++steps;
      const WorldState& w = ep.world();
      const double goal = o.event.kind == EventKind::Goal ? 1.0 : 0.0;
      const double coll = o.event.kind == EventKind::Collision ? -1.0 : 0.0;
      ASSERT_NEAR(o.reward - 0.01 - goal - coll, breach_oracle(w, 0.05, 5.0, 50, 50), 1e-12);
      const Vec2 expected = wrap_position(start + dir * std::min(o.step_index * 0.05, 20.0), arena);
      ASSERT_NEAR(toroidal_distance(w.payload().position, expected, arena), 0.0, 1e-12);
      double nearest = INFINITY;
      for (const Body& b : w.bodies) {
        if (b.kind == BodyKind::Obstacle) nearest = std::min(nearest, toroidal_distance(b.position, w.payload().position, arena));
        ASSERT_GE(b.position.x, 0.0);
        ASSERT_LT(b.position.x, 50.0);
        ASSERT_LE(b.velocity.norm(), b.max_speed + 1e-12);
      }
      if (nearest >= 5.0) ASSERT_EQ(o.breach_count, 0);
      ASSERT_EQ(o.done, o.event.kind != EventKind::None || o.step_index >= cfg.max_steps);
      for (const auto& obs : o.observations) {
        ASSERT_EQ(obs.size(), 4608u);
        for (double v : obs) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
      }
    }
  }
  EXPECT_GT(steps, 100);
}

TEST(RunEpisode, RammingPolicyCollides) {
  EpisodeConfig cfg;
  cfg.n_escorts = 1;
  cfg.n_obstacles = 0;
  RamPayload policy;
  const EpisodeResult r = run_episode(cfg, policy, 9, ActionMode::Deterministic);
  EXPECT_EQ(r.termination, Termination::Collision);
  EXPECT_FALSE(r.success);
  EXPECT_LT(r.steps, 10);
}

TEST(RunEpisode, StepCap) {
  EpisodeConfig cfg;
  cfg.n_escorts = 1;
  cfg.n_obstacles = 0;
  cfg.max_steps = 50;
  StaticFormationPolicy policy;
  const EpisodeResult r = run_episode(cfg, policy, 9, ActionMode::Deterministic);
  EXPECT_EQ(r.termination, Termination::StepCap);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.steps, 50);
}

TEST(AddRemove, Examples) {
  EpisodeConfig cfg;
  cfg.n_escorts = 4;
  cfg.n_obstacles = 10;
  Rng rng(3);
  WorldState w = spawn(cfg, rng);
  const auto before = w.ids_of(BodyKind::Escort);
  WorldState removed = w;
  add_remove_escorts(removed, -1, rng, arena);
  const auto after = removed.ids_of(BodyKind::Escort);
  ASSERT_EQ(after.size(), 3u);
  for (BodyId id : after) EXPECT_NE(std::find(before.begin(), before.end(), id), before.end());

  WorldState added = w;
  add_remove_escorts(added, 1, rng, arena);
  const auto grown = added.ids_of(BodyKind::Escort);
  ASSERT_EQ(grown.size(), 5u);
  const Body* fresh = added.find(grown.back());
  EXPECT_GT(fresh->id, before.back());
  const double d = toroidal_distance(fresh->position, added.payload().position, arena);
  EXPECT_GE(d, 2.5);
  EXPECT_LE(d, 3.5);

  WorldState same = w;
  add_remove_escorts(same, 0, rng, arena);
  EXPECT_EQ(same.bodies.size(), w.bodies.size());
  for (std::size_t i = 0; i < w.bodies.size(); ++i) EXPECT_EQ(same.bodies[i].position, w.bodies[i].position);

  WorldState none = world_with_payload();
  EXPECT_THROW(add_remove_escorts(none, -1, rng, arena), Error);
}

TEST(AddRemove, EpisodeScheduleChangesArity) {
  EpisodeConfig cfg;
  cfg.n_escorts = 4;
  cfg.n_obstacles = 0;
  cfg.escort_schedule = {{125, -1}, {250, +1}};
  StaticFormationPolicy pol;
  std::size_t checked = 0;
  const EpisodeResult r = run_episode(cfg, pol, 12, ActionMode::Deterministic,
                                      [&](const Episode&, const StepOutcome& o) {
                                        const std::size_t expected = o.step_index < 125 ? 4 : (o.step_index < 250 ? 3 : 4);
                                        ASSERT_EQ(o.observations.size(), expected) << o.step_index;
                                        ++checked;
                                      });
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.steps, 400);
  EXPECT_EQ(checked, 401u);
}

TEST(Config, Validation) {
  EpisodeConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_escorts = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.reward.cordon_radius = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.dt = 0;
  EXPECT_THROW(c.validate(), Error);
}
