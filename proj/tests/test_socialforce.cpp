#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "escortsim/error.hpp"
#include "escortsim/socialforce.hpp"
#include "support.hpp"

using namespace escortsim;
using escortsim::testing::add_body;
using escortsim::testing::world_with_payload;

namespace {

const ArenaConfig arena;

// Central differences of the potential in the relative position r = self - other.
Vec2 fd_gradient(Vec2 r, Vec2 v, const SocialForceParams& p, double h = 1e-6) {
  const double gx = (repulsive_potential(r + Vec2{h, 0}, v, p) - repulsive_potential(r - Vec2{h, 0}, v, p)) / (2 * h);
  const double gy = (repulsive_potential(r + Vec2{0, h}, v, p) - repulsive_potential(r - Vec2{0, h}, v, p)) / (2 * h);
  return {-gx, -gy};
}

}  // namespace

TEST(Driving, Examples) {
  const Vec2 a = driving_force({0, 0}, {1, 0}, 1.0, 0.7);
  EXPECT_NEAR(a.x, 1.0 / 0.7, 1e-15);
  EXPECT_EQ(a.y, 0.0);
  EXPECT_EQ(driving_force({0.6, 0.8}, {0.6, 0.8}, 1.0, 0.7), (Vec2{0, 0}));
  EXPECT_NEAR(driving_force({1, 0}, {-1, 0}, 1.0, 0.7).x, -2.0 / 0.7, 1e-15);
}

TEST(Repulsion, BeyondInfluenceRadiusIsZero) {
  const SocialForceParams p;
  EXPECT_EQ(repulsive_force({10, 10}, {1, 0}, {16, 10}, {0.3, -0.2}, p, arena), (Vec2{0, 0}));
  EXPECT_EQ(repulsive_force({10, 10}, {1, 0}, {10, 15.0 + 1e-9}, {}, p, arena), (Vec2{0, 0}));
  const Vec2 inside = repulsive_force({10, 10}, {0, 1}, {10, 15.0 - 1e-9}, {}, p, arena);
  EXPECT_TRUE(inside.finite());
}

TEST(Repulsion, BehindIsOutsideCone) {
  const SocialForceParams p;
  EXPECT_EQ(repulsive_force({10, 10}, {1, 0}, {8, 10}, {}, p, arena), (Vec2{0, 0}));
  // 120 degrees off the heading is outside the +-100 degree cone, 80 is inside.
  const double a120 = 120.0 * std::numbers::pi / 180.0;
  const double a80 = 80.0 * std::numbers::pi / 180.0;
  EXPECT_EQ(repulsive_force({10, 10}, {1, 0}, Vec2{10, 10} + 2.0 * Vec2::from_angle(a120), {}, p, arena),
            (Vec2{0, 0}));
  EXPECT_NE(repulsive_force({10, 10}, {1, 0}, Vec2{10, 10} + 2.0 * Vec2::from_angle(a80), {}, p, arena),
            (Vec2{0, 0}));
}

TEST(Repulsion, StationaryAheadMatchesClosedForm) {
  const SocialForceParams p;
  const double d = 2.0;
  const Vec2 f = repulsive_force({10, 10}, {1, 0}, {12, 10}, {0, 0}, p, arena);
  const double expected = p.amplitude_V0 / p.range_sigma * std::exp(-d / p.range_sigma);
  EXPECT_NEAR(f.x, -expected, 1e-12 * expected);
  EXPECT_EQ(f.y, 0.0);
  const Vec2 fd = fd_gradient({-d, 0}, {0, 0}, p);
  EXPECT_NEAR(f.x, fd.x, 1e-5 * expected);
}

TEST(Repulsion, AcrossTheSeam) {
  const SocialForceParams p;
  const Vec2 direct = repulsive_force({10, 10}, {1, 0}, {12, 10}, {0.5, 0}, p, arena);
  const Vec2 seam = repulsive_force({49, 10}, {1, 0}, {1, 10}, {0.5, 0}, p, arena);
  EXPECT_NEAR(direct.x, seam.x, 1e-12);
  EXPECT_NEAR(direct.y, seam.y, 1e-12);
}

TEST(Repulsion, CoincidentIsDegenerate) {
  try {
    repulsive_force({3, 3}, {1, 0}, {3, 3}, {}, SocialForceParams{}, arena);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateGeometry);
  }
}

TEST(Repulsion, MonotoneDecayAhead) {
  const SocialForceParams p;
  double prev = INFINITY;
  for (double d = 0.1 + 1e-3; d <= 5.0; d += 1e-3) {
    const double mag = repulsive_force({10, 10}, {1, 0}, {10 + d, 10}, {}, p, arena).norm();
    ASSERT_LT(mag, prev) << d;
    prev = mag;
  }
}

TEST(Repulsion, GradientMatchesFiniteDifferences) {
  const SocialForceParams p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> dist(0.3, 4.9);
  std::uniform_real_distribution<double> speed(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 r = dist(rng) * Vec2::from_angle(ang(rng));
    const Vec2 v = speed(rng) * Vec2::from_angle(ang(rng));
    // Heading along -r so the cone never masks the probe.
    const Vec2 heading = (-1.0 * r).normalized();
    const Vec2 other{25, 25};
    const Vec2 f = repulsive_force(other + r, heading, other, v, p, arena);
    const Vec2 fd = fd_gradient(r, v, p);
    const double scale = std::max({f.norm(), fd.norm(), 1e-12});
    ASSERT_LT((f - fd).norm() / scale, 1e-5) << "r=" << r.x << "," << r.y << " v=" << v.x << "," << v.y;
  }
}

TEST(TotalForce, LoneObstacleIsDrivingOnly) {
  WorldState w = world_with_payload({40, 40});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {0.2, 0.1}, {0, 1});
  Rng rng(1);
  const ForceBreakdown f = total_force(id, w, SocialForceParams{}, arena, rng);
  const Vec2 drive = driving_force({0.2, 0.1}, {0, 1}, 1.0, 0.7);
  EXPECT_EQ(f.total, drive);
  EXPECT_EQ(f.fluctuation, (Vec2{0, 0}));
  EXPECT_EQ(f.repulsion_obstacles, (Vec2{0, 0}));
  EXPECT_EQ(f.repulsion_escorts, (Vec2{0, 0}));
}

TEST(TotalForce, MirrorNeighboursCancelLaterally) {
  WorldState w = world_with_payload({40, 40});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {1, 0}, {1, 0});
  add_body(w, BodyKind::Obstacle, {12, 11}, {0, -0.5});
  add_body(w, BodyKind::Obstacle, {12, 9}, {0, 0.5});
  Rng rng(1);
  const ForceBreakdown f = total_force(id, w, SocialForceParams{}, arena, rng);
  EXPECT_NEAR(f.repulsion_obstacles.y, 0.0, 1e-12);
  EXPECT_LT(f.repulsion_obstacles.x, 0.0);
}

TEST(TotalForce, PayloadSilentUnlessEnabled) {
  WorldState w = world_with_payload({13, 10});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {1, 0}, {1, 0});
  SocialForceParams p;
  Rng rng(1);
  EXPECT_EQ(total_force(id, w, p, arena, rng).repulsion_escorts, (Vec2{0, 0}));
  p.payload_emits_force = true;
  EXPECT_LT(total_force(id, w, p, arena, rng).repulsion_escorts.x, 0.0);
}

TEST(TotalForce, SuperpositionOfPairs) {
  SocialForceParams p;
  p.payload_emits_force = true;
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> off(-4.0, 4.0);
  std::uniform_real_distribution<double> vel(-1.0, 1.0);
  for (int scene = 0; scene < 200; ++scene) {
    WorldState w = world_with_payload({20 + off(gen), 20 + off(gen)});
    const BodyId id = add_body(w, BodyKind::Obstacle, {20, 20}, {vel(gen), vel(gen)}, {1, 0});
    add_body(w, BodyKind::Obstacle, {20 + off(gen), 20 + off(gen)}, {vel(gen), vel(gen)});
    add_body(w, BodyKind::Obstacle, {20 + off(gen), 20 + off(gen)}, {vel(gen), vel(gen)});
    add_body(w, BodyKind::Escort, {20 + off(gen), 20 + off(gen)}, {vel(gen), vel(gen)});
    const Body& self = *w.find(id);
    const Vec2 heading = obstacle_heading(self, w.obstacle_intents.at(id));
    Vec2 obs_sum, esc_sum;
    for (const Body& b : w.bodies) {
      if (b.id == id) continue;
      const Vec2 f = repulsive_force(self.position, heading, b.position, b.velocity, p, arena);
      (b.kind == BodyKind::Obstacle ? obs_sum : esc_sum) += f;
    }
    Rng rng(1);
    const ForceBreakdown fb = total_force(id, w, p, arena, rng);
    ASSERT_NEAR(fb.repulsion_obstacles.x, obs_sum.x, 1e-12);
    ASSERT_NEAR(fb.repulsion_obstacles.y, obs_sum.y, 1e-12);
    ASSERT_NEAR(fb.repulsion_escorts.x, esc_sum.x, 1e-12);
    ASSERT_NEAR(fb.repulsion_escorts.y, esc_sum.y, 1e-12);
    const Vec2 sum = fb.driving + fb.repulsion_obstacles + fb.repulsion_escorts + fb.fluctuation;
    ASSERT_NEAR(fb.total.x, sum.x, 1e-12);
    ASSERT_NEAR(fb.total.y, sum.y, 1e-12);
  }
}

TEST(TotalForce, FluctuationStatistics) {
  WorldState w = world_with_payload({40, 40});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {1, 0}, {1, 0});
  SocialForceParams p;
  p.fluctuation_std = 2.0;
  Rng rng(5);
  double sx = 0, sxx = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = total_force(id, w, p, arena, rng).fluctuation.x;
    sx += x;
    sxx += x * x;
  }
  EXPECT_NEAR(sx / n, 0.0, 0.06);
  EXPECT_NEAR(std::sqrt(sxx / n), 2.0, 0.06);
}

TEST(TotalForce, UnknownIdThrows) {
  WorldState w = world_with_payload();
  Rng rng(1);
  EXPECT_THROW(total_force(99, w, SocialForceParams{}, arena, rng), Error);
}

TEST(StepObstacles, FromRestOneStep) {
  WorldState w = world_with_payload({40, 40});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {0, 0}, {1, 0});
  Rng rng(1);
  step_obstacles(w, SocialForceParams{}, arena, rng, 0.2);
  const Body& b = *w.find(id);
  EXPECT_NEAR(b.velocity.x, 0.2 / 0.7, 1e-15);
  EXPECT_EQ(b.velocity.y, 0.0);
  EXPECT_NEAR(b.position.x, 10 + 0.2 / 0.7 * 0.2, 1e-14);
}

TEST(StepObstacles, SpeedClampedAtMax) {
  WorldState w = world_with_payload({40, 40});
  const BodyId id = add_body(w, BodyKind::Obstacle, {10, 10}, {1, 0}, {1, 0});
  w.obstacle_intents[id].desired_speed = 1.0;
  SocialForceParams p;
  WorldState w2 = w;
  w2.find(id)->velocity = {0.999, 0};
  Rng rng(1);
  step_obstacles(w, p, arena, rng, 0.2);
  EXPECT_EQ(w.find(id)->velocity.norm(), 1.0);
  // Aligned push beyond max speed is clamped.
  w2.obstacle_intents[id].desired_speed = 5.0;
  step_obstacles(w2, p, arena, rng, 0.2);
  EXPECT_DOUBLE_EQ(w2.find(id)->velocity.norm(), 1.0);
}

TEST(StepObstacles, DeterministicAndLeavesOthersAlone) {
  EpisodeConfig cfg;
  cfg.n_obstacles = 40;
  Rng spawn_rng(3);
  const WorldState base = spawn(cfg, spawn_rng);
  for (double fluct : {0.0, 2.0}) {
    SocialForceParams p;
    p.fluctuation_std = fluct;
    WorldState a = base, b = base;
    Rng ra(9), rb(9);
    step_obstacles(a, p, arena, ra, 0.2);
    step_obstacles(b, p, arena, rb, 0.2);
    for (std::size_t i = 0; i < a.bodies.size(); ++i) {
      ASSERT_EQ(a.bodies[i].position, b.bodies[i].position);
      ASSERT_EQ(a.bodies[i].velocity, b.bodies[i].velocity);
      if (a.bodies[i].kind != BodyKind::Obstacle) ASSERT_EQ(a.bodies[i].position, base.bodies[i].position);
      ASSERT_LE(a.bodies[i].velocity.norm(), a.bodies[i].max_speed + 1e-12);
    }
  }
}

TEST(StepObstacles, OrderIndependent) {
  EpisodeConfig cfg;
  cfg.n_obstacles = 30;
  Rng spawn_rng(4);
  const WorldState base = spawn(cfg, spawn_rng);
  WorldState reversed = base;
  std::reverse(reversed.bodies.begin(), reversed.bodies.end());
  SocialForceParams p;
  p.fluctuation_std = 1.0;
  WorldState a = base;
  Rng ra(17), rb(17);
  step_obstacles(a, p, arena, ra, 0.2);
  step_obstacles(reversed, p, arena, rb, 0.2);
  for (const Body& b : a.bodies) {
    const Body* other = reversed.find(b.id);
    ASSERT_NE(other, nullptr);
    ASSERT_NEAR(b.position.x, other->position.x, 1e-12);
    ASSERT_NEAR(b.position.y, other->position.y, 1e-12);
  }
}

TEST(Params, Validation) {
  SocialForceParams p;
  EXPECT_NO_THROW(p.validate());
  p.vision_half_angle = 190;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.fluctuation_std = -1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.range_sigma = 0;
  EXPECT_THROW(p.validate(), Error);
}
