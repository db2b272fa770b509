#include <benchmark/benchmark.h>

#include "escortsim/episode.hpp"
#include "escortsim/network.hpp"
#include "escortsim/sensing.hpp"
#include "escortsim/socialforce.hpp"

using namespace escortsim;

namespace {

WorldState spawned(int n_escorts, int n_obstacles) {
  EpisodeConfig cfg;
  cfg.n_escorts = n_escorts;
  cfg.n_obstacles = n_obstacles;
  Rng rng(7);
  return spawn(cfg, rng);
}

void BM_CastRays(benchmark::State& state) {
  const WorldState world = spawned(3, static_cast<int>(state.range(0)));
  const LidarConfig lidar;
  const ArenaConfig arena;
  const BodyId id = world.ids_of(BodyKind::Escort).front();
  for (auto _ : state) benchmark::DoNotOptimize(cast_rays(id, world, lidar, arena));
}
BENCHMARK(BM_CastRays)->Arg(10)->Arg(30)->Arg(90);

void BM_StepObstacles(benchmark::State& state) {
  const WorldState base = spawned(3, static_cast<int>(state.range(0)));
  const SocialForceParams sf;
  const ArenaConfig arena;
  Rng rng(1);
  for (auto _ : state) {
    WorldState w = base;
    step_obstacles(w, sf, arena, rng, 0.2);
    benchmark::DoNotOptimize(w);
  }
}
BENCHMARK(BM_StepObstacles)->Arg(30)->Arg(90);

void BM_EpisodeStep(benchmark::State& state) {
  EpisodeConfig cfg;
  cfg.n_escorts = static_cast<int>(state.range(0));
  Episode ep(cfg, 3);
  ep.reset();
  const std::vector<Vec2> actions(static_cast<std::size_t>(cfg.n_escorts), Vec2{0.0, 0.0});
  for (auto _ : state) {
    if (ep.done()) ep.reset();
    benchmark::DoNotOptimize(ep.step(actions));
  }
}
BENCHMARK(BM_EpisodeStep)->Arg(1)->Arg(3)->Arg(6);

void BM_ForwardActor(benchmark::State& state) {
  const LidarConfig lidar;
  Rng rng(5);
  const NetworkParams params = NetworkParams::initialized(ConvNetShape::for_lidar(lidar), rng);
  const RowMatrix inputs = RowMatrix::Random(state.range(0), static_cast<Eigen::Index>(lidar.flat_size())).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(forward_actor_batch(params, inputs));
}
BENCHMARK(BM_ForwardActor)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
