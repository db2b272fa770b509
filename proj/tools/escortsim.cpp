// escortsim command line: experiment sweeps, single episodes with traces,
// value heatmaps, training and the environment server.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "escortsim/checkpoint.hpp"
#include "escortsim/config_io.hpp"
#include "escortsim/envproto.hpp"
#include "escortsim/error.hpp"
#include "escortsim/harness.hpp"
#include "escortsim/training.hpp"

namespace fs = std::filesystem;
using namespace escortsim;

namespace {

EpisodeConfig load_episode_config(const std::string& path) {
  return path.empty() ? EpisodeConfig{} : episode_config_from_json(read_text_file(path));
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

PolicySpec policy_spec(const std::string& kind, const std::string& checkpoint) {
  PolicySpec spec;
  spec.name = kind;
  if (kind == "static") {
    spec.kind = PolicyKind::Static;
  } else if (kind == "random") {
    spec.kind = PolicyKind::Random;
  } else if (kind == "greedy") {
    spec.kind = PolicyKind::Greedy;
  } else {
    spec.kind = PolicyKind::Neural;
    spec.checkpoint = checkpoint;
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"escortsim: payload escort simulator"};
  app.require_subcommand(1);

  std::string grid_path, out_dir = "out";
  auto* run = app.add_subcommand("run", "run an experiment grid and write metrics.csv");
  run->add_option("grid", grid_path, "experiment grid JSON")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "output directory");

  std::string config_path, policy = "static", checkpoint, trace_path = "trace.ndjson", snapshot_path;
  std::uint64_t seed = 0;
  int snapshot_step = -1;
  auto* episode = app.add_subcommand("episode", "run one seeded episode and write its trace");
  episode->add_option("-c,--config", config_path, "episode config JSON")->check(CLI::ExistingFile);
  episode->add_option("-s,--seed", seed, "episode seed");
  episode->add_option("-p,--policy", policy, "static | random | greedy | neural")
      ->check(CLI::IsMember({"static", "random", "greedy", "neural"}));
  episode->add_option("--checkpoint", checkpoint, "checkpoint for the neural policy");
  episode->add_option("-t,--trace", trace_path, "NDJSON trace output");
  episode->add_option("--snapshot-step", snapshot_step, "also save the world after this step");
  episode->add_option("--snapshot", snapshot_path, "snapshot output (world JSON)");

  std::string heat_snapshot, heat_out = "heatmap.csv";
  double extent = 10.0;
  int resolution = 50;
  auto* heatmap = app.add_subcommand("heatmap", "critic value heatmap around the payload");
  heatmap->add_option("checkpoint", checkpoint, "network checkpoint")->required()->check(CLI::ExistingFile);
  heatmap->add_option("snapshot", heat_snapshot, "world snapshot JSON")->required()->check(CLI::ExistingFile);
  heatmap->add_option("-c,--config", config_path, "episode config JSON (lidar and arena)")->check(CLI::ExistingFile);
  heatmap->add_option("--extent", extent, "grid side in metres")->check(CLI::PositiveNumber);
  heatmap->add_option("--resolution", resolution, "cells per side")->check(CLI::PositiveNumber);
  heatmap->add_option("-o,--out", heat_out, "CSV output");

  std::string trainer_path, ckpt_dir = "checkpoints";
  auto* train_cmd = app.add_subcommand("train", "train the shared escort policy");
  train_cmd->add_option("-e,--env", config_path, "episode config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("-t,--trainer", trainer_path, "trainer config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", ckpt_dir, "checkpoint directory");
  train_cmd->add_option("-s,--seed", seed, "training seed");

  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  bool stdio = false;
  auto* serve = app.add_subcommand("serve", "line-delimited JSON environment server");
  serve->add_option("-c,--config", config_path, "base episode config JSON")->check(CLI::ExistingFile);
  serve->add_flag("--stdio", stdio, "serve one session on stdin/stdout");
  serve->add_option("--host", host, "TCP listen address");
  serve->add_option("--port", port, "TCP port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentGrid grid = experiment_grid_from_json(read_text_file(grid_path));
      const auto rows = run_experiment(grid);
      auto out = open_out(fs::path(out_dir) / "metrics.csv");
      write_metrics_csv(out, rows);
      write_metrics_csv(std::cout, rows);
    } else if (*episode) {
      const EpisodeConfig cfg = load_episode_config(config_path);
      auto pol = make_policy(policy_spec(policy, checkpoint), cfg.lidar);
      auto out = open_out(trace_path);
      EpisodeResult r;
      if (snapshot_step >= 0) {
        bool saved = false;
        r = run_episode(cfg, *pol, seed, ActionMode::Deterministic, [&](const Episode& ep, const StepOutcome& o) {
          if (o.step_index > 0) out << trace_record(ep.world(), o) << '\n';
          if (!saved && o.step_index == snapshot_step) {
            write_text_file(snapshot_path.empty() ? "snapshot.json" : snapshot_path, to_json(ep.world()));
            saved = true;
          }
        });
      } else {
        r = export_trace(cfg, *pol, seed, ActionMode::Deterministic, out);
      }
      std::cout << "termination=" << to_string(r.termination) << " steps=" << r.steps
                << " breach_fraction=" << r.breach_fraction << " reward=" << r.cumulative_reward << '\n';
    } else if (*heatmap) {
      const EpisodeConfig cfg = load_episode_config(config_path);
      const NetworkParams params = load_checkpoint(checkpoint, cfg.lidar);
      const WorldState world = world_from_json(read_text_file(heat_snapshot));
      const auto cells = value_heatmap(params, world, cfg.lidar, cfg.arena, extent, resolution);
      auto out = open_out(heat_out);
      write_heatmap_csv(out, cells);
    } else if (*train_cmd) {
      const EpisodeConfig cfg = load_episode_config(config_path);
      const TrainerConfig tc = trainer_path.empty() ? TrainerConfig{} : trainer_config_from_json(read_text_file(trainer_path));
      fs::create_directories(ckpt_dir);
      const auto result = train(cfg, tc, seed, [&](const IterationLog& log, const NetworkParams& params) {
        save_checkpoint(fs::path(ckpt_dir) / "latest.ckpt", params, cfg.lidar);
        std::cout << "iter " << log.iteration << " reward " << log.mean_batch_reward << " actor "
                  << log.actor_loss << " critic " << log.critic_loss << " entropy " << log.entropy << std::endl;
      });
      save_checkpoint(fs::path(ckpt_dir) / "final.ckpt", result.params, cfg.lidar);
      auto curve = open_out(fs::path(ckpt_dir) / "learning_curve.csv");
      write_learning_curve_csv(curve, result.curve);
    } else if (*serve) {
      const EpisodeConfig cfg = load_episode_config(config_path);
      if (stdio) {
        serve_stream(std::cin, std::cout, cfg);
      } else {
        std::cerr << "listening on " << host << ':' << port << std::endl;
        serve_tcp(host, port, cfg);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
