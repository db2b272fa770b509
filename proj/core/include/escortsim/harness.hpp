#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "escortsim/episode.hpp"
#include "escortsim/network.hpp"
#include "escortsim/policy.hpp"

namespace escortsim {

enum class PolicyKind { Static, Random, Greedy, Neural };

struct PolicySpec {
  std::string name;
  PolicyKind kind{PolicyKind::Static};
  std::string checkpoint;  // Neural only
  double ring_radius{3.0};
};

/// A named modification of the base episode config.
struct Variant {
  std::string name{"base"};
  std::optional<double> fluctuation_std;
  std::optional<double> transform_frequency;
  std::vector<EscortScheduleEntry> escort_schedule;
  bool cordon_penalty{true};
};

struct ExperimentGrid {
  std::vector<PolicySpec> policies;
  std::vector<int> escort_counts;
  std::vector<int> obstacle_counts;
  std::vector<Variant> variants{Variant{}};
  int episodes_per_cell{100};
  EpisodeConfig base_config;
  std::uint64_t seed_base{0};
  ActionMode mode{ActionMode::Deterministic};

  void validate() const;
};

ExperimentGrid experiment_grid_from_json(std::string_view text);

struct MetricsRow {
  std::string policy;
  int n_escorts{0};
  int n_obstacles{0};
  std::string variant;
  int successes{0};
  int episodes{0};
  double success_rate{0.0};
  double success_ci95{0.0};
  double breach_time_mean{0.0};
  double mean_cumulative_reward{0.0};
};

/// Seed of episode `episode_index` in cell `cell_index`:
/// mix_seed(seed_base, cell_index, episode_index).
std::uint64_t episode_seed(std::uint64_t seed_base, std::size_t cell_index,
                           std::size_t episode_index);

/// Builds a policy; Neural specs load their checkpoint (throws on failure).
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const LidarConfig& lidar);

/// Episode config of one grid cell.
EpisodeConfig cell_config(const ExperimentGrid& grid, int n_escorts, int n_obstacles,
                          const Variant& variant);

/// Cells ordered policy-major, then variant, escort count, obstacle count.
/// All neural checkpoints are loaded before any episode runs.
std::vector<MetricsRow> run_experiment(const ExperimentGrid& grid);

/// Aggregates per-episode results; order of `results` does not matter.
MetricsRow aggregate(std::span<const EpisodeResult> results);

/// Mean of per-episode breach fractions; throws on empty input.
double breach_time(std::span<const double> breach_fractions);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

struct HeatmapCell {
  double x_offset{0.0};
  double y_offset{0.0};
  double value{0.0};
  bool masked{false};
};

/// Critic values for a probe escort placed at each cell centre of a
/// resolution x resolution grid spanning grid_extent metres around the payload.
std::vector<HeatmapCell> value_heatmap(const NetworkParams& params, const WorldState& snapshot,
                                       const LidarConfig& lidar, const ArenaConfig& arena,
                                       double grid_extent = 10.0, int resolution = 50);
void write_heatmap_csv(std::ostream& out, std::span<const HeatmapCell> cells);

/// One NDJSON record for the state after a reset or step.
std::string trace_record(const WorldState& world, const StepOutcome& outcome);

/// Runs one episode and streams its trace (one line per step, reset excluded).
EpisodeResult export_trace(const EpisodeConfig& config, Policy& policy, std::uint64_t seed,
                           ActionMode mode, std::ostream& out);

/// Per-step cordon (breach) reward of one episode, for reward_curve.
struct BreachSeries {
  bool success{false};
  std::vector<double> breach_rewards;
};

BreachSeries run_breach_series(const EpisodeConfig& config, Policy& policy, std::uint64_t seed,
                               ActionMode mode);

/// Mean breach reward per step index over successful runs only, with an
/// optional trailing moving-average window (window <= 1 disables).
std::vector<double> reward_curve(std::span<const BreachSeries> runs, int window = 1);

/// Parses "4@0,3@125,4@250" (escort count at step) into schedule deltas
/// relative to `initial`. The entry at step 0 must equal `initial` if present.
std::vector<EscortScheduleEntry> parse_escort_schedule(std::string_view text, int initial);

}  // namespace escortsim
