#include "escortsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "escortsim/checkpoint.hpp"
#include "escortsim/error.hpp"
#include "escortsim/parallel.hpp"
#include "escortsim/sensing.hpp"
#include "json_internal.hpp"

namespace escortsim {

namespace {

double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0);
}

PolicyKind policy_kind_from(const std::string& s) {
  if (s == "static") return PolicyKind::Static;
  if (s == "random") return PolicyKind::Random;
  if (s == "greedy") return PolicyKind::Greedy;
  if (s == "neural") return PolicyKind::Neural;
  throw Error(ErrorCode::InvalidConfig, "unknown policy kind '" + s + "'");
}

}  // namespace

void ExperimentGrid::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, std::string("experiment grid: ") + what);
  };
  require(!policies.empty(), "policies must be nonempty");
  require(!escort_counts.empty(), "escort_counts must be nonempty");
  require(!obstacle_counts.empty(), "obstacle_counts must be nonempty");
  require(!variants.empty(), "variants must be nonempty");
  require(episodes_per_cell >= 1, "episodes_per_cell must be >= 1");
  for (int n : escort_counts) require(n >= 0, "escort counts must be >= 0");
  for (int n : obstacle_counts) require(n >= 0, "obstacle counts must be >= 0");
  for (const auto& p : policies) {
    require(p.kind != PolicyKind::Neural || !p.checkpoint.empty(), "neural policies need a checkpoint");
  }
  base_config.validate();
}

ExperimentGrid experiment_grid_from_json(std::string_view text) {
  using detail::json;
  const json j = detail::parse_json(text);
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "experiment grid must be an object");
  ExperimentGrid g;
  try {
    if (j.contains("base_config")) g.base_config = detail::episode_config_from(j["base_config"]);
    for (const auto& p : j.value("policies", json::array())) {
      PolicySpec spec;
      spec.kind = policy_kind_from(p.at("kind").get<std::string>());
      spec.name = p.value("name", p.at("kind").get<std::string>());
      spec.checkpoint = p.value("checkpoint", std::string{});
      spec.ring_radius = p.value("ring_radius", 3.0);
      g.policies.push_back(spec);
    }
    g.escort_counts = j.value("escort_counts", std::vector<int>{});
    g.obstacle_counts = j.value("obstacle_counts", std::vector<int>{});
    g.episodes_per_cell = j.value("episodes_per_cell", g.episodes_per_cell);
    g.seed_base = j.value("seed_base", g.seed_base);
    const std::string mode = j.value("mode", std::string("deterministic"));
    if (mode == "deterministic") {
      g.mode = ActionMode::Deterministic;
    } else if (mode == "stochastic") {
      g.mode = ActionMode::Stochastic;
    } else {
      throw Error(ErrorCode::InvalidConfig, "mode must be deterministic or stochastic");
    }
    if (j.contains("variants")) {
      g.variants.clear();
      for (const auto& v : j["variants"]) {
        Variant var;
        var.name = v.value("name", var.name);
        if (v.contains("fluctuation_std")) var.fluctuation_std = v["fluctuation_std"].get<double>();
        if (v.contains("transform_frequency")) var.transform_frequency = v["transform_frequency"].get<double>();
        var.cordon_penalty = v.value("cordon_penalty", true);
        if (v.contains("escort_schedule")) {
          const json& s = v["escort_schedule"];
          if (s.is_string()) {
            const std::string text = s.get<std::string>();
            const auto at = text.find('@');
            const int initial = std::stoi(text.substr(0, at));
            var.escort_schedule = parse_escort_schedule(text, initial);
          } else {
            for (const auto& e : s) var.escort_schedule.push_back({e.at("step").get<int>(), e.at("delta").get<int>()});
          }
        }
        g.variants.push_back(var);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("experiment grid: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("experiment grid: ") + e.what());
  }
  g.validate();
  return g;
}

std::uint64_t episode_seed(std::uint64_t seed_base, std::size_t cell_index, std::size_t episode_index) {
  return mix_seed(seed_base, cell_index, episode_index);
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const LidarConfig& lidar) {
  switch (spec.kind) {
    case PolicyKind::Static:
      return std::make_unique<StaticFormationPolicy>(spec.ring_radius);
    case PolicyKind::Random:
      return std::make_unique<RandomPolicy>();
    case PolicyKind::Greedy:
      return std::make_unique<GreedyInterceptPolicy>(spec.ring_radius);
    case PolicyKind::Neural:
      return std::make_unique<NeuralPolicy>(
          std::make_shared<const NetworkParams>(load_checkpoint(spec.checkpoint, lidar)));
  }
  throw Error(ErrorCode::InvalidConfig, "unknown policy kind");
}

EpisodeConfig cell_config(const ExperimentGrid& grid, int n_escorts, int n_obstacles, const Variant& variant) {
  EpisodeConfig c = grid.base_config;
  c.n_escorts = n_escorts;
  c.n_obstacles = n_obstacles;
  if (variant.fluctuation_std) c.sf.fluctuation_std = *variant.fluctuation_std;
  if (variant.transform_frequency) c.transform_frequency = *variant.transform_frequency;
  if (!variant.escort_schedule.empty()) c.escort_schedule = variant.escort_schedule;
  if (!variant.cordon_penalty) c.reward.phi[2] = 0.0;
  c.validate();
  return c;
}

std::vector<MetricsRow> run_experiment(const ExperimentGrid& grid) {
  grid.validate();
  // Load every checkpoint up front so a bad path fails before any episode.
  std::vector<std::shared_ptr<const NetworkParams>> loaded(grid.policies.size());
  for (std::size_t p = 0; p < grid.policies.size(); ++p) {
    if (grid.policies[p].kind == PolicyKind::Neural) {
      loaded[p] = std::make_shared<const NetworkParams>(
          load_checkpoint(grid.policies[p].checkpoint, grid.base_config.lidar));
    }
  }
  std::vector<MetricsRow> rows;
  std::size_t cell = 0;
  for (std::size_t p = 0; p < grid.policies.size(); ++p) {
    const PolicySpec& spec = grid.policies[p];
    for (const Variant& variant : grid.variants) {
      for (int n_esc : grid.escort_counts) {
        for (int n_obs : grid.obstacle_counts) {
          const EpisodeConfig cfg = cell_config(grid, n_esc, n_obs, variant);
          const auto n = static_cast<std::size_t>(grid.episodes_per_cell);
          std::vector<EpisodeResult> results(n);
          parallel_for(n, [&](std::size_t e) {
            std::unique_ptr<Policy> policy = spec.kind == PolicyKind::Neural
                                                 ? std::make_unique<NeuralPolicy>(loaded[p])
                                                 : make_policy(spec, cfg.lidar);
            results[e] = run_episode(cfg, *policy, episode_seed(grid.seed_base, cell, e), grid.mode);
          });
          MetricsRow row = aggregate(results);
          row.policy = spec.name;
          row.n_escorts = n_esc;
          row.n_obstacles = n_obs;
          row.variant = variant.name;
          rows.push_back(std::move(row));
          ++cell;
        }
      }
    }
  }
  return rows;
}

MetricsRow aggregate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate needs at least one episode");
  MetricsRow row;
  std::vector<double> breach;
  std::vector<double> reward;
  for (const auto& r : results) {
    row.successes += r.success ? 1 : 0;
    breach.push_back(r.breach_fraction);
    reward.push_back(r.cumulative_reward);
  }
  row.episodes = static_cast<int>(results.size());
  const double n = static_cast<double>(row.episodes);
  row.success_rate = static_cast<double>(row.successes) / n;
  row.success_ci95 = 1.96 * std::sqrt(row.success_rate * (1.0 - row.success_rate) / n);
  row.breach_time_mean = breach_time(breach);
  row.mean_cumulative_reward = sorted_sum(reward) / n;
  return row;
}

double breach_time(std::span<const double> breach_fractions) {
  if (breach_fractions.empty()) throw Error(ErrorCode::InvalidArgument, "breach_time needs at least one episode");
  return sorted_sum({breach_fractions.begin(), breach_fractions.end()}) /
         static_cast<double>(breach_fractions.size());
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "# escortsim metrics v1\n";
  out << "policy,n_escorts,n_obstacles,variant,successes,episodes,success_rate,success_ci95,"
         "breach_time_mean,mean_cumulative_reward\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << r.n_escorts << ',' << r.n_obstacles << ',' << r.variant << ',' << r.successes
        << ',' << r.episodes << ',' << encode_float(r.success_rate) << ',' << encode_float(r.success_ci95) << ','
        << encode_float(r.breach_time_mean) << ',' << encode_float(r.mean_cumulative_reward) << '\n';
  }
}

std::vector<HeatmapCell> value_heatmap(const NetworkParams& params, const WorldState& snapshot,
                                       const LidarConfig& lidar, const ArenaConfig& arena, double grid_extent,
                                       int resolution) {
  if (resolution < 1 || !(grid_extent > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "heatmap needs resolution >= 1 and extent > 0");
  }
  const Body& payload = snapshot.payload();
  const auto n = static_cast<std::size_t>(resolution);
  const double cell = grid_extent / resolution;
  std::vector<HeatmapCell> cells(n * n);
  std::vector<std::vector<double>> obs(n * n);

  parallel_for(n, [&](std::size_t row) {
    WorldState world = snapshot;
    const BodyId probe_id = world.next_id;
    Body probe{probe_id, BodyKind::Escort, {}, {}, kEscortRadius, kEscortMaxSpeed};
    world.bodies.push_back(probe);
    for (std::size_t col = 0; col < n; ++col) {
      HeatmapCell& hc = cells[row * n + col];
      hc.x_offset = -0.5 * grid_extent + (static_cast<double>(col) + 0.5) * cell;
      hc.y_offset = -0.5 * grid_extent + (static_cast<double>(row) + 0.5) * cell;
      Body& b = world.bodies.back();
      b.position = wrap_position(payload.position + Vec2{hc.x_offset, hc.y_offset}, arena);
      for (std::size_t k = 0; k + 1 < world.bodies.size(); ++k) {
        if (bodies_collide(b, world.bodies[k], arena)) hc.masked = true;
      }
      if (hc.masked) continue;
      const ObservationStack stack(cast_rays(probe_id, world, lidar, arena), lidar.history_len);
      obs[row * n + col] = flatten(stack, lidar);
    }
  });

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].masked) live.push_back(i);
  }
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (live.size() + kChunk - 1) / kChunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(live.size(), begin + kChunk);
    std::vector<std::vector<double>> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(std::move(obs[live[i]]));
    const auto values = forward_critic_batch(params, stack_observations(params, batch));
    for (std::size_t i = begin; i < end; ++i) cells[live[i]].value = values[i - begin];
  });
  return cells;
}

void write_heatmap_csv(std::ostream& out, std::span<const HeatmapCell> cells) {
  out << "# escortsim heatmap v1\n";
  out << "x_offset,y_offset,value,masked\n";
  for (const auto& c : cells) {
    out << encode_float(c.x_offset) << ',' << encode_float(c.y_offset) << ',' << encode_float(c.value) << ','
        << (c.masked ? 1 : 0) << '\n';
  }
}

std::string trace_record(const WorldState& world, const StepOutcome& outcome) {
  JsonWriter w;
  w.begin_object();
  w.key("step_index").value(outcome.step_index);
  w.key("reward").value(outcome.reward);
  w.key("breach_reward").value(outcome.breach_reward);
  w.key("event").value(to_string(outcome.event));
  w.key("breach_count").value(outcome.breach_count);
  w.key("done").value(outcome.done);
  w.key("world");
  detail::write_world(w, world);
  w.end_object();
  return w.take();
}

EpisodeResult export_trace(const EpisodeConfig& config, Policy& policy, std::uint64_t seed, ActionMode mode,
                           std::ostream& out) {
  bool first = true;
  return run_episode(config, policy, seed, mode, [&](const Episode& ep, const StepOutcome& outcome) {
    if (first) {
      first = false;
      return;
    }
    out << trace_record(ep.world(), outcome) << '\n';
  });
}

BreachSeries run_breach_series(const EpisodeConfig& config, Policy& policy, std::uint64_t seed, ActionMode mode) {
  BreachSeries series;
  bool first = true;
  const EpisodeResult r = run_episode(config, policy, seed, mode, [&](const Episode&, const StepOutcome& outcome) {
    if (first) {
      first = false;
      return;
    }
    series.breach_rewards.push_back(outcome.breach_reward);
  });
  series.success = r.success;
  return series;
}

std::vector<double> reward_curve(std::span<const BreachSeries> runs, int window) {
  std::vector<double> sum;
  std::vector<int> count;
  for (const auto& run : runs) {
    if (!run.success) continue;
    if (run.breach_rewards.size() > sum.size()) {
      sum.resize(run.breach_rewards.size(), 0.0);
      count.resize(run.breach_rewards.size(), 0);
    }
    for (std::size_t i = 0; i < run.breach_rewards.size(); ++i) {
      sum[i] += run.breach_rewards[i];
      ++count[i];
    }
  }
  if (std::none_of(runs.begin(), runs.end(), [](const BreachSeries& r) { return r.success; })) {
    throw Error(ErrorCode::InvalidArgument, "reward_curve needs at least one successful run");
  }
  std::vector<double> mean(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = sum[i] / count[i];
  if (window <= 1) return mean;
  std::vector<double> smoothed(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t k = lo; k <= i; ++k) s += mean[k];
    smoothed[i] = s / static_cast<double>(i - lo + 1);
  }
  return smoothed;
}

std::vector<EscortScheduleEntry> parse_escort_schedule(std::string_view text, int initial) {
  std::vector<EscortScheduleEntry> out;
  int current = initial;
  int last_step = -1;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string token(text.substr(pos, comma - pos));
    const auto at = token.find('@');
    if (at == std::string::npos) throw Error(ErrorCode::InvalidConfig, "schedule entry '" + token + "' lacks '@'");
    int count = 0;
    int step = 0;
    try {
      std::size_t used = 0;
      count = std::stoi(token.substr(0, at), &used);
      if (used != at) throw std::invalid_argument("count");
      const std::string step_text = token.substr(at + 1);
      step = std::stoi(step_text, &used);
      if (used != step_text.size()) throw std::invalid_argument("step");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "bad schedule entry '" + token + "'");
    }
    if (count < 0 || step < 0 || step <= last_step) {
      throw Error(ErrorCode::InvalidConfig, "schedule steps must increase and counts be >= 0");
    }
    if (step == 0) {
      if (count != initial) throw Error(ErrorCode::InvalidConfig, "schedule count at step 0 must equal the initial count");
    } else if (count != current) {
      out.push_back({step, count - current});
    }
    current = count;
    last_step = step;
    pos = comma + 1;
  }
  return out;
}

}  // namespace escortsim
