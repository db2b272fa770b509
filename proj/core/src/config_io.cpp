#include "escortsim/config_io.hpp"

#include <fstream>
#include <sstream>

#include "escortsim/error.hpp"
#include "json_internal.hpp"

namespace escortsim {
namespace detail {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::InvalidConfig, "expected a [x, y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

EpisodeConfig episode_config_from(const json& j, EpisodeConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "episode config must be an object");
  read(j, "n_escorts", c.n_escorts);
  read(j, "n_obstacles", c.n_obstacles);
  read(j, "goal_distance", c.goal_distance);
  read(j, "payload_speed", c.payload_speed);
  read(j, "dt", c.dt);
  read(j, "max_steps", c.max_steps);
  read(j, "transform_frequency", c.transform_frequency);
  read(j, "seed", c.seed);
  if (const auto it = j.find("reward"); it != j.end()) {
    read(*it, "phi", c.reward.phi);
    read(*it, "r_goal", c.reward.r_goal);
    read(*it, "r_collision", c.reward.r_collision);
    read(*it, "r_step", c.reward.r_step);
    read(*it, "breach_c", c.reward.breach_c);
    read(*it, "cordon_radius", c.reward.cordon_radius);
  }
  if (const auto it = j.find("lidar"); it != j.end()) {
    read(*it, "n_rays", c.lidar.n_rays);
    read(*it, "max_range", c.lidar.max_range);
    read(*it, "history_len", c.lidar.history_len);
  }
  if (const auto it = j.find("sf"); it != j.end()) {
    read(*it, "amplitude_V0", c.sf.amplitude_V0);
    read(*it, "range_sigma", c.sf.range_sigma);
    read(*it, "influence_radius", c.sf.influence_radius);
    read(*it, "vision_half_angle", c.sf.vision_half_angle);
    read(*it, "relaxation_tau", c.sf.relaxation_tau);
    read(*it, "ellipse_step_time", c.sf.ellipse_step_time);
    read(*it, "fluctuation_std", c.sf.fluctuation_std);
    read(*it, "payload_emits_force", c.sf.payload_emits_force);
  }
  if (const auto it = j.find("arena"); it != j.end()) {
    read(*it, "width", c.arena.width);
    read(*it, "height", c.arena.height);
  }
  if (const auto it = j.find("escort_schedule"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::InvalidConfig, "escort_schedule must be an array");
    c.escort_schedule.clear();
    for (const auto& e : *it) {
      EscortScheduleEntry entry;
      read(e, "step", entry.step);
      read(e, "delta", entry.delta);
      c.escort_schedule.push_back(entry);
    }
  }
  return c;
}

json episode_config_to(const EpisodeConfig& c) {
  json schedule = json::array();
  for (const auto& e : c.escort_schedule) schedule.push_back({{"step", e.step}, {"delta", e.delta}});
  return {
      {"n_escorts", c.n_escorts},
      {"n_obstacles", c.n_obstacles},
      {"goal_distance", c.goal_distance},
      {"payload_speed", c.payload_speed},
      {"dt", c.dt},
      {"max_steps", c.max_steps},
      {"reward",
       {{"phi", c.reward.phi},
        {"r_goal", c.reward.r_goal},
        {"r_collision", c.reward.r_collision},
        {"r_step", c.reward.r_step},
        {"breach_c", c.reward.breach_c},
        {"cordon_radius", c.reward.cordon_radius}}},
      {"lidar",
       {{"n_rays", c.lidar.n_rays}, {"max_range", c.lidar.max_range}, {"history_len", c.lidar.history_len}}},
      {"sf",
       {{"amplitude_V0", c.sf.amplitude_V0},
        {"range_sigma", c.sf.range_sigma},
        {"influence_radius", c.sf.influence_radius},
        {"vision_half_angle", c.sf.vision_half_angle},
        {"relaxation_tau", c.sf.relaxation_tau},
        {"ellipse_step_time", c.sf.ellipse_step_time},
        {"fluctuation_std", c.sf.fluctuation_std},
        {"payload_emits_force", c.sf.payload_emits_force}}},
      {"transform_frequency", c.transform_frequency},
      {"arena", {{"width", c.arena.width}, {"height", c.arena.height}}},
      {"seed", c.seed},
      {"escort_schedule", schedule},
  };
}

WorldState world_from(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "world must be an object");
  WorldState w;
  read(j, "step_index", w.step_index);
  read(j, "payload_travel", w.payload_travel);
  read(j, "next_id", w.next_id);
  if (j.contains("goal")) w.goal = vec2_from(j["goal"]);
  if (j.contains("payload_path_direction")) w.payload_path_direction = vec2_from(j["payload_path_direction"]);
  if (j.contains("payload_start")) w.payload_start = vec2_from(j["payload_start"]);
  const auto bodies = j.find("bodies");
  if (bodies == j.end() || !bodies->is_array()) throw Error(ErrorCode::InvalidConfig, "world needs a bodies array");
  int payloads = 0;
  BodyId max_id = -1;
  for (const auto& jb : *bodies) {
    Body b;
    read(jb, "id", b.id);
    std::string kind;
    read(jb, "kind", kind);
    const auto parsed = body_kind_from_string(kind);
    if (!parsed) throw Error(ErrorCode::InvalidConfig, "unknown body kind '" + kind + "'");
    b.kind = *parsed;
    if (jb.contains("position")) b.position = vec2_from(jb["position"]);
    if (jb.contains("velocity")) b.velocity = vec2_from(jb["velocity"]);
    read(jb, "radius", b.radius);
    read(jb, "max_speed", b.max_speed);
    if (b.kind == BodyKind::Payload) ++payloads;
    if (b.kind == BodyKind::Obstacle) {
      ObstacleIntent intent;
      if (const auto it = jb.find("intent"); it != jb.end()) {
        if (it->contains("desired_direction")) intent.desired_direction = vec2_from((*it)["desired_direction"]);
        read(*it, "desired_speed", intent.desired_speed);
      }
      w.obstacle_intents[b.id] = intent;
    }
    max_id = std::max(max_id, b.id);
    w.bodies.push_back(b);
  }
  if (payloads != 1) throw Error(ErrorCode::InvalidConfig, "world must contain exactly one payload");
  w.next_id = std::max(w.next_id, max_id + 1);
  return w;
}

void write_world(JsonWriter& w, const WorldState& world) {
  auto pair = [&](const char* k, Vec2 v) { w.key(k).begin_array().value(v.x).value(v.y).end_array(); };
  w.begin_object();
  w.key("step_index").value(world.step_index);
  pair("goal", world.goal);
  pair("payload_path_direction", world.payload_path_direction);
  pair("payload_start", world.payload_start);
  w.key("payload_travel").value(world.payload_travel);
  w.key("next_id").value(world.next_id);
  w.key("bodies").begin_array();
  for (const Body& b : world.bodies) {
    w.begin_object();
    w.key("id").value(b.id);
    w.key("kind").value(to_string(b.kind));
    pair("position", b.position);
    pair("velocity", b.velocity);
    w.key("radius").value(b.radius);
    w.key("max_speed").value(b.max_speed);
    if (const auto it = world.obstacle_intents.find(b.id); it != world.obstacle_intents.end()) {
      w.key("intent").begin_object();
      pair("desired_direction", it->second.desired_direction);
      w.key("desired_speed").value(it->second.desired_speed);
      w.end_object();
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

}  // namespace detail

EpisodeConfig episode_config_from_json(std::string_view text) {
  EpisodeConfig c = detail::episode_config_from(detail::parse_json(text));
  c.validate();
  return c;
}

std::string to_json(const EpisodeConfig& config) { return detail::episode_config_to(config).dump(); }

TrainerConfig trainer_config_from_json(std::string_view text) {
  const auto j = detail::parse_json(text);
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "trainer config must be an object");
  TrainerConfig c;
  detail::read(j, "gamma", c.gamma);
  detail::read(j, "lambda", c.lambda);
  detail::read(j, "clip_epsilon", c.clip_epsilon);
  detail::read(j, "learning_rate", c.learning_rate);
  detail::read(j, "entropy_coef", c.entropy_coef);
  detail::read(j, "value_coef", c.value_coef);
  detail::read(j, "batch_size", c.batch_size);
  detail::read(j, "minibatch_size", c.minibatch_size);
  detail::read(j, "epochs_per_batch", c.epochs_per_batch);
  detail::read(j, "n_parallel_envs", c.n_parallel_envs);
  detail::read(j, "iterations", c.iterations);
  detail::read(j, "max_grad_norm", c.max_grad_norm);
  detail::read(j, "chunk_size", c.chunk_size);
  c.validate();
  return c;
}

std::string to_json(const TrainerConfig& c) {
  const detail::json j = {
      {"gamma", c.gamma},
      {"lambda", c.lambda},
      {"clip_epsilon", c.clip_epsilon},
      {"learning_rate", c.learning_rate},
      {"entropy_coef", c.entropy_coef},
      {"value_coef", c.value_coef},
      {"batch_size", c.batch_size},
      {"minibatch_size", c.minibatch_size},
      {"epochs_per_batch", c.epochs_per_batch},
      {"n_parallel_envs", c.n_parallel_envs},
      {"iterations", c.iterations},
      {"max_grad_norm", c.max_grad_norm},
      {"chunk_size", c.chunk_size},
  };
  return j.dump();
}

WorldState world_from_json(std::string_view text) { return detail::world_from(detail::parse_json(text)); }

std::string to_json(const WorldState& world) {
  JsonWriter w;
  detail::write_world(w, world);
  return w.take();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace escortsim
