#pragma once

#include <json.hpp>

#include "escortsim/episode.hpp"
#include "escortsim/json_writer.hpp"
#include "escortsim/training.hpp"
#include "escortsim/world.hpp"

namespace escortsim::detail {

using nlohmann::json;

/// Parses text; throws Error(Parse) on malformed input.
json parse_json(std::string_view text);

/// Fields present in `j` override those of `base`. Not validated.
EpisodeConfig episode_config_from(const json& j, EpisodeConfig base = {});
json episode_config_to(const EpisodeConfig& config);

WorldState world_from(const json& j);
void write_world(JsonWriter& w, const WorldState& world);

Vec2 vec2_from(const json& j);

}  // namespace escortsim::detail
