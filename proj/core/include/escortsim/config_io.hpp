#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "escortsim/episode.hpp"
#include "escortsim/training.hpp"
#include "escortsim/world.hpp"

namespace escortsim {

// JSON documents use the field names of the C++ structs. Missing fields keep
// their defaults; unknown fields are ignored. Parsed configs are validated.

EpisodeConfig episode_config_from_json(std::string_view text);
std::string to_json(const EpisodeConfig& config);

TrainerConfig trainer_config_from_json(std::string_view text);
std::string to_json(const TrainerConfig& config);

/// Full body table plus payload path state.
WorldState world_from_json(std::string_view text);
std::string to_json(const WorldState& world);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace escortsim
