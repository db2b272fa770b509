#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "escortsim/network.hpp"
#include "escortsim/sensing.hpp"

namespace escortsim {

// Binary layout, little-endian:
//   char[8]  magic "ESCSIMCK"
//   u32      version (1)
//   u64      lidar hash (FNV-1a over n_rays, max_range bits, history_len)
//   i32 x 7  ConvNetShape fields in declaration order
//   u32      tensor count
//   per tensor: u32 ndims (2), u64 rows, u64 cols, rows*cols f64 row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t lidar_hash(const LidarConfig& lidar);

void write_checkpoint(std::ostream& out, const NetworkParams& params, const LidarConfig& lidar);
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const LidarConfig& lidar);

/// Throws Error(Io) on malformed input and Error(ShapeMismatch) when the
/// stored lidar hash differs from `expected_lidar`.
NetworkParams read_checkpoint(std::istream& in, const LidarConfig& expected_lidar);
NetworkParams load_checkpoint(const std::filesystem::path& path,
                              const LidarConfig& expected_lidar);

}  // namespace escortsim
