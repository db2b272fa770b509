#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "escortsim/episode.hpp"

namespace escortsim {

inline constexpr int kProtocolVersion = 1;

/// One client session of the line protocol. Every request line yields exactly
/// one response line (without the trailing newline).
///
/// Requests:  {"type":"reset","seed":S,"config":{...}?}
///            {"type":"step","actions":[[vx,vy],...]}
///            {"type":"state"}   {"type":"close"}
/// Responses: observation, snapshot, ack, or
///            {"type":"error","code":C,"message":M}
class Session {
 public:
  explicit Session(EpisodeConfig base_config);

  std::string handle(std::string_view line);
  bool closed() const { return closed_; }
  const Episode* episode() const { return episode_ ? &*episode_ : nullptr; }

 private:
  friend struct SessionAccess;

  EpisodeConfig base_config_;
  std::optional<Episode> episode_;
  bool closed_{false};
};

std::string observation_message(const StepOutcome& outcome, bool include_version);
std::string snapshot_message(const WorldState& world);
std::string error_message(std::string_view code, std::string_view message);

/// Runs sessions over line-oriented streams until close or EOF.
void serve_stream(std::istream& in, std::ostream& out, const EpisodeConfig& base_config);

/// Accepts TCP connections on host:port, one session per connection, each on
/// its own thread. Returns only on listen failure (throws Error(Io)).
/// `max_connections` > 0 stops after that many sessions have finished.
void serve_tcp(const std::string& host, std::uint16_t port, const EpisodeConfig& base_config,
               int max_connections = 0);

/// Decoded step response used by conformance checks and clients.
struct DecodedObservation {
  std::vector<std::vector<double>> obs;
  double reward{0.0};
  bool done{false};
  std::string event;
  int breach_count{0};
  int step_index{0};
};

/// Throws Error(Parse) if the line is not an observation message.
DecodedObservation decode_observation(std::string_view line);

/// Drives `wire_script` through a Session and `direct_script` through an
/// in-process Episode; true iff every observation, reward and event matches
/// bit for bit. Scripts stop early once the episode is done.
bool compare_wire_and_direct(std::uint64_t seed, const EpisodeConfig& config,
                             std::span<const std::vector<Vec2>> wire_script,
                             std::span<const std::vector<Vec2>> direct_script);

bool wire_equivalence_check(std::uint64_t seed, const EpisodeConfig& config,
                            std::span<const std::vector<Vec2>> script);

}  // namespace escortsim
