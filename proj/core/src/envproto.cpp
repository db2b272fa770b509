#include "escortsim/envproto.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "escortsim/error.hpp"
#include "json_internal.hpp"

namespace escortsim {

struct SessionAccess {
  static std::string reset(Session& s, const detail::json& req) {
    EpisodeConfig cfg = s.base_config_;
    if (const auto it = req.find("config"); it != req.end()) cfg = detail::episode_config_from(*it, cfg);
    std::uint64_t seed = cfg.seed;
    if (const auto it = req.find("seed"); it != req.end()) {
      if (!it->is_number_integer()) throw Error(ErrorCode::InvalidConfig, "seed must be an integer");
      seed = it->is_number_unsigned() ? it->get<std::uint64_t>() : static_cast<std::uint64_t>(it->get<std::int64_t>());
    }
    // Construct into a temporary so a bad config leaves the old episode intact.
    Episode ep(cfg, seed);
    const StepOutcome first = ep.reset();
    s.episode_.emplace(std::move(ep));
    return observation_message(first, true);
  }

  static std::string step(Session& s, const detail::json& req) {
    if (!s.episode_) throw Error(ErrorCode::NoEpisode, "no episode; send reset first");
    if (s.episode_->done()) throw Error(ErrorCode::EpisodeDone, "episode is done; send reset");
    const auto it = req.find("actions");
    if (it == req.end() || !it->is_array()) throw Error(ErrorCode::CorruptAction, "actions must be an array");
    std::vector<Vec2> actions;
    actions.reserve(it->size());
    for (const auto& a : *it) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        throw Error(ErrorCode::CorruptAction, "each action must be [vx, vy]");
      }
      actions.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return observation_message(s.episode_->step(actions), false);
  }

  static std::string state(Session& s) {
    if (!s.episode_) throw Error(ErrorCode::NoEpisode, "no episode; send reset first");
    return snapshot_message(s.episode_->world());
  }
};

Session::Session(EpisodeConfig base_config) : base_config_(std::move(base_config)) {}

std::string Session::handle(std::string_view line) {
  detail::json req;
  try {
    req = detail::parse_json(line);
  } catch (const Error& e) {
    return error_message("parse", e.what());
  }
  if (!req.is_object() || !req.contains("type") || !req["type"].is_string()) {
    return error_message("parse", "request must be an object with a string 'type'");
  }
  const std::string type = req["type"].get<std::string>();
  try {
    if (type == "reset") return SessionAccess::reset(*this, req);
    if (type == "step") return SessionAccess::step(*this, req);
    if (type == "state") return SessionAccess::state(*this);
    if (type == "close") {
      closed_ = true;
      return R"({"type":"ack"})";
    }
    return error_message("unknown_type", "unknown request type '" + type + "'");
  } catch (const Error& e) {
    return error_message(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_message("internal", e.what());
  }
}

std::string observation_message(const StepOutcome& outcome, bool include_version) {
  JsonWriter w;
  w.begin_object();
  w.key("type").value("observation");
  if (include_version) w.key("version").value(kProtocolVersion);
  w.key("step_index").value(outcome.step_index);
  w.key("escort_ids").begin_array();
  for (BodyId id : outcome.escort_ids) w.value(id);
  w.end_array();
  w.key("obs").begin_array();
  for (const auto& o : outcome.observations) w.array(o);
  w.end_array();
  w.key("reward").value(outcome.reward);
  w.key("done").value(outcome.done);
  w.key("event").value(to_string(outcome.event));
  w.key("breach_count").value(outcome.breach_count);
  w.end_object();
  return w.take();
}

std::string snapshot_message(const WorldState& world) {
  JsonWriter w;
  w.begin_object();
  w.key("type").value("snapshot");
  w.key("world");
  detail::write_world(w, world);
  w.end_object();
  return w.take();
}

std::string error_message(std::string_view code, std::string_view message) {
  JsonWriter w;
  w.begin_object().key("type").value("error").key("code").value(code).key("message").value(message).end_object();
  return w.take();
}

void serve_stream(std::istream& in, std::ostream& out, const EpisodeConfig& base_config) {
  Session session(base_config);
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << session.handle(line) << '\n';
    out.flush();
    if (!out) return;
  }
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(int fd, const EpisodeConfig& base_config) {
  Session session(base_config);
  std::string buffer;
  char chunk[65536];
  while (!session.closed()) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; !session.closed() && (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!send_all(fd, session.handle(line) + '\n')) {
        ::close(fd);
        return;
      }
    }
    buffer.erase(0, start);
  }
  ::close(fd);
}

}  // namespace

void serve_tcp(const std::string& host, std::uint16_t port, const EpisodeConfig& base_config, int max_connections) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::Io, std::string("getaddrinfo: ") + ::gai_strerror(rc));
  }
  int listener = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    listener = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (listener < 0) continue;
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener, a->ai_addr, a->ai_addrlen) == 0 && ::listen(listener, 16) == 0) break;
    ::close(listener);
    listener = -1;
  }
  ::freeaddrinfo(res);
  if (listener < 0) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + port_text);

  std::vector<std::jthread> workers;
  int accepted = 0;
  while (max_connections <= 0 || accepted < max_connections) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      ::close(listener);
      throw Error(ErrorCode::Io, std::string("accept: ") + std::strerror(errno));
    }
    ++accepted;
    workers.emplace_back([fd, &base_config] { serve_connection(fd, base_config); });
  }
  ::close(listener);
}

DecodedObservation decode_observation(std::string_view line) {
  const detail::json j = detail::parse_json(line);
  if (!j.is_object() || j.value("type", std::string{}) != "observation") {
    throw Error(ErrorCode::Parse, "not an observation message: " + std::string(line.substr(0, 200)));
  }
  DecodedObservation d;
  try {
    d.obs = j.at("obs").get<std::vector<std::vector<double>>>();
    d.reward = j.at("reward").get<double>();
    d.done = j.at("done").get<bool>();
    d.event = j.at("event").get<std::string>();
    d.breach_count = j.at("breach_count").get<int>();
    d.step_index = j.at("step_index").get<int>();
  } catch (const detail::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  return d;
}

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool matches(const DecodedObservation& d, const StepOutcome& o) {
  if (d.done != o.done || d.event != to_string(o.event) || d.breach_count != o.breach_count ||
      d.step_index != o.step_index || !same_bits(d.reward, o.reward) || d.obs.size() != o.observations.size()) {
    return false;
  }
  for (std::size_t i = 0; i < d.obs.size(); ++i) {
    if (d.obs[i].size() != o.observations[i].size()) return false;
    for (std::size_t k = 0; k < d.obs[i].size(); ++k) {
      if (!same_bits(d.obs[i][k], o.observations[i][k])) return false;
    }
  }
  return true;
}

std::string step_request(const std::vector<Vec2>& actions) {
  JsonWriter w;
  w.begin_object().key("type").value("step").key("actions").begin_array();
  for (Vec2 a : actions) w.begin_array().value(a.x).value(a.y).end_array();
  w.end_array().end_object();
  return w.take();
}

}  // namespace

bool compare_wire_and_direct(std::uint64_t seed, const EpisodeConfig& config,
                             std::span<const std::vector<Vec2>> wire_script,
                             std::span<const std::vector<Vec2>> direct_script) {
  try {
    Session session(config);
    JsonWriter reset;
    reset.begin_object().key("type").value("reset").key("seed").value(static_cast<std::int64_t>(seed)).end_object();
    // Seeds above 2^63 travel as their two's-complement value.
    Episode direct(config, seed);
    if (!matches(decode_observation(session.handle(reset.str())), direct.reset())) return false;
    const std::size_t n = std::min(wire_script.size(), direct_script.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (direct.done()) return true;
      const StepOutcome o = direct.step(direct_script[i]);
      if (!matches(decode_observation(session.handle(step_request(wire_script[i]))), o)) return false;
    }
    return wire_script.size() == direct_script.size() || direct.done();
  } catch (const Error&) {
    return false;
  }
}

bool wire_equivalence_check(std::uint64_t seed, const EpisodeConfig& config,
                            std::span<const std::vector<Vec2>> script) {
  return compare_wire_and_direct(seed, config, script, script);
}

}  // namespace escortsim
