#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace escortsim {

enum class ErrorCode {
  InvalidArgument,
  InvalidConfig,
  CorruptAction,       // non-finite velocity command
  DegenerateGeometry,  // coincident bodies in the social force model
  UnknownBody,
  OverDense,           // spawn rejection sampling exhausted
  ActionArity,
  EpisodeDone,
  NoEpisode,
  ShapeMismatch,
  NonFiniteLoss,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace escortsim
