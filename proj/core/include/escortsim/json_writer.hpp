#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace escortsim {

/// Shortest decimal text that parses back to the identical double.
/// Throws Error(InvalidArgument) for NaN or infinity.
std::string encode_float(double value);
void append_float(std::string& out, double value);

/// Append-only compact JSON emitter. Numbers go through encode_float so every
/// double survives a text round trip bit for bit.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();
  JsonWriter& array(std::span<const double> values);

  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void separator();
  std::string out_;
  bool need_comma_{false};
};

}  // namespace escortsim
