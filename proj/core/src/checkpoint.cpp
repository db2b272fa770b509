#include "escortsim/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "escortsim/error.hpp"

namespace escortsim {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'S', 'C', 'S', 'I', 'M', 'C', 'K'};

template <typename U>
void put(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename U>
U get(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw Error(ErrorCode::Io, "truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

void fnv(std::uint64_t& h, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
}

std::array<std::int32_t, 7> shape_fields(const ConvNetShape& s) {
  return {s.in_channels, s.signal_len, s.conv1_filters, s.conv2_filters, s.kernel, s.pool, s.hidden};
}

}  // namespace

std::uint64_t lidar_hash(const LidarConfig& lidar) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv(h, static_cast<std::uint32_t>(lidar.n_rays), 4);
  fnv(h, std::bit_cast<std::uint64_t>(lidar.max_range), 8);
  fnv(h, static_cast<std::uint32_t>(lidar.history_len), 4);
  return h;
}

void write_checkpoint(std::ostream& out, const NetworkParams& params, const LidarConfig& lidar) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, lidar_hash(lidar));
  for (std::int32_t f : shape_fields(params.shape())) put<std::uint32_t>(out, static_cast<std::uint32_t>(f));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors().size()));
  const auto values = params.values();
  for (const TensorInfo& t : params.tensors()) {
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(values[t.offset + i]));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const LidarConfig& lidar) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, params, lidar);
}

NetworkParams read_checkpoint(std::istream& in, const LidarConfig& expected_lidar) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::Io, "not an escortsim checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::Io, "unsupported checkpoint version " + std::to_string(version));
  }
  if (get<std::uint64_t>(in) != lidar_hash(expected_lidar)) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint was trained with a different lidar configuration");
  }
  ConvNetShape s;
  std::array<std::int32_t*, 7> fields{&s.in_channels, &s.signal_len, &s.conv1_filters, &s.conv2_filters,
                                      &s.kernel, &s.pool, &s.hidden};
  for (auto* f : fields) *f = static_cast<std::int32_t>(get<std::uint32_t>(in));
  const ConvNetShape expected = ConvNetShape::for_lidar(expected_lidar);
  if (s.in_channels != expected.in_channels || s.signal_len != expected.signal_len) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint input shape does not match the lidar configuration");
  }
  NetworkParams params(s);
  if (get<std::uint32_t>(in) != params.tensors().size()) throw Error(ErrorCode::Io, "unexpected tensor count");
  auto values = params.values();
  for (const TensorInfo& t : params.tensors()) {
    const auto ndims = get<std::uint32_t>(in);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (ndims != 2 || rows != static_cast<std::uint64_t>(t.rows) || cols != static_cast<std::uint64_t>(t.cols)) {
      throw Error(ErrorCode::Io, "tensor " + t.name + " has an unexpected shape");
    }
    for (std::size_t i = 0; i < t.size(); ++i) values[t.offset + i] = std::bit_cast<double>(get<std::uint64_t>(in));
  }
  return params;
}

NetworkParams load_checkpoint(const std::filesystem::path& path, const LidarConfig& expected_lidar) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  return read_checkpoint(in, expected_lidar);
}

}  // namespace escortsim
