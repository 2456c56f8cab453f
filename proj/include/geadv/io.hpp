#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geadv/tensor.hpp"

namespace geadv {

using Json = nlohmann::json;

// Tensor container: "GETF" magic, version byte, dtype byte (0 = float32
// little-endian), ndim byte, ndim u32 little-endian dims, row-major payload.
namespace getf {

constexpr char kMagic[4] = {'G', 'E', 'T', 'F'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

inline void write(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(kDtypeF32));
  os.put(static_cast<char>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) {
    uint32_t d = static_cast<uint32_t>(t.dim(i));
    unsigned char b[4] = {static_cast<unsigned char>(d & 0xff),
                          static_cast<unsigned char>((d >> 8) & 0xff),
                          static_cast<unsigned char>((d >> 16) & 0xff),
                          static_cast<unsigned char>((d >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  // float payload is written verbatim; the build targets little-endian hosts
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(t.data()), t.numel() * 4);
  if (!os) throw ParseError("short write: " + path.string());
}

inline Tensor read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4)) throw ParseError("truncated header: " + path.string());
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad magic: " + path.string());
  int version = is.get();
  if (version != kVersion) {
    throw ParseError("unsupported version " + std::to_string(version) + ": " + path.string());
  }
  int dtype = is.get();
  if (dtype != kDtypeF32) {
    throw ParseError("unsupported dtype " + std::to_string(dtype) + ": " + path.string());
  }
  int ndim = is.get();
  if (ndim < 0 || ndim > 8) throw ParseError("bad ndim: " + path.string());
  std::vector<int> shape(static_cast<size_t>(ndim));
  for (int i = 0; i < ndim; ++i) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated dims: " + path.string());
    uint32_t d = uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
    shape[static_cast<size_t>(i)] = static_cast<int>(d);
  }
  Tensor t(shape);
  if (!is.read(reinterpret_cast<char*>(t.data()), t.numel() * 4)) {
    throw ParseError("truncated payload: " + path.string());
  }
  return t;
}

}  // namespace getf

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  Json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for write: " + path.string());
  os << j.dump(2) << "\n";
}

/// FNV-1a hash of a canonical (key-sorted) JSON dump, as a hex string. Used to
/// stamp resolved configurations into report metadata.
inline std::string json_fingerprint(const Json& j) {
  const std::string s = j.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace geadv
