#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "notedx/error.hpp"

namespace notedx::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order, which must be little-endian");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  void put_doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    put_bytes(v.data(), v.size() * sizeof(double));
  }

 private:
  std::ostream& out_;
};

/// Reads fail with TruncatedFile when the stream ends early.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T value{};
    get_bytes(&value, sizeof(T));
    return value;
  }
  void get_bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(ErrorCode::TruncatedFile, "file ends before the expected data");
    }
  }
  std::string get_string(std::size_t max_len = 1u << 24) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) fail(ErrorCode::CorruptFile, "string length field is implausible");
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
  std::vector<double> get_doubles(std::size_t max_len = std::size_t{1} << 34) {
    const auto n = get<std::uint64_t>();
    if (n > max_len) fail(ErrorCode::CorruptFile, "array length field is implausible");
    std::vector<double> v(n);
    get_bytes(v.data(), n * sizeof(double));
    return v;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

/// Magic + version header shared by the binary formats.
inline void write_header(BinaryWriter& w, const char (&magic)[5], std::uint32_t version) {
  w.put_bytes(magic, 4);
  w.put<std::uint32_t>(version);
}

inline void read_header(BinaryReader& r, const char (&magic)[5], std::uint32_t version) {
  char seen[4];
  r.get_bytes(seen, 4);
  if (std::memcmp(seen, magic, 4) != 0) fail(ErrorCode::CorruptFile, "bad magic bytes");
  const auto v = r.get<std::uint32_t>();
  if (v != version) {
    fail(ErrorCode::VersionMismatch, "file format version " + std::to_string(v) +
                                         ", this build reads version " + std::to_string(version));
  }
}

}  // namespace notedx::io
