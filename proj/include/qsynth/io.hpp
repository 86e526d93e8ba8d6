#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsynth {

/* FNV-1a, 64 bit; content keys for cached artifacts */
class Hasher {
public:
  Hasher& bytes(const void* data, std::size_t size);
  Hasher& u64(std::uint64_t v);
  Hasher& f64(double v);
  Hasher& str(std::string_view s);
  Hasher& f64s(std::span<const double> v);
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string to_hex(std::uint64_t v);

/* little-endian binary writer with varint support */
class BinaryWriter {
public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag, std::uint32_t version);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void f64s(std::span<const double> v);
  void varint(std::uint64_t v);
  void str(std::string_view s);

private:
  std::ostream& out_;
};

class BinaryReader {
public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  /* throws ConfigError on tag or version mismatch */
  void expect_magic(std::string_view tag, std::uint32_t version);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::vector<double> f64s();
  std::uint64_t varint();
  std::string str();

private:
  void read(void* dst, std::size_t n);
  std::istream& in_;
};

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace qsynth
