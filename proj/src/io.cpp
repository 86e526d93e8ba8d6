#include "qsynth/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qsynth/errors.hpp"

namespace qsynth {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

Hasher& Hasher::bytes(const void* data, std::size_t size) {
  auto p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ull;
  }
  return *this;
}

Hasher& Hasher::u64(std::uint64_t v) { return bytes(&v, sizeof v); }

Hasher& Hasher::f64(double v) {
  if (v == 0.0)
    v = 0.0; /* -0.0 and 0.0 hash alike */
  return bytes(&v, sizeof v);
}

Hasher& Hasher::str(std::string_view s) {
  u64(s.size());
  return bytes(s.data(), s.size());
}

Hasher& Hasher::f64s(std::span<const double> v) {
  u64(v.size());
  for (double x : v)
    f64(x);
  return *this;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string Hasher::hex() const { return to_hex(state_); }

void BinaryWriter::magic(std::string_view tag, std::uint32_t version) {
  out_.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  u32(version);
}

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
void BinaryWriter::u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::i64(std::int64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

void BinaryWriter::f64s(std::span<const double> v) {
  u64(v.size());
  for (double x : v)
    f64(x);
}

void BinaryWriter::varint(std::uint64_t v) {
  while (v >= 0x80) {
    out_.put(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out_.put(static_cast<char>(v));
}

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryReader::read(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw ConfigError("unexpected end of file");
}

void BinaryReader::expect_magic(std::string_view tag, std::uint32_t version) {
  std::string got(tag.size(), '\0');
  read(got.data(), got.size());
  if (got != tag)
    throw ConfigError("bad file magic: expected " + std::string(tag));
  std::uint32_t v = u32();
  if (v != version)
    throw ConfigError("unsupported " + std::string(tag) + " version " + std::to_string(v));
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  read(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  read(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  read(&v, sizeof v);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  read(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  read(&v, sizeof v);
  return v;
}

std::vector<double> BinaryReader::f64s() {
  std::uint64_t n = u64();
  if (n > (1ull << 32))
    throw ConfigError("corrupt vector length");
  std::vector<double> v(n);
  for (auto& x : v)
    x = f64();
  return v;
}

std::uint64_t BinaryReader::varint() {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    std::uint8_t b = u8();
    v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if (!(b & 0x80))
      return v;
  }
  throw ConfigError("corrupt varint");
}

std::string BinaryReader::str() {
  std::uint64_t n = u64();
  if (n > (1ull << 24))
    throw ConfigError("corrupt string length");
  std::string s(n, '\0');
  read(s.data(), n);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ConfigError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw ConfigError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace qsynth
