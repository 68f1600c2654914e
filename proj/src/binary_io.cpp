#include "redcert/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "redcert/error.hpp"

namespace redcert::binio {

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  v = to_le(v);
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + 4);
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + offset, 4);
  return to_le(v);
}

void require_words(std::span<const std::byte> bytes) {
  if (bytes.size() % 4 != 0) {
    throw FormatError("binary stream length " + std::to_string(bytes.size()) +
                      " is not a multiple of 4");
  }
}

}  // namespace

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

std::vector<std::byte> encode_f32(std::span<const float> values) {
  std::vector<std::byte> out;
  out.reserve(values.size() * 4);
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

std::vector<float> decode_f32(std::span<const std::byte> bytes) {
  require_words(bytes);
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32(bytes, 4 * i));
  return out;
}

std::vector<std::byte> encode_u32(std::span<const std::uint32_t> values) {
  std::vector<std::byte> out;
  out.reserve(values.size() * 4);
  for (std::uint32_t v : values) put_u32(out, v);
  return out;
}

std::vector<std::uint32_t> decode_u32(std::span<const std::byte> bytes) {
  require_words(bytes);
  std::vector<std::uint32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_u32(bytes, 4 * i);
  return out;
}

}  // namespace redcert::binio
