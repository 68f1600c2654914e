#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

// Little-endian float32 / uint32 streams used by tensor, segmentation and
// attribution files.
namespace redcert::binio {

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

std::vector<std::byte> encode_f32(std::span<const float> values);
std::vector<float> decode_f32(std::span<const std::byte> bytes);
std::vector<std::byte> encode_u32(std::span<const std::uint32_t> values);
std::vector<std::uint32_t> decode_u32(std::span<const std::byte> bytes);

}  // namespace redcert::binio
