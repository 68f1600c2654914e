#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace redcert {

// Grid layout of an image-like input: channel-last, row-major.
struct Geometry {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;

  [[nodiscard]] std::uint64_t size() const {
    return std::uint64_t{height} * width * channels;
  }
  [[nodiscard]] std::uint64_t pixels() const { return std::uint64_t{height} * width; }
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

// Lowercase hex SHA-256 of a byte stream.
std::string sha256_hex(std::span<const std::byte> bytes);

// Immutable n-dimensional input. Values are stored as float32 because that
// is the on-disk and on-wire representation the digest is computed over.
class InputVector {
 public:
  explicit InputVector(std::vector<float> values, std::optional<Geometry> geometry = std::nullopt);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::span<const float> values() const { return values_; }
  [[nodiscard]] const std::optional<Geometry>& geometry() const { return geometry_; }
  [[nodiscard]] const std::string& digest() const { return digest_; }

  // Little-endian float32 byte stream (the file and digest representation).
  [[nodiscard]] std::vector<std::byte> to_bytes() const;
  static InputVector from_bytes(std::span<const std::byte> bytes,
                                std::optional<Geometry> geometry = std::nullopt);

  void save(const std::filesystem::path& path) const;
  static InputVector load(const std::filesystem::path& path,
                          std::optional<Geometry> geometry = std::nullopt);

 private:
  std::vector<float> values_;
  std::optional<Geometry> geometry_;
  std::string digest_;
};

struct SoftmaxVector {
  std::vector<double> probs;

  [[nodiscard]] std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

// Throws EvaluationError unless every entry is in [0,1] and they sum to 1
// within 1e-5.
void validate_softmax(const SoftmaxVector& s);

struct LabelId {
  std::uint32_t index = 0;
  std::optional<std::string> name;

  friend bool operator==(const LabelId&, const LabelId&) = default;
};

}  // namespace redcert
