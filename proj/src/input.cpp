#include "redcert/input.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <string>

#include "redcert/binary_io.hpp"
#include "redcert/error.hpp"

namespace redcert {

std::string sha256_hex(std::span<const std::byte> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

InputVector::InputVector(std::vector<float> values, std::optional<Geometry> geometry)
    : values_(std::move(values)), geometry_(geometry) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DimensionError("input value at index " + std::to_string(i) + " is not finite");
    }
  }
  if (geometry_ && geometry_->size() != values_.size()) {
    throw DimensionError("geometry " + std::to_string(geometry_->height) + "x" +
                         std::to_string(geometry_->width) + "x" +
                         std::to_string(geometry_->channels) + " does not match n = " +
                         std::to_string(values_.size()));
  }
  digest_ = sha256_hex(to_bytes());
}

std::vector<std::byte> InputVector::to_bytes() const { return binio::encode_f32(values_); }

InputVector InputVector::from_bytes(std::span<const std::byte> bytes,
                                    std::optional<Geometry> geometry) {
  return InputVector(binio::decode_f32(bytes), geometry);
}

void InputVector::save(const std::filesystem::path& path) const {
  binio::write_file(path, to_bytes());
}

InputVector InputVector::load(const std::filesystem::path& path,
                              std::optional<Geometry> geometry) {
  return from_bytes(binio::read_file(path), geometry);
}

void validate_softmax(const SoftmaxVector& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.probs.size(); ++i) {
    const double p = s.probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw EvaluationError("softmax entry " + std::to_string(i) + " outside [0,1]");
    }
    total += p;
  }
  if (s.probs.empty() || std::abs(total - 1.0) > 1e-5) {
    throw EvaluationError("softmax entries sum to " + std::to_string(total));
  }
}

}  // namespace redcert
