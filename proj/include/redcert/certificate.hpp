#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "redcert/index_set.hpp"
#include "redcert/input.hpp"

namespace redcert {

// Claim: redacting s drives label's softmax to at most delta * p.
struct AttributionCertificate {
  std::string model_id;
  std::string input_digest;
  LabelId label;
  double p = 0.0;
  double delta = 0.0;
  double v = 0.0;
  IndexSet s;

  friend bool operator==(const AttributionCertificate&, const AttributionCertificate&) = default;
};

// Claim: s1 collapses l1 while preserving l2, s2 the converse, s1 and s2 disjoint.
struct DisjointCertificate {
  std::string model_id;
  std::string input_digest;
  LabelId l1;
  LabelId l2;
  double p1 = 0.0;
  double p2 = 0.0;
  double delta = 0.0;
  double v = 0.0;
  IndexSet s1;
  IndexSet s2;
  std::optional<std::vector<IndexSet>> segments1;
  std::optional<std::vector<IndexSet>> segments2;

  friend bool operator==(const DisjointCertificate&, const DisjointCertificate&) = default;
};

// Claim: one redaction s collapses both labels and the pair is not disjoint.
// segments partitions s; the heuristic verifier searches over them.
struct OverlapCertificate {
  std::string model_id;
  std::string input_digest;
  LabelId l1;
  LabelId l2;
  double p1 = 0.0;
  double p2 = 0.0;
  double delta = 0.0;
  double v = 0.0;
  IndexSet s;
  std::vector<IndexSet> segments;

  friend bool operator==(const OverlapCertificate&, const OverlapCertificate&) = default;
};

using Certificate = std::variant<AttributionCertificate, DisjointCertificate, OverlapCertificate>;

inline constexpr std::string_view kCertificateSchemaVersion = "1";

// "attribution" | "disjoint" | "overlap"
std::string_view certificate_kind(const Certificate& cert);

// Canonical UTF-8 JSON: stable field order, index sets as {"rle": [[start, length], ...]},
// doubles printed with round-trip precision. Deterministic byte output.
std::string encode_certificate(const Certificate& cert);

// Throws FormatError on malformed JSON, unknown schema version or kind,
// unknown or missing fields, and malformed or overflowing run lists.
Certificate decode_certificate(std::string_view text);

Certificate load_certificate(const std::string& path);
void save_certificate(const Certificate& cert, const std::string& path);

}  // namespace redcert
