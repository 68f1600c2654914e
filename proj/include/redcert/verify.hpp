#pragma once

#include <optional>
#include <string>
#include <vector>

#include "redcert/certificate.hpp"
#include "redcert/model.hpp"
#include "redcert/segmentation.hpp"

namespace redcert {

// Tolerance between a certificate's pinned baseline and a fresh prediction.
inline constexpr double kBaselineTolerance = 1e-4;

struct CheckedCondition {
  std::string condition;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct VerificationReport {
  enum class Verdict { accepted, rejected, rejected_as_disjoint };
  Verdict verdict = Verdict::rejected;
  std::vector<CheckedCondition> checked_conditions;
  std::optional<DisjointCertificate> counter_certificate;
};

std::string_view verdict_name(VerificationReport::Verdict v);
std::string format_report(const VerificationReport& report);

// Def.-3 check. Throws CertificateMismatch when the digest, model id or pinned
// baseline does not match (a stale or misaddressed certificate, not a verdict).
VerificationReport verify_attribution(const AttributionCertificate& cert, const Model& model,
                                      const InputVector& input);

// Structural checks first (disjoint sets, delta range, index range) without
// model calls; then exactly two evaluations for the four bounds.
VerificationReport verify_disjoint(const DisjointCertificate& cert, const Model& model,
                                   const InputVector& input);

// Step 1: exact redaction check on cert.s. Step 2: region-growing search over
// cert.segments for a disjoint split; finding one rejects the claim and
// attaches the split as a counter-certificate. Throws FormatError when
// cert.segments does not partition cert.s. Segment adjacency is derived from
// seg / adj: two certificate segments touch if the segments they cover are
// equal or adjacent.
VerificationReport verify_overlap(const OverlapCertificate& cert, const Model& model,
                                  const InputVector& input, const Segmentation& seg,
                                  const AdjacencyGraph& adj, double tau = 0.0);

// Dispatches on the certificate kind; seg/adj are only consulted for overlap.
VerificationReport verify_certificate(const Certificate& cert, const Model& model,
                                      const InputVector& input, const Segmentation& seg,
                                      const AdjacencyGraph& adj, double tau = 0.0);

}  // namespace redcert
