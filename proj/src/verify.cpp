#include "redcert/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "redcert/error.hpp"
#include "redcert/search.hpp"

namespace redcert {

std::string_view verdict_name(VerificationReport::Verdict v) {
  switch (v) {
    case VerificationReport::Verdict::accepted:
      return "accepted";
    case VerificationReport::Verdict::rejected:
      return "rejected";
    case VerificationReport::Verdict::rejected_as_disjoint:
      return "rejected-as-disjoint";
  }
  return "?";
}

std::string format_report(const VerificationReport& report) {
  std::ostringstream out;
  out << "verdict: " << verdict_name(report.verdict) << '\n';
  out << std::setprecision(10);
  for (const auto& c : report.checked_conditions) {
    out << (c.pass ? "  PASS  " : "  FAIL  ") << c.condition << "  measured=" << c.measured
        << "  bound=" << c.bound << '\n';
  }
  if (report.counter_certificate) {
    out << "  counter-certificate: |S1| = " << report.counter_certificate->s1.size()
        << ", |S2| = " << report.counter_certificate->s2.size() << '\n';
  }
  return out.str();
}

namespace {

using Verdict = VerificationReport::Verdict;

void check_address(const std::string& model_id, const std::string& digest, const Model& model,
                   const InputVector& input) {
  if (digest != input.digest()) {
    throw CertificateMismatch("certificate input digest " + digest +
                              " does not match input " + input.digest());
  }
  if (model_id != model.model_id()) {
    throw CertificateMismatch("certificate model '" + model_id + "' does not match model '" +
                              model.model_id() + "'");
  }
}

void check_baselines(const SoftmaxVector& fresh, const std::vector<std::pair<LabelId, double>>& pinned) {
  for (const auto& [label, p] : pinned) {
    if (label.index >= fresh.size()) {
      throw CertificateMismatch("certificate label " + std::to_string(label.index) +
                                " outside the model's label range");
    }
    if (std::abs(fresh[label.index] - p) > kBaselineTolerance) {
      std::ostringstream msg;
      msg << std::setprecision(10) << "stale certificate: pinned p = " << p << " for label "
          << label.index << ", model now predicts " << fresh[label.index];
      throw CertificateMismatch(msg.str());
    }
  }
}

// Structural conditions recorded in the report; returns whether all pass.
bool structural(VerificationReport& r, const std::string& name, bool pass, double measured,
                double bound) {
  r.checked_conditions.push_back({name, measured, bound, pass});
  return pass;
}

bool in_range(const IndexSet& s, const InputVector& input) { return s.bound() <= input.size(); }

void finish(VerificationReport& r) {
  const bool all = std::all_of(r.checked_conditions.begin(), r.checked_conditions.end(),
                               [](const CheckedCondition& c) { return c.pass; });
  if (r.verdict != Verdict::rejected_as_disjoint) r.verdict = all ? Verdict::accepted : Verdict::rejected;
}

double p_of(const Model& model, const InputVector& input, const IndexSet& s, double v,
            std::uint32_t label) {
  return predict(model, redact(input, s, static_cast<float>(v)))[label];
}

}  // namespace

VerificationReport verify_attribution(const AttributionCertificate& cert, const Model& model,
                                      const InputVector& input) {
  check_address(cert.model_id, cert.input_digest, model, input);
  VerificationReport r;
  bool ok = structural(r, "delta in (0, 1]", cert.delta > 0.0 && cert.delta <= 1.0, cert.delta, 1.0);
  ok = structural(r, "p in (0, 1]", cert.p > 0.0 && cert.p <= 1.0, cert.p, 1.0) && ok;
  ok = structural(r, "indices < n", in_range(cert.s, input), static_cast<double>(cert.s.bound()),
                  static_cast<double>(input.size())) && ok;
  if (!ok) {
    finish(r);
    return r;
  }
  check_baselines(predict(model, input), {{cert.label, cert.p}});
  const double after = p_of(model, input, cert.s, cert.v, cert.label.index);
  const double bound = cert.delta * cert.p;
  r.checked_conditions.push_back({"p_l(S) <= delta * p", after, bound, at_most(after, bound)});
  finish(r);
  return r;
}

VerificationReport verify_disjoint(const DisjointCertificate& cert, const Model& model,
                                   const InputVector& input) {
  check_address(cert.model_id, cert.input_digest, model, input);
  VerificationReport r;
  bool ok = structural(r, "S1 and S2 disjoint", cert.s1.disjoint_from(cert.s2),
                       static_cast<double>(cert.s1.intersect(cert.s2).size()), 0.0);
  ok = structural(r, "delta in (0, 0.5]", cert.delta > 0.0 && cert.delta <= 0.5, cert.delta, 0.5) && ok;
  ok = structural(r, "p1, p2 in (0, 1]",
                  cert.p1 > 0.0 && cert.p1 <= 1.0 && cert.p2 > 0.0 && cert.p2 <= 1.0,
                  std::min(cert.p1, cert.p2), 0.0) && ok;
  ok = structural(r, "distinct labels", cert.l1.index != cert.l2.index, 0.0, 0.0) && ok;
  const std::uint64_t bound = std::max(cert.s1.bound(), cert.s2.bound());
  ok = structural(r, "indices < n", bound <= input.size(), static_cast<double>(bound),
                  static_cast<double>(input.size())) && ok;
  if (!ok) {
    finish(r);
    return r;
  }
  check_baselines(predict(model, input), {{cert.l1, cert.p1}, {cert.l2, cert.p2}});
  const SoftmaxVector under1 = predict(model, redact(input, cert.s1, static_cast<float>(cert.v)));
  const SoftmaxVector under2 = predict(model, redact(input, cert.s2, static_cast<float>(cert.v)));
  const double d = cert.delta;
  const double a = under1[cert.l1.index];
  const double b = under1[cert.l2.index];
  const double c = under2[cert.l2.index];
  const double e = under2[cert.l1.index];
  r.checked_conditions.push_back({"p_l1(S1) <= delta * p1", a, d * cert.p1, at_most(a, d * cert.p1)});
  r.checked_conditions.push_back(
      {"p_l2(S1) >= (1 - delta) * p2", b, (1.0 - d) * cert.p2, at_least(b, (1.0 - d) * cert.p2)});
  r.checked_conditions.push_back({"p_l2(S2) <= delta * p2", c, d * cert.p2, at_most(c, d * cert.p2)});
  r.checked_conditions.push_back(
      {"p_l1(S2) >= (1 - delta) * p1", e, (1.0 - d) * cert.p1, at_least(e, (1.0 - d) * cert.p1)});
  finish(r);
  return r;
}

namespace {

void check_partition(const OverlapCertificate& cert) {
  IndexSet seen;
  for (std::size_t i = 0; i < cert.segments.size(); ++i) {
    const IndexSet& piece = cert.segments[i];
    if (piece.empty()) throw FormatError("overlap certificate segment " + std::to_string(i) + " is empty");
    if (!seen.disjoint_from(piece)) {
      throw FormatError("overlap certificate segment " + std::to_string(i) + " overlaps an earlier one");
    }
    seen = seen.unite(piece);
  }
  if (!(seen == cert.s)) throw FormatError("overlap certificate segments do not union to s");
}

std::vector<std::vector<std::uint32_t>> unit_neighbors(const std::vector<IndexSet>& units,
                                                       const Segmentation& seg,
                                                       const AdjacencyGraph& adj) {
  std::vector<std::set<std::uint32_t>> touched(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::uint32_t i : units[u]) touched[u].insert(seg.segment_of(i));
  }
  auto linked = [&](std::size_t u, std::size_t w) {
    for (std::uint32_t a : touched[u]) {
      for (std::uint32_t b : touched[w]) {
        if (a == b || adj.adjacent(a, b)) return true;
      }
    }
    return false;
  };
  std::vector<std::vector<std::uint32_t>> out(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t w = u + 1; w < units.size(); ++w) {
      if (linked(u, w)) {
        out[u].push_back(static_cast<std::uint32_t>(w));
        out[w].push_back(static_cast<std::uint32_t>(u));
      }
    }
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

}  // namespace

VerificationReport verify_overlap(const OverlapCertificate& cert, const Model& model,
                                  const InputVector& input, const Segmentation& seg,
                                  const AdjacencyGraph& adj, double tau) {
  check_address(cert.model_id, cert.input_digest, model, input);
  check_partition(cert);
  if (seg.n() != input.size()) {
    throw DimensionError("segmentation covers n = " + std::to_string(seg.n()) + ", input has " +
                         std::to_string(input.size()));
  }
  VerificationReport r;
  bool ok = structural(r, "delta in (0, 0.5]", cert.delta > 0.0 && cert.delta <= 0.5, cert.delta, 0.5);
  ok = structural(r, "p1, p2 in (0, 1]",
                  cert.p1 > 0.0 && cert.p1 <= 1.0 && cert.p2 > 0.0 && cert.p2 <= 1.0,
                  std::min(cert.p1, cert.p2), 0.0) && ok;
  ok = structural(r, "distinct labels", cert.l1.index != cert.l2.index, 0.0, 0.0) && ok;
  ok = structural(r, "indices < n", in_range(cert.s, input), static_cast<double>(cert.s.bound()),
                  static_cast<double>(input.size())) && ok;
  if (!ok) {
    finish(r);
    return r;
  }
  check_baselines(predict(model, input), {{cert.l1, cert.p1}, {cert.l2, cert.p2}});

  const SoftmaxVector under = predict(model, redact(input, cert.s, static_cast<float>(cert.v)));
  const double d = cert.delta;
  const double a = under[cert.l1.index];
  const double b = under[cert.l2.index];
  r.checked_conditions.push_back({"p_l1(S) <= delta * p1", a, d * cert.p1, at_most(a, d * cert.p1)});
  r.checked_conditions.push_back({"p_l2(S) <= delta * p2", b, d * cert.p2, at_most(b, d * cert.p2)});
  if (!(r.checked_conditions[r.checked_conditions.size() - 2].pass &&
        r.checked_conditions.back().pass)) {
    finish(r);
    return r;
  }

  Alg3Input in;
  in.model = &model;
  in.input = &input;
  in.units = cert.segments;
  in.unit_neighbors = unit_neighbors(cert.segments, seg, adj);
  in.l1 = cert.l1;
  in.l2 = cert.l2;
  in.p1 = cert.p1;
  in.p2 = cert.p2;
  in.delta = cert.delta;
  in.v = static_cast<float>(cert.v);
  in.tau = tau;
  Alg3Result split = alg3_partition(in);
  const bool found = split.outcome.kind == SearchOutcome::Kind::disjoint;
  r.checked_conditions.push_back({"no disjoint split of S found", found ? 1.0 : 0.0, 0.0, !found});
  if (found) {
    r.verdict = Verdict::rejected_as_disjoint;
    r.counter_certificate = std::get<DisjointCertificate>(*split.outcome.certificate);
    return r;
  }
  finish(r);
  return r;
}

VerificationReport verify_certificate(const Certificate& cert, const Model& model,
                                      const InputVector& input, const Segmentation& seg,
                                      const AdjacencyGraph& adj, double tau) {
  if (const auto* a = std::get_if<AttributionCertificate>(&cert)) return verify_attribution(*a, model, input);
  if (const auto* d = std::get_if<DisjointCertificate>(&cert)) return verify_disjoint(*d, model, input);
  return verify_overlap(std::get<OverlapCertificate>(cert), model, input, seg, adj, tau);
}

}  // namespace redcert
