#include <doctest.h>

#include "redcert/error.hpp"
#include "redcert/search.hpp"
#include "redcert/verify.hpp"
#include "support.hpp"

using namespace redcert;
using oracle::FixtureKind;
using testing::TableModel;
using Verdict = VerificationReport::Verdict;

namespace {

using Table = std::map<std::vector<std::uint32_t>, std::vector<double>>;

// A strip of n single-index segments, so overlap verification has adjacency.
struct Strip {
  explicit Strip(std::size_t n)
      : seg(grid_segmenter(Geometry{1, static_cast<std::uint32_t>(n), 1}, 1, static_cast<std::uint32_t>(n))),
        adj(adjacency(seg)),
        input(std::vector<float>(n, 1.0f), Geometry{1, static_cast<std::uint32_t>(n), 1}) {}
  Segmentation seg;
  AdjacencyGraph adj;
  InputVector input;
};

const CheckedCondition& find(const VerificationReport& r, const std::string& prefix) {
  for (const auto& c : r.checked_conditions) {
    if (c.condition.rfind(prefix, 0) == 0) return c;
  }
  FAIL("no condition " << prefix);
  static CheckedCondition none;
  return none;
}

DisjointCertificate disjoint_for(const TableModel& m, const InputVector& x, double p1, double p2, IndexSet s1,
                                 IndexSet s2) {
  return DisjointCertificate{m.model_id(), x.digest(), LabelId{0, "a"}, LabelId{1, "b"}, p1, p2, 0.2, 0.0,
                             std::move(s1), std::move(s2), std::nullopt, std::nullopt};
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("attribution: post-redaction prediction 0.010") {
    Strip st(4);
    TableModel m(4, Table{{{0, 1}, {0.010, 0.99}}}, {0.5, 0.5});
    AttributionCertificate c{m.model_id(), st.input.digest(), LabelId{0, {}}, 0.5, 0.2, 0.0,
                             IndexSet::from_sorted({0, 1})};
    const auto r = verify_attribution(c, m, st.input);
    CHECK(r.verdict == Verdict::accepted);
    CHECK(find(r, "p_l(S)").measured == doctest::Approx(0.010));
    CHECK(find(r, "p_l(S)").bound == doctest::Approx(0.1));
    c.delta = 0.01;  // 0.010 > 0.005
    CHECK(verify_attribution(c, m, st.input).verdict == Verdict::rejected);
    c.delta = 0.2;
    c.s = IndexSet{};
    CHECK(verify_attribution(c, m, st.input).verdict == Verdict::rejected);
  }

  TEST_CASE("attribution: planted support, measured value matches recomputation") {
    const auto f = testing::fixture(FixtureKind::planted_disjoint, 4);
    const double p = testing::planted_softmax_naive(f.model->spec(), f.input)[0];
    const IndexSet s = f.seg.indices_of(f.support1);
    AttributionCertificate c{f.model->model_id(), f.input.digest(), f.l1, p, 0.2, 0.0, s};
    const auto r = verify_attribution(c, *f.model, f.input);
    CHECK(r.verdict == Verdict::accepted);
    const double direct = testing::planted_softmax_naive(f.model->spec(), redact(f.input, s))[0];
    CHECK(find(r, "p_l(S)").measured == doctest::Approx(direct).epsilon(1e-12));
  }

  TEST_CASE("disjoint: the four bounds with 0.513 / 0.484") {
    Strip st(4);
    TableModel m(4,
                 Table{{{0, 1}, {0.098, 0.797, 0.105}}, {{2, 3}, {0.45, 0.05, 0.50}}},
                 {0.513, 0.484, 0.003});
    const auto c = disjoint_for(m, st.input, 0.513, 0.484, IndexSet::range(0, 2), IndexSet::range(2, 4));
    const auto r = verify_disjoint(c, m, st.input);
    CHECK(r.verdict == Verdict::accepted);
    CHECK(find(r, "p_l1(S1)").measured == doctest::Approx(0.098));
    CHECK(find(r, "p_l1(S1)").bound == doctest::Approx(0.1026));
    CHECK(find(r, "p_l2(S1)").measured == doctest::Approx(0.797));
    CHECK(find(r, "p_l2(S1)").bound == doctest::Approx(0.3872));
    CHECK(m.evaluations() == 3);  // baseline plus one per set
  }

  TEST_CASE("disjoint: structural rejection makes no model calls") {
    Strip st(4);
    TableModel m(4, Table{}, {0.5, 0.4, 0.1});
    const auto same = disjoint_for(m, st.input, 0.5, 0.4, IndexSet::range(0, 2), IndexSet::range(0, 2));
    auto r = verify_disjoint(same, m, st.input);
    CHECK(r.verdict == Verdict::rejected);
    CHECK_FALSE(find(r, "S1 and S2 disjoint").pass);
    auto out_of_range = disjoint_for(m, st.input, 0.5, 0.4, IndexSet::range(0, 1), IndexSet::range(3, 9));
    CHECK(verify_disjoint(out_of_range, m, st.input).verdict == Verdict::rejected);
    auto bad_delta = disjoint_for(m, st.input, 0.5, 0.4, IndexSet::range(0, 1), IndexSet::range(2, 3));
    bad_delta.delta = 0.7;
    CHECK(verify_disjoint(bad_delta, m, st.input).verdict == Verdict::rejected);
    CHECK(m.evaluations() == 0);
  }

  TEST_CASE("mismatched certificates are errors, not verdicts") {
    Strip st(4);
    TableModel m(4, Table{}, {0.5, 0.4, 0.1});
    auto c = disjoint_for(m, st.input, 0.5, 0.4, IndexSet::range(0, 1), IndexSet::range(2, 3));
    c.input_digest = std::string(64, '0');
    CHECK_THROWS_AS(verify_disjoint(c, m, st.input), CertificateMismatch);
    c = disjoint_for(m, st.input, 0.5, 0.4, IndexSet::range(0, 1), IndexSet::range(2, 3));
    c.model_id = "other";
    CHECK_THROWS_AS(verify_disjoint(c, m, st.input), CertificateMismatch);
    c = disjoint_for(m, st.input, 0.5 + 2 * kBaselineTolerance, 0.4, IndexSet::range(0, 1), IndexSet::range(2, 3));
    CHECK_THROWS_AS(verify_disjoint(c, m, st.input), CertificateMismatch);
    c = disjoint_for(m, st.input, 0.5 + 0.5 * kBaselineTolerance, 0.4, IndexSet::range(0, 1), IndexSet::range(2, 3));
    CHECK_NOTHROW(verify_disjoint(c, m, st.input));
  }

  TEST_CASE("verdicts agree with inline evaluation of the four inequalities") {
    std::mt19937 rng(17);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto f = testing::fixture(FixtureKind::planted_disjoint, seed);
      const auto p = predict(*f.model, f.input);
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::uint32_t> a;
        std::vector<std::uint32_t> b;
        for (std::uint32_t k = 0; k < 9; ++k) {
          const auto r = rng() % 3;
          if (r == 1) a.push_back(k);
          if (r == 2) b.push_back(k);
        }
        const double delta = 0.05 + 0.45 * (rng() % 100) / 100.0;
        DisjointCertificate c{f.model->model_id(), f.input.digest(), f.l1, f.l2, p[0], p[1], delta, 0.0,
                              f.seg.indices_of(a), f.seg.indices_of(b), std::nullopt, std::nullopt};
        const auto q1 = testing::planted_softmax_naive(f.model->spec(), redact(f.input, c.s1));
        const auto q2 = testing::planted_softmax_naive(f.model->spec(), redact(f.input, c.s2));
        const bool expect = q1[0] <= delta * p[0] + 1e-7 && q1[1] >= (1 - delta) * p[1] - 1e-7 &&
                            q2[1] <= delta * p[1] + 1e-7 && q2[0] >= (1 - delta) * p[0] - 1e-7;
        CHECK((verify_disjoint(c, *f.model, f.input).verdict == Verdict::accepted) == expect);
      }
    }
  }

  TEST_CASE("overlap: both labels collapse under one redaction") {
    Strip st(6);
    TableModel m(6, Table{{{1, 2}, {0.0008, 0.0135, 0.9857}}}, {0.6275, 0.1596, 0.2129});
    OverlapCertificate c{m.model_id(), st.input.digest(), LabelId{0, {}}, LabelId{1, {}}, 0.6275, 0.1596, 0.2,
                         0.0, IndexSet::range(1, 3), {IndexSet::range(1, 2), IndexSet::range(2, 3)}};
    const auto r = verify_overlap(c, m, st.input, st.seg, st.adj);
    CHECK(r.verdict == Verdict::accepted);
    CHECK(find(r, "p_l1(S)").bound == doctest::Approx(0.1255));
    CHECK(find(r, "p_l2(S)").bound == doctest::Approx(0.03192));
    CHECK_FALSE(r.counter_certificate.has_value());

    OverlapCertificate weak = c;
    weak.s = IndexSet::range(1, 2);
    weak.segments = {weak.s};
    CHECK(verify_overlap(weak, m, st.input, st.seg, st.adj).verdict == Verdict::rejected);

    OverlapCertificate broken = c;
    broken.segments = {IndexSet::range(1, 2)};
    CHECK_THROWS_AS(verify_overlap(broken, m, st.input, st.seg, st.adj), FormatError);
  }

  TEST_CASE("overlap: a forged union of a disjoint pair is split back apart") {
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto f = testing::fixture(FixtureKind::planted_disjoint, seed);
      const PairCase pc = make_pair_case(f.model, f.input, f.seg, f.l1, f.l2, {});
      const auto found = find_disjoint_alg1(pc);
      REQUIRE(found.certificate.has_value());
      const auto& d = std::get<DisjointCertificate>(*found.certificate);
      OverlapCertificate forged{d.model_id, d.input_digest, d.l1, d.l2, d.p1, d.p2, d.delta, d.v,
                                d.s1.unite(d.s2), *d.segments1};
      forged.segments.insert(forged.segments.end(), d.segments2->begin(), d.segments2->end());
      const auto r = verify_overlap(forged, *f.model, f.input, f.seg, *pc.adj);
      if (r.verdict == Verdict::rejected_as_disjoint) {
        ++rejected;
        REQUIRE(r.counter_certificate.has_value());
        CHECK(verify_disjoint(*r.counter_certificate, *f.model, f.input).verdict == Verdict::accepted);
      }
    }
    CHECK(rejected >= 9);
  }

  TEST_CASE("report formatting") {
    VerificationReport r;
    r.verdict = Verdict::rejected_as_disjoint;
    r.checked_conditions.push_back({"x <= y", 0.5, 0.25, false});
    const std::string text = format_report(r);
    CHECK(text.find("rejected-as-disjoint") != std::string::npos);
    CHECK(text.find("FAIL") != std::string::npos);
    CHECK(verdict_name(Verdict::accepted) == "accepted");
  }
}
