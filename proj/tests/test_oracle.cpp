#include <doctest.h>

#include <algorithm>
#include <set>

#include "redcert/error.hpp"
#include "redcert/oracle.hpp"
#include "redcert/verify.hpp"
#include "support.hpp"

using namespace redcert;
using oracle::FixtureKind;

namespace {

bool subset_of(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  return std::all_of(a.begin(), a.end(), [&](std::uint32_t x) { return std::count(b.begin(), b.end(), x) > 0; });
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("mask helpers") {
    CHECK(oracle::mask_of({0, 3}) == 9u);
    CHECK(oracle::segments_of(9u) == std::vector<std::uint32_t>{0, 3});
    CHECK(oracle::segments_of(0u).empty());
  }

  TEST_CASE("zero-weight model: nothing exists") {
    const auto f = testing::fixture(FixtureKind::noise);
    for (double delta : {0.1, 0.5, 0.9}) {
      CHECK_FALSE(oracle::brute_attribution(*f.model, f.input, f.seg, f.l1, delta).exists);
    }
    CHECK_FALSE(oracle::brute_disjoint(*f.model, f.input, f.seg, f.l1, f.l2, 0.2).exists);
    CHECK_FALSE(oracle::brute_overlap(*f.model, f.input, f.seg, f.l1, f.l2, 0.2).exists);
  }

  TEST_CASE("attribution witnesses agree with a straight-line scan") {
    const auto f = testing::fixture(FixtureKind::planted_disjoint, 1);
    const double delta = 0.2;
    const auto verdict = oracle::brute_attribution(*f.model, f.input, f.seg, f.l1, delta);
    REQUIRE(verdict.exists);
    CHECK(verdict.evaluations == (1u << 9));  // the empty subset is the baseline

    const double p = predict(*f.model, f.input)[0];
    std::vector<bool> qualifies(1u << 9);
    for (std::uint32_t mask = 0; mask < qualifies.size(); ++mask) {
      const auto s = f.seg.indices_of(oracle::segments_of(mask));
      qualifies[mask] = predict(*f.model, redact(f.input, s))[0] <= delta * p + kAcceptEpsilon;
    }
    std::vector<oracle::Witness> expect;
    for (std::uint32_t mask = 0; mask < qualifies.size(); ++mask) {
      if (!qualifies[mask]) continue;
      bool minimal = true;
      for (std::uint32_t sub = (mask - 1) & mask; sub != mask; sub = (sub - 1) & mask) {
        if (qualifies[sub]) {
          minimal = false;
          break;
        }
        if (sub == 0) break;
      }
      if (minimal) expect.push_back(oracle::Witness{oracle::segments_of(mask), {}});
    }
    CHECK(verdict.witnesses == expect);
    // Every minimal witness lives inside the planted support.
    for (const auto& w : verdict.witnesses) CHECK(subset_of(w.s1, f.support1));
  }

  TEST_CASE("disjoint fixtures: disjoint exists, overlap does not") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto f = testing::fixture(FixtureKind::planted_disjoint, seed);
      const auto d = oracle::brute_disjoint(*f.model, f.input, f.seg, f.l1, f.l2, 0.2);
      REQUIRE(d.exists);
      const auto p = predict(*f.model, f.input);
      for (const auto& w : d.witnesses) {
        DisjointCertificate c{f.model->model_id(), f.input.digest(), f.l1, f.l2, p[0], p[1], 0.2, 0.0,
                              f.seg.indices_of(w.s1), f.seg.indices_of(w.s2), std::nullopt, std::nullopt};
        CHECK(verify_disjoint(c, *f.model, f.input).verdict == VerificationReport::Verdict::accepted);
      }
      CHECK_FALSE(oracle::brute_overlap(*f.model, f.input, f.seg, f.l1, f.l2, 0.2).exists);
    }
  }

  TEST_CASE("overlap fixtures: overlap exists on the shared support, disjoint does not") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto f = testing::fixture(FixtureKind::planted_overlap, seed);
      const oracle::SubsetTable t = oracle::evaluate_subsets(*f.model, f.input, f.seg, f.l1, f.l2);
      CHECK_FALSE(oracle::brute_disjoint(t, 0.2).exists);
      const auto o = oracle::brute_overlap(t, 0.2);
      REQUIRE(o.exists);
      CHECK(oracle::collapses_both(t, oracle::mask_of(f.support1), 0.2));
      for (const auto& w : o.witnesses) CHECK(subset_of(w.s1, f.support1));
    }
  }

  TEST_CASE("limits") {
    oracle::FixtureSpec spec;
    spec.kind = FixtureKind::noise;
    spec.rows = 4;
    spec.cols = 4;
    const auto f = oracle::generate_fixture(spec);
    CHECK_THROWS_AS(oracle::brute_disjoint(*f.model, f.input, f.seg, f.l1, f.l2, 0.2), OracleLimitError);
    CHECK_NOTHROW(oracle::brute_attribution(*f.model, f.input, f.seg, f.l1, 0.2));
  }

  TEST_CASE("fixture generation is deterministic") {
    const auto a = testing::fixture(FixtureKind::planted_disjoint, 0);
    const auto b = testing::fixture(FixtureKind::planted_disjoint, 0);
    CHECK(a.input.digest() == b.input.digest());
    CHECK(a.model->model_id() == b.model->model_id());
    CHECK(a.model->spec().weights == b.model->spec().weights);
    CHECK(a.support1 == b.support1);
    CHECK(a.support2 == b.support2);
    CHECK(oracle::parse_fixture_kind("planted-overlap") == FixtureKind::planted_overlap);
    CHECK_THROWS_AS(oracle::parse_fixture_kind("other"), ConfigError);
  }

  TEST_CASE("planted supports are contiguous and separated") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto f = testing::fixture(FixtureKind::planted_disjoint, seed);
      const auto adj = adjacency(f.seg);
      REQUIRE(f.support1.size() == 2);
      REQUIRE(f.support2.size() == 2);
      CHECK(adj.adjacent(f.support1[0], f.support1[1]));
      CHECK(adj.adjacent(f.support2[0], f.support2[1]));
      for (auto a : f.support1) {
        for (auto b : f.support2) CHECK(a != b);
      }
    }
  }
}
