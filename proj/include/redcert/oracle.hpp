#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "redcert/model.hpp"
#include "redcert/segmentation.hpp"

// Exhaustive ground truth over segment subsets for small K, and the planted
// fixture family the searches and verifiers are tested against. All oracles
// quantify over unions of whole segments, never arbitrary index sets.
namespace redcert::oracle {

inline constexpr std::size_t kMaxAttributionSegments = 16;
inline constexpr std::size_t kMaxPairSegments = 12;

// A qualifying segment set (s2 empty for single-set predicates) or pair.
struct Witness {
  std::vector<std::uint32_t> s1;
  std::vector<std::uint32_t> s2;
  friend bool operator==(const Witness&, const Witness&) = default;
};

struct OracleVerdict {
  bool exists = false;
  // Minimal qualifying sets under inclusion, sorted by bitmask.
  std::vector<Witness> witnesses;
  std::uint64_t evaluations = 0;
  bool segment_level = true;
};

// p_l1, p_l2 for the redaction of every subset of segments, indexed by bitmask
// (bit k set = segment k redacted). 2^K model evaluations.
struct SubsetTable {
  std::size_t segments = 0;
  double p1 = 0.0;  // unredacted baselines
  double p2 = 0.0;
  std::vector<double> l1;
  std::vector<double> l2;
  std::uint64_t evaluations = 0;
};

SubsetTable evaluate_subsets(const Model& model, const InputVector& input, const Segmentation& seg,
                             const LabelId& l1, const LabelId& l2, float v = 0.0f);

// Def.-3 existence for one label (K <= 16).
OracleVerdict brute_attribution(const Model& model, const InputVector& input,
                                const Segmentation& seg, const LabelId& label, double delta,
                                float v = 0.0f);

// Def.-4 existence (K <= 12): disjoint S1, S2 satisfying all four bounds.
OracleVerdict brute_disjoint(const Model& model, const InputVector& input, const Segmentation& seg,
                             const LabelId& l1, const LabelId& l2, double delta, float v = 0.0f);
OracleVerdict brute_disjoint(const SubsetTable& table, double delta);

// Def.-5 existence (K <= 12): not disjoint, and one set collapses both labels.
OracleVerdict brute_overlap(const Model& model, const InputVector& input, const Segmentation& seg,
                            const LabelId& l1, const LabelId& l2, double delta, float v = 0.0f);
OracleVerdict brute_overlap(const SubsetTable& table, double delta);

// Predicates on a single subset bitmask, shared by the brute-force scans and
// by tests checking that search output lies in the qualifying family.
bool collapses_l1_keeps_l2(const SubsetTable& t, std::uint32_t mask, double delta);
bool collapses_l2_keeps_l1(const SubsetTable& t, std::uint32_t mask, double delta);
bool collapses_both(const SubsetTable& t, std::uint32_t mask, double delta);

std::uint32_t mask_of(const std::vector<std::uint32_t>& segments);
std::vector<std::uint32_t> segments_of(std::uint32_t mask);

enum class FixtureKind { planted_disjoint, planted_overlap, noise };

std::string_view fixture_kind_name(FixtureKind kind);
FixtureKind parse_fixture_kind(std::string_view name);

struct FixtureSpec {
  FixtureKind kind = FixtureKind::planted_disjoint;
  std::uint32_t rows = 3;  // K = rows * cols
  std::uint32_t cols = 3;
  Geometry geometry{12, 12, 3};
  // Logit headroom: planted support logits are 3 + 2 * margin.
  double margin = 1.0;
  std::uint64_t seed = 0;
  std::uint32_t labels = 4;  // label 0/1: the pair, 2: background, rest: distractors
};

struct Fixture {
  std::shared_ptr<const PlantedModel> model;
  InputVector input;
  Segmentation seg;
  LabelId l1;
  LabelId l2;
  FixtureSpec spec;
  std::uint32_t attempts = 1;
  std::vector<std::uint32_t> support1;  // planted support segments of l1
  std::vector<std::uint32_t> support2;
};

// Deterministic in spec.seed. Planted kinds are confirmed by the oracle at
// delta = 0.2 (disjoint existence, resp. overlap existence); failing
// candidates are regenerated from derived seeds, at most 32 attempts.
Fixture generate_fixture(const FixtureSpec& spec);

}  // namespace redcert::oracle
