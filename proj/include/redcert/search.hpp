#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "redcert/certificate.hpp"
#include "redcert/model.hpp"
#include "redcert/segmentation.hpp"

namespace redcert {

enum class Strategy { alg1, alg2, alg3, overlap };

std::string_view strategy_name(Strategy s);
// Accepts "alg1", "alg2", "alg3", "overlap"; throws ConfigError otherwise.
Strategy parse_strategy(std::string_view name);
// Comma-separated list.
std::vector<Strategy> parse_strategy_list(std::string_view list);
inline const std::vector<Strategy> kDefaultStrategy = {Strategy::alg1, Strategy::alg2,
                                                       Strategy::overlap};

struct SearchOptions {
  // Alg-3 importance threshold; a segment is important iff its score > tau.
  double tau = 0.0;
  // At most ceil(max_fraction * K) segments are redacted per side.
  double max_fraction = 1.0;
  Connectivity connectivity = Connectivity::four;
};

struct CaseParams {
  double delta = 0.2;
  float v = 0.0f;
  double min_p = 0.01;
  SearchOptions options;
};

struct PairCase {
  ModelHandle model;
  InputVector input;
  Segmentation seg;
  std::optional<AdjacencyGraph> adj;  // present when seg has geometry
  LabelId l1;
  LabelId l2;
  double p1 = 0.0;
  double p2 = 0.0;
  double delta = 0.2;
  SegmentAttribution attr1;
  SegmentAttribution attr2;
  float v = 0.0f;
  SearchOptions options;
};

// Validates the case (labels, delta in (0, 0.5], p >= min_p), computes baselines
// and, when attributions are not supplied, falls back to occlusion attribution.
PairCase make_pair_case(ModelHandle model, InputVector input, Segmentation seg, LabelId l1,
                        LabelId l2, const CaseParams& params,
                        std::optional<SegmentAttribution> attr1 = std::nullopt,
                        std::optional<SegmentAttribution> attr2 = std::nullopt);

struct TraceStep {
  std::string sweep;        // e.g. "alg1/l1"
  std::uint32_t step = 0;   // 1-based within the sweep
  std::uint32_t segment = 0;
  double p_l1 = 0.0;
  double p_l2 = 0.0;
  double pct_l1 = 0.0;      // p_l1 as a percentage of the unredacted baseline
  double pct_l2 = 0.0;
};

struct SearchOutcome {
  enum class Kind { disjoint, overlapping, undetermined };
  Kind kind = Kind::undetermined;
  std::optional<Certificate> certificate;
  std::vector<TraceStep> trace;
  std::uint64_t evaluations = 0;
  std::optional<Strategy> decided_by;
};

std::string_view outcome_name(SearchOutcome::Kind kind);

// Tab-separated trace table with a header row.
std::string format_trace(const std::vector<TraceStep>& trace);

struct Segregation {
  std::vector<std::uint32_t> l1;
  std::vector<std::uint32_t> l2;
};

// Assigns each segment to the label with the larger normalized attribution.
// Ties: mean normalized difference over adjacent segments, then the larger
// baseline prediction, then l1.
Segregation segregate_segments(const PairCase& c);

SearchOutcome find_disjoint_alg1(const PairCase& c);
SearchOutcome find_overlap(const PairCase& c);
SearchOutcome find_disjoint_alg2(const PairCase& c);

// Percentage drop of a label from redaction R to R' relative to its
// unredacted prediction.
inline double pct_drop(double p_before, double p_after, double p_unredacted) {
  return (p_before - p_after) / p_unredacted * 100.0;
}

struct Alg3Result {
  IndexSet s1;
  IndexSet s2;
  std::vector<std::uint32_t> units1;  // unit ids forming s1, accumulation order
  std::vector<std::uint32_t> units2;
  std::vector<std::uint32_t> candidates1;  // grown sets before discarding the intersection
  std::vector<std::uint32_t> candidates2;
  SearchOutcome outcome;
};

struct Alg3Input {
  const Model* model = nullptr;
  const InputVector* input = nullptr;
  // Universe E: each unit is one redactable piece (a segment's indices).
  std::vector<IndexSet> units;
  std::vector<std::vector<std::uint32_t>> unit_neighbors;
  LabelId l1;
  LabelId l2;
  double p1 = 0.0;  // baselines the percentage drops and bounds refer to
  double p2 = 0.0;
  double delta = 0.2;
  float v = 0.0f;
  double tau = 0.0;
};

// Region-growing partition driven only by model evaluations (no attributions).
Alg3Result alg3_partition(const Alg3Input& in);

// Whole-segmentation form: units are the segments of seg, neighbors from adj.
Alg3Result alg3_partition(const Model& model, const InputVector& input, const Segmentation& seg,
                          const AdjacencyGraph& adj, const LabelId& l1, const LabelId& l2,
                          double delta, float v, double tau);

SearchOutcome find_disjoint_alg3(const PairCase& c);

SearchOutcome run_strategy(const PairCase& c, Strategy s);

// Runs strategies in order and returns the first decided outcome; otherwise
// undetermined with every trace concatenated.
SearchOutcome classify_pair(const PairCase& c,
                            const std::vector<Strategy>& strategy = kDefaultStrategy);

}  // namespace redcert
