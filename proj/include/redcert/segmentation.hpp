#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redcert/index_set.hpp"
#include "redcert/input.hpp"
#include "redcert/model.hpp"

namespace redcert {

// Total partition of {0..n-1} into K nonempty segments.
class Segmentation {
 public:
  // segment_of has one entry per input index; ids must cover [0, K) densely.
  Segmentation(std::vector<std::uint32_t> segment_of, std::optional<Geometry> geometry);

  // Per-pixel ids (H*W entries) expanded across channels.
  static Segmentation from_pixel_ids(const std::vector<std::uint32_t>& pixel_ids,
                                     const Geometry& geometry);

  [[nodiscard]] std::size_t n() const { return segment_of_.size(); }
  [[nodiscard]] std::size_t segment_count() const { return members_.size(); }
  [[nodiscard]] std::uint32_t segment_of(std::size_t index) const { return segment_of_[index]; }
  [[nodiscard]] const std::optional<Geometry>& geometry() const { return geometry_; }
  [[nodiscard]] const IndexSet& members(std::uint32_t segment) const { return members_.at(segment); }

  // Union of the members of the given segments.
  [[nodiscard]] IndexSet indices_of(const std::vector<std::uint32_t>& segments) const;

  // Per-pixel ids (requires geometry); channels of one pixel share a segment.
  [[nodiscard]] std::vector<std::uint32_t> pixel_ids() const;

  // Segmentation file: little-endian uint32 per pixel, row-major.
  void save(const std::filesystem::path& path) const;
  static Segmentation load(const std::filesystem::path& path, const Geometry& geometry);

 private:
  std::vector<std::uint32_t> segment_of_;
  std::optional<Geometry> geometry_;
  std::vector<IndexSet> members_;
};

enum class Connectivity { four, eight };

// neighbors[k] is sorted; the relation is symmetric and irreflexive.
struct AdjacencyGraph {
  std::vector<std::vector<std::uint32_t>> neighbors;

  [[nodiscard]] bool adjacent(std::uint32_t a, std::uint32_t b) const;
};

struct AttributionMap {
  std::vector<double> values;  // length n
  LabelId label;
  std::string method_tag;

  // Attribution file: little-endian float32, length n.
  void save(const std::filesystem::path& path) const;
  static AttributionMap load(const std::filesystem::path& path, LabelId label,
                             std::string method_tag);
};

struct SegmentAttribution {
  std::vector<double> scores;           // mean attribution per segment
  std::vector<std::uint32_t> ranking;   // descending score, ties by ascending id
  std::vector<double> normalized;       // score / max score, clamped to [0,1]
};

SegmentAttribution accumulate(const AttributionMap& attr, const Segmentation& seg);

// Builds ranking and normalized fields from per-segment scores.
SegmentAttribution segment_attribution_from_scores(std::vector<double> scores);

Segmentation grid_segmenter(const Geometry& geometry, std::uint32_t rows, std::uint32_t cols);

AdjacencyGraph adjacency(const Segmentation& seg, Connectivity connectivity = Connectivity::four);

// score_k = p_label(input) - p_label(redact(input, segment k, v)), broadcast
// over segment k. K + 1 model evaluations.
AttributionMap occlusion_attribution(const Model& model, const InputVector& input,
                                     const Segmentation& seg, const LabelId& label,
                                     float v = 0.0f);

}  // namespace redcert
