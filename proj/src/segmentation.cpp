#include "redcert/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "redcert/binary_io.hpp"
#include "redcert/error.hpp"
#include "redcert/parallel.hpp"

namespace redcert {

Segmentation::Segmentation(std::vector<std::uint32_t> segment_of, std::optional<Geometry> geometry)
    : segment_of_(std::move(segment_of)), geometry_(geometry) {
  if (segment_of_.empty()) throw DimensionError("segmentation over an empty input");
  if (geometry_) {
    if (geometry_->size() != segment_of_.size()) {
      throw DimensionError("segmentation geometry does not match n = " +
                           std::to_string(segment_of_.size()));
    }
    const std::uint32_t c = geometry_->channels;
    for (std::size_t i = 0; i < segment_of_.size(); i += c) {
      for (std::uint32_t j = 1; j < c; ++j) {
        if (segment_of_[i + j] != segment_of_[i]) {
          throw DimensionError("channels of pixel " + std::to_string(i / c) +
                               " belong to different segments");
        }
      }
    }
  }
  const std::uint32_t k = *std::max_element(segment_of_.begin(), segment_of_.end()) + 1;
  std::vector<std::vector<std::uint32_t>> buckets(k);
  for (std::size_t i = 0; i < segment_of_.size(); ++i) {
    buckets[segment_of_[i]].push_back(static_cast<std::uint32_t>(i));
  }
  members_.reserve(k);
  for (std::uint32_t s = 0; s < k; ++s) {
    if (buckets[s].empty()) {
      throw DimensionError("segment id " + std::to_string(s) + " is empty (ids must be dense)");
    }
    members_.push_back(IndexSet::from_sorted(std::move(buckets[s])));
  }
}

Segmentation Segmentation::from_pixel_ids(const std::vector<std::uint32_t>& pixel_ids,
                                          const Geometry& geometry) {
  if (pixel_ids.size() != geometry.pixels()) {
    throw DimensionError("segmentation has " + std::to_string(pixel_ids.size()) +
                         " pixel ids, geometry has " + std::to_string(geometry.pixels()) +
                         " pixels");
  }
  std::vector<std::uint32_t> per_index;
  per_index.reserve(geometry.size());
  for (std::uint32_t id : pixel_ids) {
    for (std::uint32_t c = 0; c < geometry.channels; ++c) per_index.push_back(id);
  }
  return Segmentation(std::move(per_index), geometry);
}

IndexSet Segmentation::indices_of(const std::vector<std::uint32_t>& segments) const {
  IndexSet out;
  for (std::uint32_t s : segments) out = out.unite(members(s));
  return out;
}

std::vector<std::uint32_t> Segmentation::pixel_ids() const {
  if (!geometry_) throw DimensionError("segmentation has no grid geometry");
  const std::uint32_t c = geometry_->channels;
  std::vector<std::uint32_t> out(geometry_->pixels());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = segment_of_[p * c];
  return out;
}

void Segmentation::save(const std::filesystem::path& path) const {
  const auto ids = pixel_ids();
  binio::write_file(path, binio::encode_u32(ids));
}

Segmentation Segmentation::load(const std::filesystem::path& path, const Geometry& geometry) {
  return from_pixel_ids(binio::decode_u32(binio::read_file(path)), geometry);
}

bool AdjacencyGraph::adjacent(std::uint32_t a, std::uint32_t b) const {
  if (a >= neighbors.size()) return false;
  return std::binary_search(neighbors[a].begin(), neighbors[a].end(), b);
}

void AttributionMap::save(const std::filesystem::path& path) const {
  std::vector<float> narrow(values.begin(), values.end());
  binio::write_file(path, binio::encode_f32(narrow));
}

AttributionMap AttributionMap::load(const std::filesystem::path& path, LabelId label,
                                    std::string method_tag) {
  const auto raw = binio::decode_f32(binio::read_file(path));
  AttributionMap out{std::vector<double>(raw.begin(), raw.end()), std::move(label),
                     std::move(method_tag)};
  for (double v : out.values) {
    if (!std::isfinite(v)) throw FormatError("attribution file " + path.string() + " has non-finite values");
  }
  return out;
}

SegmentAttribution segment_attribution_from_scores(std::vector<double> scores) {
  SegmentAttribution out;
  const std::size_t k = scores.size();
  out.ranking.resize(k);
  std::iota(out.ranking.begin(), out.ranking.end(), 0u);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  out.normalized.assign(k, 0.0);
  if (k > 0) {
    const double top = scores[out.ranking.front()];
    if (top > 0.0) {
      for (std::size_t s = 0; s < k; ++s) out.normalized[s] = std::max(0.0, scores[s] / top);
    }
  }
  out.scores = std::move(scores);
  return out;
}

SegmentAttribution accumulate(const AttributionMap& attr, const Segmentation& seg) {
  if (attr.values.size() != seg.n()) {
    throw DimensionError("attribution map has length " + std::to_string(attr.values.size()) +
                         ", segmentation covers n = " + std::to_string(seg.n()));
  }
  const std::size_t k = seg.segment_count();
  std::vector<double> scores(k, 0.0);
  for (std::uint32_t s = 0; s < k; ++s) {
    double acc = 0.0;
    for (std::uint32_t idx : seg.members(s)) acc += attr.values[idx];
    scores[s] = acc / static_cast<double>(seg.members(s).size());
  }
  return segment_attribution_from_scores(std::move(scores));
}

Segmentation grid_segmenter(const Geometry& geometry, std::uint32_t rows, std::uint32_t cols) {
  return Segmentation::from_pixel_ids(tile_ids(geometry, rows, cols), geometry);
}

AdjacencyGraph adjacency(const Segmentation& seg, Connectivity connectivity) {
  if (!seg.geometry()) throw DimensionError("adjacency requires grid geometry");
  const Geometry& g = *seg.geometry();
  const auto ids = seg.pixel_ids();
  const std::size_t k = seg.segment_count();
  std::vector<std::vector<std::uint32_t>> raw(k);
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    if (a == b) return;
    raw[a].push_back(b);
    raw[b].push_back(a);
  };
  for (std::uint32_t r = 0; r < g.height; ++r) {
    for (std::uint32_t c = 0; c < g.width; ++c) {
      const std::uint32_t here = ids[std::size_t{r} * g.width + c];
      if (c + 1 < g.width) link(here, ids[std::size_t{r} * g.width + c + 1]);
      if (r + 1 < g.height) {
        link(here, ids[std::size_t{r + 1} * g.width + c]);
        if (connectivity == Connectivity::eight) {
          if (c + 1 < g.width) link(here, ids[std::size_t{r + 1} * g.width + c + 1]);
          if (c > 0) link(here, ids[std::size_t{r + 1} * g.width + c - 1]);
        }
      }
    }
  }
  AdjacencyGraph out;
  out.neighbors.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    auto& v = raw[s];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    out.neighbors[s] = std::move(v);
  }
  return out;
}

AttributionMap occlusion_attribution(const Model& model, const InputVector& input,
                                     const Segmentation& seg, const LabelId& label, float v) {
  if (seg.n() != input.size()) {
    throw DimensionError("segmentation covers n = " + std::to_string(seg.n()) + ", input has " +
                         std::to_string(input.size()));
  }
  if (label.index >= model.label_count()) {
    throw IndexRangeError("label " + std::to_string(label.index) + " outside model's " +
                          std::to_string(model.label_count()) + " labels");
  }
  const double base = predict(model, input)[label.index];
  const std::size_t k = seg.segment_count();
  std::vector<double> drop(k, 0.0);
  parallel_for(k, [&](std::size_t s) {
    const auto redacted = redact(input, seg.members(static_cast<std::uint32_t>(s)), v);
    drop[s] = base - predict(model, redacted)[label.index];
  });
  AttributionMap out{std::vector<double>(input.size(), 0.0), label, "occlusion"};
  for (std::size_t i = 0; i < input.size(); ++i) out.values[i] = drop[seg.segment_of(i)];
  return out;
}

}  // namespace redcert
