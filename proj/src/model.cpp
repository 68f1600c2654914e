#include "redcert/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "redcert/error.hpp"

namespace redcert {

SoftmaxVector predict(const Model& model, const InputVector& input) {
  if (input.size() != model.input_dim()) {
    throw DimensionError("input has n = " + std::to_string(input.size()) + " but model '" +
                         model.model_id() + "' expects " + std::to_string(model.input_dim()));
  }
  ++model.evaluations_;
  SoftmaxVector out = model.evaluate(input);
  if (out.size() != model.label_count()) {
    throw EvaluationError("model '" + model.model_id() + "' returned " +
                          std::to_string(out.size()) + " probabilities, expected " +
                          std::to_string(model.label_count()));
  }
  validate_softmax(out);
  return out;
}

InputVector redact(const InputVector& input, const IndexSet& s, float v) {
  if (s.bound() > input.size()) {
    throw IndexRangeError("redaction index " + std::to_string(s.bound() - 1) +
                          " out of range for n = " + std::to_string(input.size()));
  }
  std::vector<float> values(input.values().begin(), input.values().end());
  for (std::uint32_t idx : s) values[idx] = v;
  return InputVector(std::move(values), input.geometry());
}

IndexSet expand_pixels_to_indices(
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pixels,
    const std::optional<Geometry>& geometry) {
  if (!geometry) throw DimensionError("pixel expansion requires grid geometry");
  const Geometry& g = *geometry;
  std::vector<std::uint32_t> out;
  out.reserve(pixels.size() * g.channels);
  for (const auto& [row, col] : pixels) {
    if (row >= g.height || col >= g.width) {
      throw IndexRangeError("pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") outside " + std::to_string(g.height) + "x" +
                            std::to_string(g.width) + " grid");
    }
    const std::uint64_t base = (std::uint64_t{row} * g.width + col) * g.channels;
    for (std::uint32_t c = 0; c < g.channels; ++c) {
      out.push_back(static_cast<std::uint32_t>(base + c));
    }
  }
  return IndexSet::from_unsorted(std::move(out));
}

std::vector<std::uint32_t> tile_ids(const Geometry& geometry, std::uint32_t rows,
                                    std::uint32_t cols) {
  if (rows == 0 || cols == 0 || geometry.height == 0 || geometry.width == 0 ||
      geometry.channels == 0) {
    throw DimensionError("degenerate grid dimensions");
  }
  if (rows > geometry.height || cols > geometry.width) {
    throw DimensionError("tile grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " finer than pixel grid " + std::to_string(geometry.height) + "x" +
                         std::to_string(geometry.width));
  }
  const std::uint32_t tile_h = geometry.height / rows;
  const std::uint32_t tile_w = geometry.width / cols;
  std::vector<std::uint32_t> ids(geometry.pixels());
  for (std::uint32_t r = 0; r < geometry.height; ++r) {
    const std::uint32_t tr = std::min(r / tile_h, rows - 1);
    for (std::uint32_t c = 0; c < geometry.width; ++c) {
      const std::uint32_t tc = std::min(c / tile_w, cols - 1);
      ids[std::size_t{r} * geometry.width + c] = tr * cols + tc;
    }
  }
  return ids;
}

std::vector<std::vector<std::uint32_t>> PlantedModelSpec::label_supports() const {
  std::vector<std::vector<std::uint32_t>> out(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t k = 0; k < weights[l].size(); ++k) {
      if (weights[l][k] != 0.0) out[l].push_back(static_cast<std::uint32_t>(k));
    }
  }
  return out;
}

namespace {

std::string planted_model_id(const PlantedModelSpec& spec) {
  std::vector<std::byte> bytes;
  auto put = [&bytes](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  };
  put(spec.geometry.height);
  put(spec.geometry.width);
  put(spec.geometry.channels);
  put(spec.rows);
  put(spec.cols);
  put(std::bit_cast<std::uint64_t>(spec.temperature));
  put(spec.weights.size());
  for (const auto& row : spec.weights) {
    for (double w : row) put(std::bit_cast<std::uint64_t>(w));
  }
  return "planted-" + sha256_hex(bytes).substr(0, 16);
}

}  // namespace

PlantedModel::PlantedModel(PlantedModelSpec spec) : spec_(std::move(spec)) {
  if (!(spec_.temperature > 0.0) || !std::isfinite(spec_.temperature)) {
    throw DimensionError("planted model temperature must be positive and finite");
  }
  if (spec_.weights.empty()) throw DimensionError("planted model needs at least one label");
  const std::size_t k = spec_.segment_count();
  for (const auto& row : spec_.weights) {
    if (row.size() != k) {
      throw DimensionError("weight row has " + std::to_string(row.size()) +
                           " entries, grid defines " + std::to_string(k) + " segments");
    }
    for (double w : row) {
      if (!std::isfinite(w)) throw DimensionError("planted model weights must be finite");
    }
  }
  const auto pixel_tiles = tile_ids(spec_.geometry, spec_.rows, spec_.cols);
  n_ = static_cast<std::size_t>(spec_.geometry.size());
  segment_of_.resize(n_);
  segment_size_.assign(k, 0);
  const std::uint32_t channels = spec_.geometry.channels;
  for (std::size_t i = 0; i < n_; ++i) {
    segment_of_[i] = pixel_tiles[i / channels];
    ++segment_size_[segment_of_[i]];
  }
  model_id_ = planted_model_id(spec_);
}

std::vector<double> PlantedModel::logits(const InputVector& input) const {
  if (input.size() != n_) {
    throw DimensionError("input has n = " + std::to_string(input.size()) + ", planted model expects " +
                         std::to_string(n_));
  }
  const std::size_t k = spec_.segment_count();
  std::vector<double> sums(k, 0.0);
  const auto values = input.values();
  for (std::size_t i = 0; i < n_; ++i) sums[segment_of_[i]] += values[i];
  std::vector<double> out(spec_.label_count(), 0.0);
  for (std::size_t l = 0; l < out.size(); ++l) {
    double acc = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      acc += spec_.weights[l][s] * (sums[s] / static_cast<double>(segment_size_[s]));
    }
    out[l] = acc / spec_.temperature;
  }
  return out;
}

SoftmaxVector PlantedModel::evaluate(const InputVector& input) const {
  std::vector<double> z = logits(input);
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : z) v /= total;
  return SoftmaxVector{std::move(z)};
}

std::shared_ptr<const PlantedModel> make_planted_model(PlantedModelSpec spec) {
  return std::make_shared<const PlantedModel>(std::move(spec));
}

}  // namespace redcert
