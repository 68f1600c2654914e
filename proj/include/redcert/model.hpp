#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "redcert/index_set.hpp"
#include "redcert/input.hpp"

namespace redcert {

// Comparisons against certificate bounds lean toward acceptance by this much,
// so values printed at 3-4 digits that sit exactly on a bound still pass.
inline constexpr double kAcceptEpsilon = 1e-7;

inline bool at_most(double value, double bound) { return value <= bound + kAcceptEpsilon; }
inline bool at_least(double value, double bound) { return value >= bound - kAcceptEpsilon; }

// Deterministic classifier f : R^n -> [0,1]^m. Implementations must be safe
// to call concurrently; serial backends serialize internally.
class Model {
 public:
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  virtual ~Model() = default;

  [[nodiscard]] virtual const std::string& model_id() const = 0;
  [[nodiscard]] virtual std::size_t input_dim() const = 0;
  [[nodiscard]] virtual std::size_t label_count() const = 0;

  // Number of evaluations served through predict() so far.
  [[nodiscard]] std::uint64_t evaluations() const { return evaluations_.load(); }

 protected:
  [[nodiscard]] virtual SoftmaxVector evaluate(const InputVector& input) const = 0;

 private:
  friend SoftmaxVector predict(const Model& model, const InputVector& input);
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

using ModelHandle = std::shared_ptr<const Model>;

// Checks input.size() == model.input_dim() (DimensionError) and validates the
// returned softmax (EvaluationError).
SoftmaxVector predict(const Model& model, const InputVector& input);

// S-redaction: values at every index in s replaced by v.
InputVector redact(const InputVector& input, const IndexSet& s, float v = 0.0f);

// All channel indices of the given (row, col) pixels, channel-last layout.
IndexSet expand_pixels_to_indices(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pixels,
                                  const std::optional<Geometry>& geometry);

// Per-pixel tile ids for a rows x cols tiling of an H x W grid. Tile extents
// are H/rows and W/cols; the last tile row/column absorbs the remainder.
std::vector<std::uint32_t> tile_ids(const Geometry& geometry, std::uint32_t rows,
                                    std::uint32_t cols);

// Synthetic test subject: logit_l = sum_k weights[l][k] * mean(segment k) / temperature.
struct PlantedModelSpec {
  Geometry geometry;
  std::uint32_t rows = 1;
  std::uint32_t cols = 1;
  std::vector<std::vector<double>> weights;  // m x K, K = rows * cols
  double temperature = 1.0;

  [[nodiscard]] std::size_t segment_count() const { return std::size_t{rows} * cols; }
  [[nodiscard]] std::size_t label_count() const { return weights.size(); }
  // Segment ids with nonzero weight for each label.
  [[nodiscard]] std::vector<std::vector<std::uint32_t>> label_supports() const;
};

class PlantedModel final : public Model {
 public:
  explicit PlantedModel(PlantedModelSpec spec);

  [[nodiscard]] const std::string& model_id() const override { return model_id_; }
  [[nodiscard]] std::size_t input_dim() const override { return n_; }
  [[nodiscard]] std::size_t label_count() const override { return spec_.label_count(); }
  [[nodiscard]] const PlantedModelSpec& spec() const { return spec_; }

  // Raw logits, exposed for tests that recompute softmax independently.
  [[nodiscard]] std::vector<double> logits(const InputVector& input) const;

 protected:
  [[nodiscard]] SoftmaxVector evaluate(const InputVector& input) const override;

 private:
  PlantedModelSpec spec_;
  std::size_t n_;
  std::vector<std::uint32_t> segment_of_;  // per value index
  std::vector<std::size_t> segment_size_;
  std::string model_id_;
};

std::shared_ptr<const PlantedModel> make_planted_model(PlantedModelSpec spec);

}  // namespace redcert
