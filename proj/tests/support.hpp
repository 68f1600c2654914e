#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "redcert/model.hpp"
#include "redcert/oracle.hpp"
#include "redcert/segmentation.hpp"

namespace redcert::testing {

// Model answering from a lookup keyed by the set of zeroed indices. Inputs
// are expected to be all-ones apart from a redaction to 0.
class TableModel final : public Model {
 public:
  TableModel(std::size_t n, std::map<std::vector<std::uint32_t>, std::vector<double>> table,
             std::vector<double> fallback)
      : n_(n), m_(fallback.size()), table_(std::move(table)), fallback_(std::move(fallback)) {}

  const std::string& model_id() const override { return id_; }
  std::size_t input_dim() const override { return n_; }
  std::size_t label_count() const override { return m_; }

 protected:
  SoftmaxVector evaluate(const InputVector& input) const override {
    std::vector<std::uint32_t> zeroed;
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (input.values()[i] == 0.0f) zeroed.push_back(static_cast<std::uint32_t>(i));
    }
    auto it = table_.find(zeroed);
    return SoftmaxVector{it == table_.end() ? fallback_ : it->second};
  }

 private:
  std::string id_ = "table";
  std::size_t n_;
  std::size_t m_;
  std::map<std::vector<std::uint32_t>, std::vector<double>> table_;
  std::vector<double> fallback_;
};

inline InputVector ones(std::size_t n) { return InputVector(std::vector<float>(n, 1.0f)); }

// Straight-line recomputation of a planted model's softmax: naive per-tile
// means from pixel coordinates, then a max-shifted softmax.
inline std::vector<double> planted_softmax_naive(const PlantedModelSpec& spec, const InputVector& x) {
  const Geometry g = spec.geometry;
  const std::uint32_t th = g.height / spec.rows;
  const std::uint32_t tw = g.width / spec.cols;
  const std::size_t k = spec.segment_count();
  std::vector<double> sum(k, 0.0);
  std::vector<double> cnt(k, 0.0);
  for (std::uint32_t r = 0; r < g.height; ++r) {
    for (std::uint32_t c = 0; c < g.width; ++c) {
      const std::uint32_t tr = std::min(r / th, spec.rows - 1);
      const std::uint32_t tc = std::min(c / tw, spec.cols - 1);
      const std::uint32_t tile = tr * spec.cols + tc;
      for (std::uint32_t ch = 0; ch < g.channels; ++ch) {
        sum[tile] += x.values()[(std::size_t{r} * g.width + c) * g.channels + ch];
        cnt[tile] += 1.0;
      }
    }
  }
  std::vector<double> logits(spec.label_count(), 0.0);
  for (std::size_t l = 0; l < logits.size(); ++l) {
    for (std::size_t t = 0; t < k; ++t) logits[l] += spec.weights[l][t] * (sum[t] / cnt[t]);
    logits[l] /= spec.temperature;
  }
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double total = 0.0;
  for (double& z : logits) total += (z = std::exp(z - mx));
  for (double& z : logits) z /= total;
  return logits;
}

inline oracle::Fixture fixture(oracle::FixtureKind kind, std::uint64_t seed = 0) {
  oracle::FixtureSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return oracle::generate_fixture(spec);
}

}  // namespace redcert::testing
