#include "redcert/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <set>
#include <string>

#include "redcert/error.hpp"
#include "redcert/parallel.hpp"

namespace redcert::oracle {

std::uint32_t mask_of(const std::vector<std::uint32_t>& segments) {
  std::uint32_t mask = 0;
  for (std::uint32_t s : segments) {
    if (s >= 32) throw OracleLimitError("segment id too large for a subset mask");
    mask |= 1u << s;
  }
  return mask;
}

std::vector<std::uint32_t> segments_of(std::uint32_t mask) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = 0; mask != 0; ++s, mask >>= 1) {
    if (mask & 1u) out.push_back(s);
  }
  return out;
}

SubsetTable evaluate_subsets(const Model& model, const InputVector& input, const Segmentation& seg,
                             const LabelId& l1, const LabelId& l2, float v) {
  const std::size_t k = seg.segment_count();
  if (k > kMaxAttributionSegments) {
    throw OracleLimitError("exhaustive oracle limited to " +
                           std::to_string(kMaxAttributionSegments) + " segments, got " +
                           std::to_string(k));
  }
  if (seg.n() != input.size()) throw DimensionError("segmentation does not cover the input");
  SubsetTable t;
  t.segments = k;
  const std::size_t total = std::size_t{1} << k;
  t.l1.resize(total);
  t.l2.resize(total);
  parallel_for(total, [&](std::size_t mask) {
    std::vector<std::uint32_t> idx;
    for (std::uint32_t s : segments_of(static_cast<std::uint32_t>(mask))) {
      const auto m = seg.members(s).indices();
      idx.insert(idx.end(), m.begin(), m.end());
    }
    const SoftmaxVector out = predict(model, redact(input, IndexSet::from_unsorted(std::move(idx)), v));
    t.l1[mask] = out[l1.index];
    t.l2[mask] = out[l2.index];
  });
  t.p1 = t.l1[0];
  t.p2 = t.l2[0];
  t.evaluations = total;
  return t;
}

bool collapses_l1_keeps_l2(const SubsetTable& t, std::uint32_t mask, double delta) {
  return at_most(t.l1[mask], delta * t.p1) && at_least(t.l2[mask], (1.0 - delta) * t.p2);
}

bool collapses_l2_keeps_l1(const SubsetTable& t, std::uint32_t mask, double delta) {
  return at_most(t.l2[mask], delta * t.p2) && at_least(t.l1[mask], (1.0 - delta) * t.p1);
}

bool collapses_both(const SubsetTable& t, std::uint32_t mask, double delta) {
  return at_most(t.l1[mask], delta * t.p1) && at_most(t.l2[mask], delta * t.p2);
}

namespace {

// Masks qualifying under pred with no qualifying proper subset.
std::vector<std::uint32_t> minimal_masks(std::size_t k,
                                         const std::function<bool(std::uint32_t)>& pred) {
  const std::size_t total = std::size_t{1} << k;
  std::vector<char> has_sub(total, 0);  // some subset (inclusive) qualifies
  std::vector<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    bool proper = false;
    for (std::uint32_t rest = mask; rest != 0; rest &= rest - 1) {
      const std::uint32_t bit = rest & (~rest + 1);
      if (has_sub[mask ^ bit]) {
        proper = true;
        break;
      }
    }
    const bool self = pred(mask);
    has_sub[mask] = static_cast<char>(proper || self);
    if (self && !proper) out.push_back(mask);
  }
  return out;
}

void require_pair_limit(std::size_t k) {
  if (k > kMaxPairSegments) {
    throw OracleLimitError("pair oracles limited to " + std::to_string(kMaxPairSegments) +
                           " segments, got " + std::to_string(k));
  }
}

}  // namespace

OracleVerdict brute_attribution(const Model& model, const InputVector& input,
                                const Segmentation& seg, const LabelId& label, double delta,
                                float v) {
  // The second label slot is unused; evaluate the same label twice.
  const SubsetTable t = evaluate_subsets(model, input, seg, label, label, v);
  OracleVerdict out;
  out.evaluations = t.evaluations;
  for (std::uint32_t mask : minimal_masks(t.segments, [&](std::uint32_t m) {
         return at_most(t.l1[m], delta * t.p1);
       })) {
    out.witnesses.push_back({segments_of(mask), {}});
  }
  out.exists = !out.witnesses.empty();
  return out;
}

OracleVerdict brute_disjoint(const SubsetTable& t, double delta) {
  require_pair_limit(t.segments);
  const auto first = minimal_masks(t.segments, [&](std::uint32_t m) {
    return collapses_l1_keeps_l2(t, m, delta);
  });
  const auto second = minimal_masks(t.segments, [&](std::uint32_t m) {
    return collapses_l2_keeps_l1(t, m, delta);
  });
  OracleVerdict out;
  out.evaluations = t.evaluations;
  for (std::uint32_t a : first) {
    for (std::uint32_t b : second) {
      if ((a & b) == 0) out.witnesses.push_back({segments_of(a), segments_of(b)});
    }
  }
  out.exists = !out.witnesses.empty();
  return out;
}

OracleVerdict brute_disjoint(const Model& model, const InputVector& input, const Segmentation& seg,
                             const LabelId& l1, const LabelId& l2, double delta, float v) {
  require_pair_limit(seg.segment_count());
  return brute_disjoint(evaluate_subsets(model, input, seg, l1, l2, v), delta);
}

OracleVerdict brute_overlap(const SubsetTable& t, double delta) {
  require_pair_limit(t.segments);
  OracleVerdict out;
  out.evaluations = t.evaluations;
  if (brute_disjoint(t, delta).exists) return out;
  for (std::uint32_t mask : minimal_masks(t.segments, [&](std::uint32_t m) {
         return collapses_both(t, m, delta);
       })) {
    out.witnesses.push_back({segments_of(mask), {}});
  }
  out.exists = !out.witnesses.empty();
  return out;
}

OracleVerdict brute_overlap(const Model& model, const InputVector& input, const Segmentation& seg,
                            const LabelId& l1, const LabelId& l2, double delta, float v) {
  require_pair_limit(seg.segment_count());
  return brute_overlap(evaluate_subsets(model, input, seg, l1, l2, v), delta);
}

std::string_view fixture_kind_name(FixtureKind kind) {
  switch (kind) {
    case FixtureKind::planted_disjoint:
      return "planted-disjoint";
    case FixtureKind::planted_overlap:
      return "planted-overlap";
    case FixtureKind::noise:
      return "noise";
  }
  return "?";
}

FixtureKind parse_fixture_kind(std::string_view name) {
  if (name == "planted-disjoint") return FixtureKind::planted_disjoint;
  if (name == "planted-overlap") return FixtureKind::planted_overlap;
  if (name == "noise") return FixtureKind::noise;
  throw ConfigError("unknown fixture kind '" + std::string(name) + "'");
}

namespace {

constexpr std::uint32_t kMaxAttempts = 32;
constexpr double kFixtureDelta = 0.2;
// The background label sits above the planted ones so that it, not the other
// planted label, absorbs most of the mass freed by a redaction. Otherwise a
// partial redaction of one support collapses that label only because its
// partner takes over, and the union of two such sets collapses neither.
constexpr double kBackgroundLead = 1.5;
constexpr double kDistractorWeight = 0.1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Portable generator: splitmix64 stream, doubles from the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    return splitmix64(state_);
  }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::uint32_t below(std::uint32_t n) { return static_cast<std::uint32_t>(next() % n); }

 private:
  std::uint64_t state_;
};

std::vector<std::uint32_t> tile_neighbors(std::uint32_t t, std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint32_t> out;
  const std::uint32_t r = t / cols;
  const std::uint32_t c = t % cols;
  if (r > 0) out.push_back(t - cols);
  if (r + 1 < rows) out.push_back(t + cols);
  if (c > 0) out.push_back(t - 1);
  if (c + 1 < cols) out.push_back(t + 1);
  return out;
}

// A pair of 4-adjacent tiles avoiding `blocked`. Without such a pair, any two
// free tiles when `scattered`, else empty.
std::vector<std::uint32_t> pick_pair(Rng& rng, std::uint32_t rows, std::uint32_t cols,
                                     const std::set<std::uint32_t>& blocked, bool scattered) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const std::uint32_t k = rows * cols;
  for (std::uint32_t t = 0; t < k; ++t) {
    if (blocked.count(t)) continue;
    for (std::uint32_t u : tile_neighbors(t, rows, cols)) {
      if (u > t && !blocked.count(u)) pairs.emplace_back(t, u);
    }
  }
  if (pairs.empty()) {
    if (!scattered) return {};
    // Grids too narrow for adjacent pairs: fall back to any two free tiles.
    std::vector<std::uint32_t> free;
    for (std::uint32_t t = 0; t < k; ++t) {
      if (!blocked.count(t)) free.push_back(t);
    }
    if (free.size() < 2) return {};
    const std::uint32_t i = rng.below(static_cast<std::uint32_t>(free.size()));
    std::uint32_t j = rng.below(static_cast<std::uint32_t>(free.size() - 1));
    if (j >= i) ++j;
    return {std::min(free[i], free[j]), std::max(free[i], free[j])};
  }
  const auto& p = pairs[rng.below(static_cast<std::uint32_t>(pairs.size()))];
  return {p.first, p.second};
}

Fixture build_candidate(const FixtureSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint32_t k = spec.rows * spec.cols;
  std::vector<float> values(static_cast<std::size_t>(spec.geometry.size()));
  for (float& x : values) x = static_cast<float>(rng.uniform(0.2, 1.0));
  InputVector input(std::move(values), spec.geometry);
  Segmentation seg = grid_segmenter(spec.geometry, spec.rows, spec.cols);

  std::vector<double> means(k, 0.0);
  for (std::uint32_t s = 0; s < k; ++s) {
    double acc = 0.0;
    for (std::uint32_t i : seg.members(s)) acc += input.values()[i];
    means[s] = acc / static_cast<double>(seg.members(s).size());
  }

  PlantedModelSpec ms;
  ms.geometry = spec.geometry;
  ms.rows = spec.rows;
  ms.cols = spec.cols;
  ms.temperature = 1.0;
  ms.weights.assign(spec.labels, std::vector<double>(k, 0.0));

  std::vector<std::uint32_t> sup1;
  std::vector<std::uint32_t> sup2;
  if (spec.kind != FixtureKind::noise) {
    const double target = 3.0 + 2.0 * spec.margin;
    const double background = target + kBackgroundLead;
    sup1 = pick_pair(rng, spec.rows, spec.cols, {}, true);
    if (sup1.empty()) throw FixtureError("grid too small for a planted support");
    auto plant = [&](std::vector<double>& row, const std::vector<std::uint32_t>& support) {
      const double f = rng.uniform(0.35, 0.65);
      row[support[0]] = target * f / means[support[0]];
      row[support[1]] = target * (1.0 - f) / means[support[1]];
    };
    plant(ms.weights[0], sup1);
    if (spec.kind == FixtureKind::planted_disjoint) {
      // Separated: B's tiles avoid A's tiles and their 4-neighbors when possible.
      std::set<std::uint32_t> blocked(sup1.begin(), sup1.end());
      for (std::uint32_t t : sup1) {
        for (std::uint32_t u : tile_neighbors(t, spec.rows, spec.cols)) blocked.insert(u);
      }
      sup2 = pick_pair(rng, spec.rows, spec.cols, blocked, false);
      if (sup2.empty()) sup2 = pick_pair(rng, spec.rows, spec.cols, {sup1.begin(), sup1.end()}, true);
      if (sup2.empty()) throw FixtureError("grid too small for two disjoint supports");
      plant(ms.weights[1], sup2);
    } else {
      sup2 = sup1;
      ms.weights[1] = ms.weights[0];
    }
    if (spec.labels > 2) {
      std::vector<std::uint32_t> rest;
      for (std::uint32_t s = 0; s < k; ++s) {
        if (std::find(sup1.begin(), sup1.end(), s) == sup1.end() &&
            std::find(sup2.begin(), sup2.end(), s) == sup2.end()) {
          rest.push_back(s);
        }
      }
      std::vector<double> share(rest.size());
      double total = 0.0;
      for (double& x : share) total += (x = rng.uniform(0.5, 1.5));
      for (std::size_t i = 0; i < rest.size(); ++i) {
        ms.weights[2][rest[i]] = background * share[i] / total / means[rest[i]];
      }
    }
    for (std::uint32_t l = 3; l < spec.labels; ++l) {
      for (std::uint32_t s = 0; s < k; ++s) {
        ms.weights[l][s] = rng.uniform(-kDistractorWeight, kDistractorWeight) / means[s];
      }
    }
  }
  auto model = make_planted_model(std::move(ms));
  return Fixture{std::move(model), std::move(input), std::move(seg), LabelId{0, "l0"},
                 LabelId{1, "l1"}, spec, 1, std::move(sup1), std::move(sup2)};
}

}  // namespace

Fixture generate_fixture(const FixtureSpec& spec) {
  if (spec.labels < 2) throw ConfigError("fixtures need at least two labels");
  if (!std::isfinite(spec.margin)) throw ConfigError("fixture margin must be finite");
  const std::size_t k = std::size_t{spec.rows} * spec.cols;
  if (k > kMaxAttributionSegments) {
    throw ConfigError("fixtures are limited to K <= " + std::to_string(kMaxAttributionSegments));
  }
  for (std::uint32_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? spec.seed : splitmix64(spec.seed ^ (0xA5A5ull * attempt));
    Fixture f = build_candidate(spec, seed);
    f.attempts = attempt + 1;
    bool ok = true;
    if (spec.kind != FixtureKind::noise && k <= kMaxPairSegments) {
      const SubsetTable t = evaluate_subsets(*f.model, f.input, f.seg, f.l1, f.l2);
      ok = spec.kind == FixtureKind::planted_disjoint ? brute_disjoint(t, kFixtureDelta).exists
                                                      : brute_overlap(t, kFixtureDelta).exists;
    }
    if (ok) return f;
  }
  throw FixtureError("could not realize a " + std::string(fixture_kind_name(spec.kind)) +
                     " fixture with margin " + std::to_string(spec.margin) + " in " +
                     std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace redcert::oracle
