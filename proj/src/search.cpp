#include "redcert/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <utility>

#include "redcert/error.hpp"
#include "redcert/parallel.hpp"

namespace redcert {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::alg1:
      return "alg1";
    case Strategy::alg2:
      return "alg2";
    case Strategy::alg3:
      return "alg3";
    case Strategy::overlap:
      return "overlap";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "alg1") return Strategy::alg1;
  if (name == "alg2") return Strategy::alg2;
  if (name == "alg3") return Strategy::alg3;
  if (name == "overlap") return Strategy::overlap;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::vector<Strategy> parse_strategy_list(std::string_view list) {
  std::vector<Strategy> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string_view item =
        list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (!item.empty()) out.push_back(parse_strategy(item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("strategy list is empty");
  return out;
}

std::string_view outcome_name(SearchOutcome::Kind kind) {
  switch (kind) {
    case SearchOutcome::Kind::disjoint:
      return "DISJOINT";
    case SearchOutcome::Kind::overlapping:
      return "OVERLAPPING";
    case SearchOutcome::Kind::undetermined:
      return "UNDETERMINED";
  }
  return "?";
}

std::string format_trace(const std::vector<TraceStep>& trace) {
  std::ostringstream out;
  out << "sweep\tstep\tsegment\tp_l1\tp_l2\tpct_l1\tpct_l2\n";
  out << std::setprecision(17);
  for (const auto& t : trace) {
    out << t.sweep << '\t' << t.step << '\t' << t.segment << '\t' << t.p_l1 << '\t' << t.p_l2
        << '\t' << t.pct_l1 << '\t' << t.pct_l2 << '\n';
  }
  return out.str();
}

PairCase make_pair_case(ModelHandle model, InputVector input, Segmentation seg, LabelId l1,
                        LabelId l2, const CaseParams& params,
                        std::optional<SegmentAttribution> attr1,
                        std::optional<SegmentAttribution> attr2) {
  if (!model) throw ConfigError("pair case needs a model");
  if (!(params.delta > 0.0 && params.delta <= 0.5)) {
    throw ConfigError("delta must lie in (0, 0.5]");
  }
  if (!(params.options.max_fraction > 0.0 && params.options.max_fraction <= 1.0)) {
    throw ConfigError("max_fraction must lie in (0, 1]");
  }
  if (!(params.options.tau >= 0.0)) throw ConfigError("tau must be nonnegative");
  if (l1.index == l2.index) throw ConfigError("labels of a pair must differ");
  const std::size_t m = model->label_count();
  if (l1.index >= m || l2.index >= m) {
    throw ConfigError("label outside the model's " + std::to_string(m) + " labels");
  }
  if (seg.n() != input.size()) {
    throw DimensionError("segmentation covers n = " + std::to_string(seg.n()) +
                         ", input has " + std::to_string(input.size()));
  }
  const SoftmaxVector base = predict(*model, input);
  const double p1 = base[l1.index];
  const double p2 = base[l2.index];
  if (p1 < params.min_p || p2 < params.min_p) {
    std::ostringstream msg;
    msg << "baseline prediction below min_p = " << params.min_p << " (p1 = " << p1
        << ", p2 = " << p2 << ")";
    throw LowPredictionError(msg.str());
  }
  const std::size_t k = seg.segment_count();
  auto check_attr = [k](const SegmentAttribution& a) {
    if (a.scores.size() != k || a.normalized.size() != k || a.ranking.size() != k) {
      throw DimensionError("segment attribution does not match the segmentation's " +
                           std::to_string(k) + " segments");
    }
  };
  if (!attr1) attr1 = accumulate(occlusion_attribution(*model, input, seg, l1, params.v), seg);
  if (!attr2) attr2 = accumulate(occlusion_attribution(*model, input, seg, l2, params.v), seg);
  check_attr(*attr1);
  check_attr(*attr2);
  std::optional<AdjacencyGraph> adj;
  if (seg.geometry()) adj = adjacency(seg, params.options.connectivity);
  return PairCase{std::move(model), std::move(input), std::move(seg), std::move(adj),
                  std::move(l1), std::move(l2), p1, p2, params.delta, std::move(*attr1),
                  std::move(*attr2), params.v, params.options};
}

namespace {

using Kind = SearchOutcome::Kind;

// Evaluates the pair's two labels under a redaction and counts calls.
class Probe {
 public:
  Probe(const Model& model, const InputVector& input, const LabelId& l1, const LabelId& l2,
        float v)
      : model_(model), input_(input), l1_(l1.index), l2_(l2.index), v_(v) {}

  std::pair<double, double> eval(const IndexSet& s) const {
    ++count_;
    const SoftmaxVector out = predict(model_, redact(input_, s, v_));
    return {out[l1_], out[l2_]};
  }

  [[nodiscard]] std::uint64_t count() const { return count_.load(); }

 private:
  const Model& model_;
  const InputVector& input_;
  std::uint32_t l1_;
  std::uint32_t l2_;
  float v_;
  mutable std::atomic<std::uint64_t> count_{0};
};

std::size_t side_cap(const PairCase& c) {
  const std::size_t k = c.seg.segment_count();
  const auto cap = static_cast<std::size_t>(std::ceil(c.options.max_fraction * static_cast<double>(k) - 1e-9));
  return std::clamp<std::size_t>(cap, 1, k);
}

TraceStep make_step(std::string sweep, std::uint32_t step, std::uint32_t segment, double a,
                    double b, double p1, double p2) {
  return TraceStep{std::move(sweep), step, segment, a, b, a / p1 * 100.0, b / p2 * 100.0};
}

struct Sweep {
  std::vector<std::uint32_t> taken;
  IndexSet indices;
  bool stopped = false;
  double p_l1 = 0.0;
  double p_l2 = 0.0;
};

// Accumulates segments in the given order, evaluating after each one, until
// stop(p_l1, p_l2) holds or the order or cap is exhausted.
Sweep accumulate_until(const PairCase& c, const Probe& probe, const std::vector<std::uint32_t>& order,
                       std::size_t cap, const std::string& name,
                       const std::function<bool(double, double)>& stop,
                       std::vector<TraceStep>& trace) {
  Sweep out;
  for (std::uint32_t s : order) {
    if (out.taken.size() >= cap) break;
    out.taken.push_back(s);
    out.indices = out.indices.unite(c.seg.members(s));
    std::tie(out.p_l1, out.p_l2) = probe.eval(out.indices);
    trace.push_back(make_step(name, static_cast<std::uint32_t>(out.taken.size()), s, out.p_l1,
                              out.p_l2, c.p1, c.p2));
    if (stop(out.p_l1, out.p_l2)) {
      out.stopped = true;
      break;
    }
  }
  return out;
}

std::vector<IndexSet> members_of(const Segmentation& seg, const std::vector<std::uint32_t>& ids) {
  std::vector<IndexSet> out;
  out.reserve(ids.size());
  for (std::uint32_t s : ids) out.push_back(seg.members(s));
  return out;
}

DisjointCertificate disjoint_certificate(const PairCase& c, const std::vector<std::uint32_t>& side1,
                                         const std::vector<std::uint32_t>& side2) {
  DisjointCertificate cert;
  cert.model_id = c.model->model_id();
  cert.input_digest = c.input.digest();
  cert.l1 = c.l1;
  cert.l2 = c.l2;
  cert.p1 = c.p1;
  cert.p2 = c.p2;
  cert.delta = c.delta;
  cert.v = c.v;
  cert.s1 = c.seg.indices_of(side1);
  cert.s2 = c.seg.indices_of(side2);
  cert.segments1 = members_of(c.seg, side1);
  cert.segments2 = members_of(c.seg, side2);
  return cert;
}

// 1 for l1, 2 for l2.
int tie_break(const PairCase& c, std::uint32_t s) {
  const auto& n1 = c.attr1.normalized;
  const auto& n2 = c.attr2.normalized;
  if (n1[s] > n2[s]) return 1;
  if (n2[s] > n1[s]) return 2;
  if (c.adj && !c.adj->neighbors[s].empty()) {
    double diff = 0.0;
    for (std::uint32_t j : c.adj->neighbors[s]) diff += n1[j] - n2[j];
    diff /= static_cast<double>(c.adj->neighbors[s].size());
    if (diff > 0.0) return 1;
    if (diff < 0.0) return 2;
  }
  if (c.p2 > c.p1) return 2;
  return 1;
}

bool own_collapsed(double p_own, double base_own, double delta) {
  return at_most(p_own, delta * base_own);
}

bool companion_kept(double p_other, double base_other, double delta) {
  return at_least(p_other, (1.0 - delta) * base_other);
}

}  // namespace

Segregation segregate_segments(const PairCase& c) {
  Segregation out;
  const auto k = static_cast<std::uint32_t>(c.seg.segment_count());
  std::vector<int> side(k, 0);
  for (std::uint32_t s = 0; s < k; ++s) side[s] = tie_break(c, s);
  // Each side lists its segments in that label's rank order.
  for (std::uint32_t s : c.attr1.ranking) {
    if (side[s] == 1) out.l1.push_back(s);
  }
  for (std::uint32_t s : c.attr2.ranking) {
    if (side[s] == 2) out.l2.push_back(s);
  }
  return out;
}

SearchOutcome find_disjoint_alg1(const PairCase& c) {
  SearchOutcome out;
  const Probe probe(*c.model, c.input, c.l1, c.l2, c.v);
  const Segregation parts = segregate_segments(c);
  const std::size_t cap = side_cap(c);
  const double d = c.delta;

  const Sweep a = accumulate_until(
      c, probe, parts.l1, cap, "alg1/l1",
      [&](double x, double) { return own_collapsed(x, c.p1, d); }, out.trace);
  const Sweep b = accumulate_until(
      c, probe, parts.l2, cap, "alg1/l2",
      [&](double, double y) { return own_collapsed(y, c.p2, d); }, out.trace);
  out.evaluations = probe.count();

  const bool ok1 = a.stopped && companion_kept(a.p_l2, c.p2, d);
  const bool ok2 = b.stopped && companion_kept(b.p_l1, c.p1, d);
  if (ok1 && ok2) {
    out.kind = Kind::disjoint;
    out.certificate = disjoint_certificate(c, a.taken, b.taken);
    out.decided_by = Strategy::alg1;
  }
  return out;
}

SearchOutcome find_overlap(const PairCase& c) {
  SearchOutcome out;
  const Probe probe(*c.model, c.input, c.l1, c.l2, c.v);
  const std::size_t cap = side_cap(c);
  const double d = c.delta;
  auto both_down = [&](double x, double y) {
    return own_collapsed(x, c.p1, d) && own_collapsed(y, c.p2, d);
  };
  const Sweep a = accumulate_until(c, probe, c.attr1.ranking, cap, "overlap/l1", both_down, out.trace);
  const Sweep b = accumulate_until(c, probe, c.attr2.ranking, cap, "overlap/l2", both_down, out.trace);
  if (a.stopped && b.stopped) {
    std::vector<std::uint32_t> common;
    for (std::uint32_t s : a.taken) {
      if (std::find(b.taken.begin(), b.taken.end(), s) != b.taken.end()) common.push_back(s);
    }
    if (!common.empty()) {
      const IndexSet s = c.seg.indices_of(common);
      const auto [x, y] = probe.eval(s);
      // Only claim overlap if the verifier's split search also comes up empty.
      bool splits = false;
      if (both_down(x, y)) {
        Alg3Input in;
        in.model = c.model.get();
        in.input = &c.input;
        in.units = members_of(c.seg, common);
        in.unit_neighbors.resize(common.size());
        if (c.adj) {
          for (std::size_t u = 0; u < common.size(); ++u) {
            for (std::size_t w = 0; w < common.size(); ++w) {
              if (u != w && c.adj->adjacent(common[u], common[w])) {
                in.unit_neighbors[u].push_back(static_cast<std::uint32_t>(w));
              }
            }
          }
        }
        in.l1 = c.l1;
        in.l2 = c.l2;
        in.p1 = c.p1;
        in.p2 = c.p2;
        in.delta = c.delta;
        in.v = c.v;
        in.tau = c.options.tau;
        const Alg3Result split = alg3_partition(in);
        splits = split.outcome.kind == Kind::disjoint;
        out.evaluations += split.outcome.evaluations;
      }
      if (both_down(x, y) && !splits) {
        OverlapCertificate cert;
        cert.model_id = c.model->model_id();
        cert.input_digest = c.input.digest();
        cert.l1 = c.l1;
        cert.l2 = c.l2;
        cert.p1 = c.p1;
        cert.p2 = c.p2;
        cert.delta = c.delta;
        cert.v = c.v;
        cert.s = s;
        cert.segments = members_of(c.seg, common);
        out.kind = Kind::overlapping;
        out.certificate = std::move(cert);
        out.decided_by = Strategy::overlap;
      }
    }
  }
  out.evaluations += probe.count();
  return out;
}

SearchOutcome find_disjoint_alg2(const PairCase& c) {
  SearchOutcome out;
  const Probe probe(*c.model, c.input, c.l1, c.l2, c.v);
  const std::size_t cap = side_cap(c);
  const double d = c.delta;

  Sweep a = accumulate_until(
      c, probe, c.attr1.ranking, cap, "alg2/l1",
      [&](double x, double) { return own_collapsed(x, c.p1, d); }, out.trace);
  Sweep b = accumulate_until(
      c, probe, c.attr2.ranking, cap, "alg2/l2",
      [&](double, double y) { return own_collapsed(y, c.p2, d); }, out.trace);
  if (!a.stopped || !b.stopped) {
    out.evaluations = probe.count();
    return out;
  }

  std::vector<std::uint32_t> side1 = a.taken;
  std::vector<std::uint32_t> side2 = b.taken;
  std::vector<std::uint32_t> shared;
  for (std::uint32_t s : side1) {
    if (std::find(side2.begin(), side2.end(), s) != side2.end()) shared.push_back(s);
  }
  const auto& n1 = c.attr1.normalized;
  const auto& n2 = c.attr2.normalized;
  std::stable_sort(shared.begin(), shared.end(), [&](std::uint32_t x, std::uint32_t y) {
    const double mx = std::max(n1[x], n2[x]);
    const double my = std::max(n1[y], n2[y]);
    if (mx != my) return mx > my;
    return x < y;
  });
  for (std::uint32_t s : shared) {
    auto& loser = tie_break(c, s) == 1 ? side2 : side1;
    loser.erase(std::remove(loser.begin(), loser.end(), s), loser.end());
  }

  // Re-verify each side on the now-disjoint sets; extend a failing side with
  // its next-ranked unclaimed segments.
  auto claimed = [&](std::uint32_t s) {
    return std::find(side1.begin(), side1.end(), s) != side1.end() ||
           std::find(side2.begin(), side2.end(), s) != side2.end();
  };
  auto repair = [&](std::vector<std::uint32_t>& side, const std::vector<std::uint32_t>& ranking,
                    bool first, const std::string& name) {
    auto satisfied = [&](double x, double y) {
      return first ? own_collapsed(x, c.p1, d) && companion_kept(y, c.p2, d)
                   : own_collapsed(y, c.p2, d) && companion_kept(x, c.p1, d);
    };
    IndexSet idx = c.seg.indices_of(side);
    auto [x, y] = probe.eval(idx);
    if (satisfied(x, y)) return true;
    std::uint32_t step = 0;
    for (std::uint32_t s : ranking) {
      if (side.size() >= cap) break;
      if (claimed(s)) continue;
      side.push_back(s);
      idx = idx.unite(c.seg.members(s));
      std::tie(x, y) = probe.eval(idx);
      out.trace.push_back(make_step(name, ++step, s, x, y, c.p1, c.p2));
      if (satisfied(x, y)) return true;
    }
    return false;
  };
  const bool ok1 = repair(side1, c.attr1.ranking, true, "alg2/l1+");
  const bool ok2 = ok1 && repair(side2, c.attr2.ranking, false, "alg2/l2+");
  out.evaluations = probe.count();
  if (ok1 && ok2) {
    out.kind = Kind::disjoint;
    out.certificate = disjoint_certificate(c, side1, side2);
    out.decided_by = Strategy::alg2;
  }
  return out;
}

namespace {

// Grows the candidate set for `primary` (1 or 2) over the units.
std::vector<std::uint32_t> grow_regions(const Alg3Input& in, const Probe& probe, int primary,
                                        std::vector<TraceStep>& trace) {
  const auto count = static_cast<std::uint32_t>(in.units.size());
  std::vector<bool> taken(count, false);
  std::vector<std::uint32_t> region;
  IndexSet redacted;
  auto [cur1, cur2] = probe.eval(redacted);
  const std::string name = primary == 1 ? "alg3/l1" : "alg3/l2";

  struct Scored {
    double score = -std::numeric_limits<double>::infinity();
    std::uint32_t unit = 0;
    double p_l1 = 0.0;
    double p_l2 = 0.0;
    bool valid = false;
  };
  // Highest-importance candidate; ties go to the lower unit id.
  auto best_of = [&](const std::vector<std::uint32_t>& candidates) {
    std::vector<Scored> scored(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
      const std::uint32_t u = candidates[i];
      const auto [a, b] = probe.eval(redacted.unite(in.units[u]));
      const double drop1 = pct_drop(cur1, a, in.p1);
      const double drop2 = pct_drop(cur2, b, in.p2);
      scored[i] = Scored{primary == 1 ? drop1 - drop2 : drop2 - drop1, u, a, b, true};
    });
    Scored best;
    for (const auto& s : scored) {
      if (!best.valid || s.score > best.score) best = s;
    }
    return best;
  };
  auto absorb = [&](const Scored& s) {
    taken[s.unit] = true;
    region.push_back(s.unit);
    redacted = redacted.unite(in.units[s.unit]);
    cur1 = s.p_l1;
    cur2 = s.p_l2;
    trace.push_back(TraceStep{name, static_cast<std::uint32_t>(region.size()), s.unit, cur1, cur2,
                              cur1 / in.p1 * 100.0, cur2 / in.p2 * 100.0});
  };

  while (true) {
    std::vector<std::uint32_t> remaining;
    for (std::uint32_t u = 0; u < count; ++u) {
      if (!taken[u]) remaining.push_back(u);
    }
    const Scored seed = best_of(remaining);
    if (!seed.valid || !(seed.score > in.tau)) break;
    absorb(seed);
    while (true) {
      std::vector<std::uint32_t> frontier;
      for (std::uint32_t u = 0; u < count; ++u) {
        if (taken[u]) continue;
        const bool touches = std::any_of(in.unit_neighbors[u].begin(), in.unit_neighbors[u].end(),
                                         [&](std::uint32_t w) { return taken[w]; });
        if (touches) frontier.push_back(u);
      }
      const Scored next = best_of(frontier);
      if (!next.valid || !(next.score > in.tau)) break;
      absorb(next);
    }
  }
  return region;
}

}  // namespace

Alg3Result alg3_partition(const Alg3Input& in) {
  if (in.model == nullptr || in.input == nullptr) throw ConfigError("alg3 needs a model and an input");
  if (in.unit_neighbors.size() != in.units.size()) {
    throw DimensionError("unit adjacency does not match the unit count");
  }
  if (!(in.p1 > 0.0 && in.p2 > 0.0)) throw ConfigError("alg3 baselines must be positive");
  Alg3Result out;
  const Probe probe(*in.model, *in.input, in.l1, in.l2, in.v);
  out.candidates1 = grow_regions(in, probe, 1, out.outcome.trace);
  out.candidates2 = grow_regions(in, probe, 2, out.outcome.trace);

  auto in_list = [](const std::vector<std::uint32_t>& v, std::uint32_t u) {
    return std::find(v.begin(), v.end(), u) != v.end();
  };
  for (std::uint32_t u : out.candidates1) {
    if (!in_list(out.candidates2, u)) out.units1.push_back(u);
  }
  for (std::uint32_t u : out.candidates2) {
    if (!in_list(out.candidates1, u)) out.units2.push_back(u);
  }
  for (std::uint32_t u : out.units1) out.s1 = out.s1.unite(in.units[u]);
  for (std::uint32_t u : out.units2) out.s2 = out.s2.unite(in.units[u]);

  const auto [a1, a2] = probe.eval(out.s1);
  const auto [b1, b2] = probe.eval(out.s2);
  const double d = in.delta;
  const bool ok = own_collapsed(a1, in.p1, d) && companion_kept(a2, in.p2, d) &&
                  own_collapsed(b2, in.p2, d) && companion_kept(b1, in.p1, d);
  out.outcome.evaluations = probe.count();
  if (ok) {
    DisjointCertificate cert;
    cert.model_id = in.model->model_id();
    cert.input_digest = in.input->digest();
    cert.l1 = in.l1;
    cert.l2 = in.l2;
    cert.p1 = in.p1;
    cert.p2 = in.p2;
    cert.delta = in.delta;
    cert.v = in.v;
    cert.s1 = out.s1;
    cert.s2 = out.s2;
    std::vector<IndexSet> seg1;
    std::vector<IndexSet> seg2;
    for (std::uint32_t u : out.units1) seg1.push_back(in.units[u]);
    for (std::uint32_t u : out.units2) seg2.push_back(in.units[u]);
    cert.segments1 = std::move(seg1);
    cert.segments2 = std::move(seg2);
    out.outcome.kind = Kind::disjoint;
    out.outcome.certificate = std::move(cert);
    out.outcome.decided_by = Strategy::alg3;
  }
  return out;
}

Alg3Result alg3_partition(const Model& model, const InputVector& input, const Segmentation& seg,
                          const AdjacencyGraph& adj, const LabelId& l1, const LabelId& l2,
                          double delta, float v, double tau) {
  const SoftmaxVector base = predict(model, input);
  Alg3Input in;
  in.model = &model;
  in.input = &input;
  for (std::uint32_t s = 0; s < seg.segment_count(); ++s) in.units.push_back(seg.members(s));
  in.unit_neighbors = adj.neighbors;
  in.l1 = l1;
  in.l2 = l2;
  in.p1 = base[l1.index];
  in.p2 = base[l2.index];
  in.delta = delta;
  in.v = v;
  in.tau = tau;
  return alg3_partition(in);
}

SearchOutcome find_disjoint_alg3(const PairCase& c) {
  Alg3Input in;
  in.model = c.model.get();
  in.input = &c.input;
  for (std::uint32_t s = 0; s < c.seg.segment_count(); ++s) in.units.push_back(c.seg.members(s));
  in.unit_neighbors = c.adj ? c.adj->neighbors
                            : std::vector<std::vector<std::uint32_t>>(c.seg.segment_count());
  in.l1 = c.l1;
  in.l2 = c.l2;
  in.p1 = c.p1;
  in.p2 = c.p2;
  in.delta = c.delta;
  in.v = c.v;
  in.tau = c.options.tau;
  return alg3_partition(in).outcome;
}

SearchOutcome run_strategy(const PairCase& c, Strategy s) {
  switch (s) {
    case Strategy::alg1:
      return find_disjoint_alg1(c);
    case Strategy::alg2:
      return find_disjoint_alg2(c);
    case Strategy::alg3:
      return find_disjoint_alg3(c);
    case Strategy::overlap:
      return find_overlap(c);
  }
  throw ConfigError("unknown strategy");
}

SearchOutcome classify_pair(const PairCase& c, const std::vector<Strategy>& strategy) {
  if (strategy.empty()) throw ConfigError("strategy list is empty");
  SearchOutcome combined;
  for (Strategy s : strategy) {
    SearchOutcome step = run_strategy(c, s);
    combined.evaluations += step.evaluations;
    combined.trace.insert(combined.trace.end(), step.trace.begin(), step.trace.end());
    if (step.kind != Kind::undetermined) {
      combined.kind = step.kind;
      combined.certificate = std::move(step.certificate);
      combined.decided_by = s;
      return combined;
    }
  }
  return combined;
}

}  // namespace redcert
