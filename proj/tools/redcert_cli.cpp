// redcert: analyze label pairs, verify and forge certificates, benchmark searches.
//
// Exit codes: 0 clean verdict, 1 semantic rejection (verify only), 2 operational error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "redcert/bundle.hpp"
#include "redcert/certificate.hpp"
#include "redcert/error.hpp"
#include "redcert/oracle.hpp"
#include "redcert/parallel.hpp"
#include "redcert/search.hpp"
#include "redcert/verify.hpp"

namespace fs = std::filesystem;
using namespace redcert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitError = 2;

Connectivity parse_connectivity(int c) {
  if (c == 4) return Connectivity::four;
  if (c == 8) return Connectivity::eight;
  throw ConfigError("connectivity must be 4 or 8");
}

std::pair<std::uint32_t, std::uint32_t> parse_labels(const std::string& text,
                                                     const bundle::CaseBundle& b) {
  if (text.empty()) {
    if (b.meta.baseline.size() == 2) {
      auto it = b.meta.baseline.begin();
      const std::uint32_t first = it->first;
      return {first, std::next(it)->first};
    }
    throw ConfigError("--labels L1,L2 is required when the bundle lists other than two baselines");
  }
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("--labels expects L1,L2");
  auto resolve = [&](const std::string& item) -> std::uint32_t {
    for (const auto& [idx, name] : b.meta.label_names) {
      if (name == item) return idx;
    }
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(item, &pos);
      if (pos == item.size()) return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("unknown label '" + item + "'");
  };
  return {resolve(text.substr(0, comma)), resolve(text.substr(comma + 1))};
}

struct AnalyzeArgs {
  std::string bundle;
  std::string labels;
  double delta = 0.2;
  std::string strategy = "alg1,alg2,overlap";
  double tau = 0.0;
  double min_p = 0.01;
  float redaction_value = 0.0f;
  double max_fraction = 1.0;
  int connectivity = 4;
  std::string out = "redcert-out";
};

int cmd_analyze(const AnalyzeArgs& a) {
  const auto strategy = parse_strategy_list(a.strategy);
  bundle::CaseBundle b = bundle::load_bundle(a.bundle);
  const auto [i1, i2] = parse_labels(a.labels, b);

  CaseParams params;
  params.delta = a.delta;
  params.v = a.redaction_value;
  params.min_p = a.min_p;
  params.options.tau = a.tau;
  params.options.max_fraction = a.max_fraction;
  params.options.connectivity = parse_connectivity(a.connectivity);

  std::optional<SegmentAttribution> attr1;
  std::optional<SegmentAttribution> attr2;
  if (auto it = b.attributions.find(i1); it != b.attributions.end()) attr1 = accumulate(it->second, b.seg);
  if (auto it = b.attributions.find(i2); it != b.attributions.end()) attr2 = accumulate(it->second, b.seg);

  PairCase c = make_pair_case(b.model, b.input, b.seg, b.label(i1), b.label(i2), params, attr1, attr2);
  for (const auto& [label, p] : {std::pair{i1, c.p1}, std::pair{i2, c.p2}}) {
    if (auto it = b.meta.baseline.find(label); it != b.meta.baseline.end()) {
      if (std::abs(it->second - p) > kBaselineTolerance) {
        throw FormatError("bundle baseline for label " + std::to_string(label) +
                          " does not match the model's prediction");
      }
    }
  }

  const SearchOutcome outcome = classify_pair(c, strategy);
  fs::create_directories(a.out);
  {
    std::ofstream trace(fs::path(a.out) / "trace.tsv", std::ios::trunc);
    trace << format_trace(outcome.trace);
  }
  const fs::path cert_path = fs::path(a.out) / "certificate.json";
  if (outcome.certificate) {
    save_certificate(*outcome.certificate, cert_path.string());
  } else if (fs::exists(cert_path)) {
    fs::remove(cert_path);
  }
  std::cout << outcome_name(outcome.kind) << '\n';
  return kExitOk;
}

struct VerifyArgs {
  std::string certificate;
  std::string bundle;
  double tau = 0.0;
  int connectivity = 4;
  std::string counter_out;
};

int cmd_verify(const VerifyArgs& a) {
  const Certificate cert = load_certificate(a.certificate);
  bundle::CaseBundle b = bundle::load_bundle(a.bundle);
  const AdjacencyGraph adj = adjacency(b.seg, parse_connectivity(a.connectivity));
  const VerificationReport report = verify_certificate(cert, *b.model, b.input, b.seg, adj, a.tau);
  std::cout << "kind: " << certificate_kind(cert) << '\n' << format_report(report);
  if (report.counter_certificate) {
    const std::string path = a.counter_out.empty() ? a.certificate + ".counter.json" : a.counter_out;
    save_certificate(*report.counter_certificate, path);
    std::cout << "counter-certificate written to " << path << '\n';
  }
  return report.verdict == VerificationReport::Verdict::accepted ? kExitOk : kExitRejected;
}

int cmd_forge(const std::string& in, const std::string& out) {
  const Certificate cert = load_certificate(in);
  const auto* d = std::get_if<DisjointCertificate>(&cert);
  if (d == nullptr) throw ConfigError("forge expects a disjoint certificate");
  if (!d->segments1 || !d->segments2) {
    throw ConfigError("forge needs the segment decompositions of S1 and S2");
  }
  OverlapCertificate forged;
  forged.model_id = d->model_id;
  forged.input_digest = d->input_digest;
  forged.l1 = d->l1;
  forged.l2 = d->l2;
  forged.p1 = d->p1;
  forged.p2 = d->p2;
  forged.delta = d->delta;
  forged.v = d->v;
  forged.s = d->s1.unite(d->s2);
  forged.segments = *d->segments1;
  forged.segments.insert(forged.segments.end(), d->segments2->begin(), d->segments2->end());
  save_certificate(forged, out);
  std::cout << "forged overlap certificate written to " << out << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string kind = "planted-disjoint";
  std::size_t trials = 100;
  std::string strategy = "alg1,alg2,alg3,overlap";
  std::string report = "bench.json";
  std::uint64_t seed = 0;
  std::uint32_t rows = 3;
  std::uint32_t cols = 3;
  double margin = 1.0;
  double delta = 0.2;
  double tau = 0.0;
  std::size_t jobs = 0;
  bool timing = false;
};

struct AlgoStats {
  std::size_t decided = 0;
  std::size_t verified = 0;
  std::size_t segments = 0;  // summed over decided runs
  std::uint64_t evaluations = 0;
  double seconds = 0.0;
};

std::size_t certificate_segments(const Certificate& c) {
  if (const auto* d = std::get_if<DisjointCertificate>(&c)) {
    return (d->segments1 ? d->segments1->size() : 0) + (d->segments2 ? d->segments2->size() : 0);
  }
  if (const auto* o = std::get_if<OverlapCertificate>(&c)) return o->segments.size();
  return 0;
}

int cmd_bench(const BenchArgs& a) {
  const auto strategy = parse_strategy_list(a.strategy);
  oracle::FixtureSpec base;
  base.kind = oracle::parse_fixture_kind(a.kind);
  base.rows = a.rows;
  base.cols = a.cols;
  base.margin = a.margin;

  struct Trial {
    std::vector<AlgoStats> per_algo;
    SearchOutcome::Kind classified = SearchOutcome::Kind::undetermined;
  };
  std::vector<Trial> trials(a.trials);
  parallel_for(
      a.trials,
      [&](std::size_t t) {
        oracle::FixtureSpec spec = base;
        spec.seed = a.seed + t;
        const oracle::Fixture f = oracle::generate_fixture(spec);
        CaseParams params;
        params.delta = a.delta;
        params.options.tau = a.tau;
        const PairCase c = make_pair_case(f.model, f.input, f.seg, f.l1, f.l2, params);
        Trial& out = trials[t];
        out.per_algo.resize(strategy.size());
        bool classified = false;
        for (std::size_t i = 0; i < strategy.size(); ++i) {
          const auto start = std::chrono::steady_clock::now();
          const SearchOutcome o = run_strategy(c, strategy[i]);
          AlgoStats& s = out.per_algo[i];
          s.evaluations = o.evaluations;
          if (o.certificate) {
            s.decided = 1;
            s.segments = certificate_segments(*o.certificate);
            const auto report = verify_certificate(*o.certificate, *c.model, c.input, c.seg, *c.adj, a.tau);
            s.verified = report.verdict == VerificationReport::Verdict::accepted ? 1 : 0;
            if (!classified) {
              out.classified = o.kind;
              classified = true;
            }
          }
          s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
      },
      a.jobs);

  nlohmann::ordered_json report;
  report["family"] = {{"kind", a.kind}, {"rows", a.rows},   {"cols", a.cols},
                      {"margin", a.margin}, {"delta", a.delta}, {"seed", a.seed}};
  report["trials"] = a.trials;
  nlohmann::ordered_json algos = nlohmann::ordered_json::object();
  std::ostringstream timing;
  for (std::size_t i = 0; i < strategy.size(); ++i) {
    AlgoStats sum;
    for (const auto& t : trials) {
      sum.decided += t.per_algo[i].decided;
      sum.verified += t.per_algo[i].verified;
      sum.segments += t.per_algo[i].segments;
      sum.evaluations += t.per_algo[i].evaluations;
      sum.seconds += t.per_algo[i].seconds;
    }
    const double n = static_cast<double>(a.trials);
    nlohmann::ordered_json e;
    e["decided"] = sum.decided;
    e["verified"] = sum.verified;
    e["success_rate"] = a.trials ? nlohmann::ordered_json(sum.decided / n) : nlohmann::ordered_json(nullptr);
    e["verified_rate"] = a.trials ? nlohmann::ordered_json(sum.verified / n) : nlohmann::ordered_json(nullptr);
    e["mean_certificate_segments"] =
        sum.decided ? nlohmann::ordered_json(static_cast<double>(sum.segments) / static_cast<double>(sum.decided))
                    : nlohmann::ordered_json(nullptr);
    e["mean_evaluations"] = a.trials ? nlohmann::ordered_json(static_cast<double>(sum.evaluations) / n)
                                     : nlohmann::ordered_json(nullptr);
    if (a.timing) e["wall_seconds"] = sum.seconds;
    algos[std::string(strategy_name(strategy[i]))] = std::move(e);
    timing << strategy_name(strategy[i]) << ": " << sum.seconds << " s\n";
  }
  report["algorithms"] = std::move(algos);
  std::map<std::string, std::size_t> verdicts{{"DISJOINT", 0}, {"OVERLAPPING", 0}, {"UNDETERMINED", 0}};
  for (const auto& t : trials) ++verdicts[std::string(outcome_name(t.classified))];
  report["classify"] = verdicts;

  std::ofstream out(a.report, std::ios::trunc);
  if (!out) throw FormatError("cannot write report " + a.report);
  out << report.dump(2) << '\n';
  std::cout << report["algorithms"].dump(2) << '\n';
  std::cerr << "wall time per algorithm:\n" << timing.str();
  return kExitOk;
}

struct FixtureArgs {
  std::string kind = "planted-disjoint";
  std::uint64_t seed = 0;
  std::uint32_t rows = 3;
  std::uint32_t cols = 3;
  double margin = 1.0;
  std::string out;
  bool with_attributions = false;
};

int cmd_make_fixture(const FixtureArgs& a) {
  oracle::FixtureSpec spec;
  spec.kind = oracle::parse_fixture_kind(a.kind);
  spec.seed = a.seed;
  spec.rows = a.rows;
  spec.cols = a.cols;
  spec.margin = a.margin;
  const oracle::Fixture f = oracle::generate_fixture(spec);
  bundle::write_fixture_bundle(f, a.out, a.with_attributions);
  std::cout << "bundle written to " << a.out << " (model " << f.model->model_id() << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certificates for disjoint versus overlapping label-pair predictions"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* sa = app.add_subcommand("analyze", "Classify a label pair and emit a certificate");
  sa->add_option("bundle", analyze.bundle, "Case bundle directory")->required();
  sa->add_option("--labels", analyze.labels, "Label pair L1,L2 (indices or names)");
  sa->add_option("--delta", analyze.delta, "Delta in (0, 0.5]");
  sa->add_option("--strategy", analyze.strategy, "Ordered list of alg1,alg2,alg3,overlap");
  sa->add_option("--tau", analyze.tau, "Alg-3 importance threshold");
  sa->add_option("--min-p", analyze.min_p, "Reject labels with baseline prediction below this");
  sa->add_option("--redaction-value", analyze.redaction_value, "Value written into redacted dimensions");
  sa->add_option("--max-fraction", analyze.max_fraction, "Cap on the fraction of segments redacted per side");
  sa->add_option("--connectivity", analyze.connectivity, "Segment adjacency: 4 or 8");
  sa->add_option("--out", analyze.out, "Output directory for certificate.json and trace.tsv");

  VerifyArgs verify;
  auto* sv = app.add_subcommand("verify", "Verify a certificate against a bundle");
  sv->add_option("certificate", verify.certificate, "Certificate file")->required();
  sv->add_option("--bundle", verify.bundle, "Case bundle directory")->required();
  sv->add_option("--tau", verify.tau, "Importance threshold of the overlap verifier");
  sv->add_option("--connectivity", verify.connectivity, "Segment adjacency: 4 or 8");
  sv->add_option("--counter-out", verify.counter_out, "Where to write a counter-certificate");

  std::string forge_in;
  std::string forge_out;
  auto* sf = app.add_subcommand("forge", "Forge an overlap claim S = S1 u S2 from a disjoint certificate");
  sf->add_option("certificate", forge_in, "Disjoint certificate")->required();
  sf->add_option("--out", forge_out, "Forged overlap certificate path")->required();

  BenchArgs bench;
  auto* sb = app.add_subcommand("bench", "Run generate -> search -> verify over a fixture family");
  sb->add_option("--kind", bench.kind, "planted-disjoint | planted-overlap | noise");
  sb->add_option("--trials", bench.trials, "Number of seeds");
  sb->add_option("--strategy", bench.strategy, "Algorithms to run on every trial");
  sb->add_option("--report", bench.report, "Report path (JSON)");
  sb->add_option("--seed", bench.seed, "First seed");
  sb->add_option("--rows", bench.rows);
  sb->add_option("--cols", bench.cols);
  sb->add_option("--margin", bench.margin);
  sb->add_option("--delta", bench.delta);
  sb->add_option("--tau", bench.tau);
  sb->add_option("--jobs", bench.jobs, "Worker threads (0 = hardware)");
  sb->add_flag("--timing", bench.timing, "Include wall time in the report");

  FixtureArgs fixture;
  auto* sm = app.add_subcommand("make-fixture", "Write a planted fixture as a case bundle");
  sm->add_option("--kind", fixture.kind, "planted-disjoint | planted-overlap | noise");
  sm->add_option("--seed", fixture.seed);
  sm->add_option("--rows", fixture.rows);
  sm->add_option("--cols", fixture.cols);
  sm->add_option("--margin", fixture.margin);
  sm->add_option("--out", fixture.out, "Bundle directory")->required();
  sm->add_flag("--with-attributions", fixture.with_attributions, "Store occlusion attribution maps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*sa) return cmd_analyze(analyze);
    if (*sv) return cmd_verify(verify);
    if (*sf) return cmd_forge(forge_in, forge_out);
    if (*sb) return cmd_bench(bench);
    if (*sm) return cmd_make_fixture(fixture);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
