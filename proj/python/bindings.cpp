// Python bindings. Everything that may evaluate a model releases the GIL, so
// CallableModel can re-acquire it from worker threads.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "redcert/bundle.hpp"
#include "redcert/certificate.hpp"
#include "redcert/error.hpp"
#include "redcert/oracle.hpp"
#include "redcert/search.hpp"
#include "redcert/verify.hpp"

namespace py = pybind11;
using namespace redcert;

namespace {

// Wraps a Python callable taking a list of floats and returning softmax probabilities.
class CallableModel final : public Model {
 public:
  CallableModel(py::function fn, std::string model_id, std::size_t n, std::size_t m)
      : fn_(std::move(fn)), model_id_(std::move(model_id)), n_(n), m_(m) {}

  ~CallableModel() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }

  const std::string& model_id() const override { return model_id_; }
  std::size_t input_dim() const override { return n_; }
  std::size_t label_count() const override { return m_; }

 protected:
  SoftmaxVector evaluate(const InputVector& input) const override {
    py::gil_scoped_acquire gil;
    std::vector<float> values(input.values().begin(), input.values().end());
    try {
      return SoftmaxVector{fn_(values).cast<std::vector<double>>()};
    } catch (const py::error_already_set& e) {
      throw EvaluationError(std::string("model callable raised: ") + e.what());
    } catch (const py::cast_error& e) {
      throw EvaluationError(std::string("model callable returned a non-sequence: ") + e.what());
    }
  }

 private:
  py::function fn_;
  std::string model_id_;
  std::size_t n_;
  std::size_t m_;
};

py::dict report_dict(const VerificationReport& r) {
  py::list conditions;
  for (const auto& c : r.checked_conditions) {
    conditions.append(py::make_tuple(c.condition, c.measured, c.bound, c.pass));
  }
  py::dict out;
  out["verdict"] = std::string(verdict_name(r.verdict));
  out["conditions"] = conditions;
  out["counter_certificate"] =
      r.counter_certificate ? py::object(py::str(encode_certificate(*r.counter_certificate))) : py::none();
  out["text"] = format_report(r);
  return out;
}

AdjacencyGraph adjacency_or_empty(const Segmentation& seg) {
  if (seg.geometry()) return adjacency(seg);
  return AdjacencyGraph{std::vector<std::vector<std::uint32_t>>(seg.segment_count())};
}

}  // namespace

PYBIND11_MODULE(_redcert, m) {
  m.doc() = "Redaction certificates for label-pair predictions";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<IndexRangeError>(m, "IndexRangeError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<CertificateMismatch>(m, "CertificateMismatch", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<LowPredictionError>(m, "LowPredictionError", base.ptr());
  py::register_exception<OracleLimitError>(m, "OracleLimitError", base.ptr());
  py::register_exception<FixtureError>(m, "FixtureError", base.ptr());

  py::class_<IndexSet>(m, "IndexSet")
      .def(py::init([](std::vector<std::uint32_t> idx) { return IndexSet::from_unsorted(std::move(idx)); }),
           py::arg("indices") = std::vector<std::uint32_t>{})
      .def_static("from_runs",
                  [](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& runs) {
                    std::vector<Run> r;
                    for (const auto& [s, l] : runs) r.push_back(Run{s, l});
                    return IndexSet::from_runs(r);
                  })
      .def("runs",
           [](const IndexSet& s) {
             std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
             for (const Run& r : s.runs()) out.emplace_back(r.start, r.length);
             return out;
           })
      .def("indices", [](const IndexSet& s) { return std::vector<std::uint32_t>(s.begin(), s.end()); })
      .def("union", &IndexSet::unite)
      .def("intersection", &IndexSet::intersect)
      .def("difference", &IndexSet::subtract)
      .def("isdisjoint", &IndexSet::disjoint_from)
      .def("__len__", &IndexSet::size)
      .def("__contains__", &IndexSet::contains)
      .def("__eq__", [](const IndexSet& a, const IndexSet& b) { return a == b; })
      .def("__repr__", [](const IndexSet& s) { return "IndexSet(size=" + std::to_string(s.size()) + ")"; });

  py::class_<Geometry>(m, "Geometry")
      .def(py::init<std::uint32_t, std::uint32_t, std::uint32_t>(), py::arg("height"), py::arg("width"),
           py::arg("channels"))
      .def_readonly("height", &Geometry::height)
      .def_readonly("width", &Geometry::width)
      .def_readonly("channels", &Geometry::channels);

  py::class_<LabelId>(m, "LabelId")
      .def(py::init<std::uint32_t, std::optional<std::string>>(), py::arg("index"), py::arg("name") = py::none())
      .def_readonly("index", &LabelId::index)
      .def_readonly("name", &LabelId::name);

  py::class_<InputVector>(m, "InputVector")
      .def(py::init<std::vector<float>, std::optional<Geometry>>(), py::arg("values"),
           py::arg("geometry") = py::none())
      .def("values", [](const InputVector& x) { return std::vector<float>(x.values().begin(), x.values().end()); })
      .def_property_readonly("digest", &InputVector::digest)
      .def_property_readonly("geometry", &InputVector::geometry)
      .def("__len__", &InputVector::size);

  py::class_<Segmentation>(m, "Segmentation")
      .def(py::init<std::vector<std::uint32_t>, std::optional<Geometry>>(), py::arg("segment_of"),
           py::arg("geometry") = py::none())
      .def_static("from_pixel_ids", &Segmentation::from_pixel_ids)
      .def_property_readonly("n", &Segmentation::n)
      .def_property_readonly("segment_count", &Segmentation::segment_count)
      .def("members", &Segmentation::members)
      .def("indices_of", &Segmentation::indices_of)
      .def("pixel_ids", &Segmentation::pixel_ids);

  m.def("grid_segmenter", &grid_segmenter, py::arg("geometry"), py::arg("rows"), py::arg("cols"));
  m.def("redact", &redact, py::arg("input"), py::arg("s"), py::arg("v") = 0.0f);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("model_id", &Model::model_id)
      .def_property_readonly("input_dim", &Model::input_dim)
      .def_property_readonly("label_count", &Model::label_count)
      .def_property_readonly("evaluations", &Model::evaluations);

  py::class_<CallableModel, Model, std::shared_ptr<CallableModel>>(m, "CallableModel")
      .def(py::init<py::function, std::string, std::size_t, std::size_t>(), py::arg("fn"), py::arg("model_id"),
           py::arg("input_dim"), py::arg("label_count"));

  m.def(
      "predict", [](const Model& model, const InputVector& x) { return predict(model, x).probs; },
      py::call_guard<py::gil_scoped_release>());

  py::class_<oracle::Fixture>(m, "Fixture")
      .def_property_readonly("model",
                             [](const oracle::Fixture& f) {
                               return std::const_pointer_cast<Model>(std::static_pointer_cast<const Model>(f.model));
                             })
      .def_readonly("input", &oracle::Fixture::input)
      .def_readonly("seg", &oracle::Fixture::seg)
      .def_readonly("l1", &oracle::Fixture::l1)
      .def_readonly("l2", &oracle::Fixture::l2)
      .def_readonly("support1", &oracle::Fixture::support1)
      .def_readonly("support2", &oracle::Fixture::support2)
      .def_readonly("attempts", &oracle::Fixture::attempts);

  m.def(
      "generate_fixture",
      [](const std::string& kind, std::uint64_t seed, std::uint32_t rows, std::uint32_t cols, double margin) {
        oracle::FixtureSpec spec;
        spec.kind = oracle::parse_fixture_kind(kind);
        spec.seed = seed;
        spec.rows = rows;
        spec.cols = cols;
        spec.margin = margin;
        return oracle::generate_fixture(spec);
      },
      py::arg("kind") = "planted-disjoint", py::arg("seed") = 0, py::arg("rows") = 3, py::arg("cols") = 3,
      py::arg("margin") = 1.0, py::call_guard<py::gil_scoped_release>());

  m.def(
      "oracle_exists",
      [](const Model& model, const InputVector& x, const Segmentation& seg, const LabelId& l1, const LabelId& l2,
         double delta) {
        const auto t = oracle::evaluate_subsets(model, x, seg, l1, l2);
        return std::make_pair(oracle::brute_disjoint(t, delta).exists, oracle::brute_overlap(t, delta).exists);
      },
      py::arg("model"), py::arg("input"), py::arg("seg"), py::arg("l1"), py::arg("l2"), py::arg("delta"),
      py::call_guard<py::gil_scoped_release>(), "(disjoint exists, overlap exists) over segment subsets");

  py::class_<PairCase>(m, "PairCase")
      .def_readonly("p1", &PairCase::p1)
      .def_readonly("p2", &PairCase::p2)
      .def_readonly("delta", &PairCase::delta);

  m.def(
      "make_pair_case",
      [](std::shared_ptr<Model> model, const InputVector& x, const Segmentation& seg, const LabelId& l1,
         const LabelId& l2, double delta, float v, double min_p, double tau, double max_fraction) {
        CaseParams params;
        params.delta = delta;
        params.v = v;
        params.min_p = min_p;
        params.options.tau = tau;
        params.options.max_fraction = max_fraction;
        return make_pair_case(std::move(model), x, seg, l1, l2, params);
      },
      py::arg("model"), py::arg("input"), py::arg("seg"), py::arg("l1"), py::arg("l2"), py::arg("delta") = 0.2,
      py::arg("v") = 0.0f, py::arg("min_p") = 0.01, py::arg("tau") = 0.0, py::arg("max_fraction") = 1.0,
      py::call_guard<py::gil_scoped_release>());

  py::class_<SearchOutcome>(m, "SearchOutcome")
      .def_property_readonly("kind", [](const SearchOutcome& o) { return std::string(outcome_name(o.kind)); })
      .def_property_readonly("certificate",
                             [](const SearchOutcome& o) -> std::optional<std::string> {
                               if (!o.certificate) return std::nullopt;
                               return encode_certificate(*o.certificate);
                             })
      .def_property_readonly("decided_by",
                             [](const SearchOutcome& o) -> std::optional<std::string> {
                               if (!o.decided_by) return std::nullopt;
                               return std::string(strategy_name(*o.decided_by));
                             })
      .def_readonly("evaluations", &SearchOutcome::evaluations)
      .def_property_readonly("trace", [](const SearchOutcome& o) { return format_trace(o.trace); });

  m.def(
      "classify_pair",
      [](const PairCase& c, const std::string& strategy) { return classify_pair(c, parse_strategy_list(strategy)); },
      py::arg("case"), py::arg("strategy") = "alg1,alg2,overlap", py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_strategy", [](const PairCase& c, const std::string& s) { return run_strategy(c, parse_strategy(s)); },
      py::arg("case"), py::arg("strategy"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "canonical_certificate", [](const std::string& text) { return encode_certificate(decode_certificate(text)); },
      "Decode strictly and re-encode in canonical form.");
  m.def("certificate_kind",
        [](const std::string& text) { return std::string(certificate_kind(decode_certificate(text))); });

  m.def(
      "verify",
      [](const std::string& cert_json, const Model& model, const InputVector& x, const Segmentation& seg,
         double tau) {
        const Certificate cert = decode_certificate(cert_json);
        VerificationReport r;
        {
          py::gil_scoped_release release;
          r = verify_certificate(cert, model, x, seg, adjacency_or_empty(seg), tau);
        }
        return report_dict(r);
      },
      py::arg("certificate"), py::arg("model"), py::arg("input"), py::arg("seg"), py::arg("tau") = 0.0);

  py::class_<bundle::CaseBundle>(m, "Bundle")
      .def_property_readonly("model",
                             [](const bundle::CaseBundle& b) { return std::const_pointer_cast<Model>(b.model); })
      .def_readonly("input", &bundle::CaseBundle::input)
      .def_readonly("seg", &bundle::CaseBundle::seg)
      .def("label", &bundle::CaseBundle::label)
      .def_property_readonly("baseline", [](const bundle::CaseBundle& b) { return b.meta.baseline; });

  m.def(
      "load_bundle", [](const std::string& dir) { return bundle::load_bundle(dir); }, py::arg("dir"),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "write_fixture_bundle",
      [](const oracle::Fixture& f, const std::string& dir, bool with_attributions) {
        bundle::write_fixture_bundle(f, dir, with_attributions);
      },
      py::arg("fixture"), py::arg("dir"), py::arg("with_attributions") = false,
      py::call_guard<py::gil_scoped_release>());
}
