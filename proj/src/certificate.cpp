#include "redcert/certificate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "redcert/error.hpp"

namespace redcert {

using Json = nlohmann::ordered_json;

namespace {

Json encode_set(const IndexSet& s) {
  Json runs = Json::array();
  for (const Run& r : s.runs()) runs.push_back(Json::array({r.start, r.length}));
  return Json{{"rle", std::move(runs)}};
}

Json encode_label(const LabelId& l) {
  Json out{{"index", l.index}};
  if (l.name) out["name"] = *l.name;
  return out;
}

Json encode_real(double x, const char* field) {
  if (!std::isfinite(x)) throw FormatError(std::string("non-finite value in field ") + field);
  return Json(x);
}

Json encode_sets(const std::vector<IndexSet>& sets) {
  Json out = Json::array();
  for (const auto& s : sets) out.push_back(encode_set(s));
  return out;
}

// Field access that records which keys were consumed so extra keys are rejected.
class Reader {
 public:
  explicit Reader(const Json& obj) : obj_(obj) {
    if (!obj_.is_object()) throw FormatError("certificate must be a JSON object");
  }

  const Json& field(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) throw FormatError("missing field '" + key + "'");
    seen_.insert(key);
    return *it;
  }

  const Json* optional_field(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) {
      if (it != obj_.end()) seen_.insert(key);
      return nullptr;
    }
    seen_.insert(key);
    return &*it;
  }

  std::string string(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_string()) throw FormatError("field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  double real(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_number()) throw FormatError("field '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError("field '" + key + "' is not finite");
    return x;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw FormatError("unknown field '" + it.key() + "'");
    }
  }

 private:
  const Json& obj_;
  std::set<std::string> seen_;
};

std::uint32_t as_u32(const Json& v, const char* what) {
  if (!v.is_number_integer()) throw FormatError(std::string(what) + " must be an integer");
  if (v.is_number_unsigned()) {
    const auto x = v.get<std::uint64_t>();
    if (x > std::numeric_limits<std::uint32_t>::max()) {
      throw FormatError(std::string(what) + " overflows 32 bits");
    }
    return static_cast<std::uint32_t>(x);
  }
  const auto x = v.get<std::int64_t>();
  if (x < 0 || x > std::int64_t{std::numeric_limits<std::uint32_t>::max()}) {
    throw FormatError(std::string(what) + " out of range");
  }
  return static_cast<std::uint32_t>(x);
}

IndexSet decode_set(const Json& v) {
  Reader r(v);
  const Json& runs = r.field("rle");
  r.finish();
  if (!runs.is_array()) throw FormatError("'rle' must be an array");
  std::vector<Run> out;
  out.reserve(runs.size());
  for (const Json& pair : runs) {
    if (!pair.is_array() || pair.size() != 2) throw FormatError("rle entries must be [start, length]");
    out.push_back({as_u32(pair[0], "rle start"), as_u32(pair[1], "rle length")});
  }
  return IndexSet::from_runs(out);
}

LabelId decode_label(const Json& v) {
  Reader r(v);
  LabelId out;
  out.index = as_u32(r.field("index"), "label index");
  if (const Json* name = r.optional_field("name")) {
    if (!name->is_string()) throw FormatError("label name must be a string");
    out.name = name->get<std::string>();
  }
  r.finish();
  return out;
}

std::vector<IndexSet> decode_sets(const Json& v) {
  if (!v.is_array()) throw FormatError("segment list must be an array");
  std::vector<IndexSet> out;
  out.reserve(v.size());
  for (const Json& s : v) out.push_back(decode_set(s));
  return out;
}

Json header(std::string_view kind, const std::string& model_id, const std::string& digest) {
  return Json{{"schema_version", std::string(kCertificateSchemaVersion)},
              {"kind", std::string(kind)},
              {"model_id", model_id},
              {"input_digest", digest}};
}

struct Encoder {
  Json operator()(const AttributionCertificate& c) const {
    Json j = header("attribution", c.model_id, c.input_digest);
    j["label"] = encode_label(c.label);
    j["p"] = encode_real(c.p, "p");
    j["delta"] = encode_real(c.delta, "delta");
    j["v"] = encode_real(c.v, "v");
    j["s"] = encode_set(c.s);
    return j;
  }
  Json operator()(const DisjointCertificate& c) const {
    Json j = header("disjoint", c.model_id, c.input_digest);
    j["l1"] = encode_label(c.l1);
    j["l2"] = encode_label(c.l2);
    j["p1"] = encode_real(c.p1, "p1");
    j["p2"] = encode_real(c.p2, "p2");
    j["delta"] = encode_real(c.delta, "delta");
    j["v"] = encode_real(c.v, "v");
    j["s1"] = encode_set(c.s1);
    j["s2"] = encode_set(c.s2);
    if (c.segments1) j["segments1"] = encode_sets(*c.segments1);
    if (c.segments2) j["segments2"] = encode_sets(*c.segments2);
    return j;
  }
  Json operator()(const OverlapCertificate& c) const {
    Json j = header("overlap", c.model_id, c.input_digest);
    j["l1"] = encode_label(c.l1);
    j["l2"] = encode_label(c.l2);
    j["p1"] = encode_real(c.p1, "p1");
    j["p2"] = encode_real(c.p2, "p2");
    j["delta"] = encode_real(c.delta, "delta");
    j["v"] = encode_real(c.v, "v");
    j["s"] = encode_set(c.s);
    j["segments"] = encode_sets(c.segments);
    return j;
  }
};

}  // namespace

std::string_view certificate_kind(const Certificate& cert) {
  switch (cert.index()) {
    case 0:
      return "attribution";
    case 1:
      return "disjoint";
    default:
      return "overlap";
  }
}

std::string encode_certificate(const Certificate& cert) {
  return std::visit(Encoder{}, cert).dump(2) + "\n";
}

Certificate decode_certificate(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("certificate is not valid JSON: ") + e.what());
  }
  Reader r(j);
  if (r.string("schema_version") != kCertificateSchemaVersion) {
    throw FormatError("unknown certificate schema version");
  }
  const std::string kind = r.string("kind");
  const std::string model_id = r.string("model_id");
  const std::string digest = r.string("input_digest");
  if (kind == "attribution") {
    AttributionCertificate c{model_id, digest, decode_label(r.field("label")), r.real("p"),
                             r.real("delta"), r.real("v"), decode_set(r.field("s"))};
    r.finish();
    return c;
  }
  if (kind == "disjoint") {
    DisjointCertificate c;
    c.model_id = model_id;
    c.input_digest = digest;
    c.l1 = decode_label(r.field("l1"));
    c.l2 = decode_label(r.field("l2"));
    c.p1 = r.real("p1");
    c.p2 = r.real("p2");
    c.delta = r.real("delta");
    c.v = r.real("v");
    c.s1 = decode_set(r.field("s1"));
    c.s2 = decode_set(r.field("s2"));
    if (const Json* seg = r.optional_field("segments1")) c.segments1 = decode_sets(*seg);
    if (const Json* seg = r.optional_field("segments2")) c.segments2 = decode_sets(*seg);
    r.finish();
    return c;
  }
  if (kind == "overlap") {
    OverlapCertificate c;
    c.model_id = model_id;
    c.input_digest = digest;
    c.l1 = decode_label(r.field("l1"));
    c.l2 = decode_label(r.field("l2"));
    c.p1 = r.real("p1");
    c.p2 = r.real("p2");
    c.delta = r.real("delta");
    c.v = r.real("v");
    c.s = decode_set(r.field("s"));
    c.segments = decode_sets(r.field("segments"));
    r.finish();
    return c;
  }
  throw FormatError("unknown certificate kind '" + kind + "'");
}

Certificate load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open certificate " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_certificate(buf.str());
}

void save_certificate(const Certificate& cert, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write certificate " + path);
  out << encode_certificate(cert);
}

}  // namespace redcert
