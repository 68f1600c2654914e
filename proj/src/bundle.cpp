#include "redcert/bundle.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "redcert/binary_io.hpp"
#include "redcert/bridge_client.hpp"
#include "redcert/error.hpp"

namespace redcert::bundle {

using Json = nlohmann::ordered_json;

LabelId CaseBundle::label(std::uint32_t index) const {
  LabelId out{index, std::nullopt};
  if (auto it = meta.label_names.find(index); it != meta.label_names.end()) out.name = it->second;
  return out;
}

namespace {

Json file_ref(const FileRef& f) { return Json{{"path", f.path}, {"sha256", f.sha256}}; }

FileRef parse_file_ref(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("path") || !j.contains("sha256") || !j["path"].is_string() ||
      !j["sha256"].is_string()) {
    throw FormatError("meta: file entry '" + what + "' needs string path and sha256");
  }
  return FileRef{j["path"].get<std::string>(), j["sha256"].get<std::string>()};
}

Json geometry_json(const Geometry& g) { return Json::array({g.height, g.width, g.channels}); }

Geometry parse_geometry(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("meta: geometry must be [H, W, C]");
  for (const auto& x : j) {
    if (!x.is_number_unsigned() || x.get<std::uint64_t>() == 0 || x.get<std::uint64_t>() > 0xFFFFFFFFull) {
      throw FormatError("meta: geometry entries must be positive integers");
    }
  }
  return Geometry{j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(), j[2].get<std::uint32_t>()};
}

std::uint32_t parse_label_key(const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(key, &pos);
    if (pos != key.size() || v > 0xFFFFFFFFul) throw FormatError("");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw FormatError("meta: label key '" + key + "' is not an index");
  }
}

Json planted_json(const PlantedModelSpec& s) {
  return Json{{"geometry", geometry_json(s.geometry)},
              {"rows", s.rows},
              {"cols", s.cols},
              {"temperature", s.temperature},
              {"weights", s.weights}};
}

PlantedModelSpec parse_planted(const Json& j) {
  try {
    PlantedModelSpec s;
    s.geometry = parse_geometry(j.at("geometry"));
    s.rows = j.at("rows").get<std::uint32_t>();
    s.cols = j.at("cols").get<std::uint32_t>();
    s.temperature = j.at("temperature").get<double>();
    s.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta: malformed planted model spec: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::byte> read_checked(const std::filesystem::path& dir, const FileRef& ref,
                                    const std::string& what) {
  const auto bytes = binio::read_file(dir / ref.path);
  const std::string digest = sha256_hex(bytes);
  if (digest != ref.sha256) {
    throw FormatError("bundle " + what + " file " + ref.path + " has digest " + digest +
                      ", meta records " + ref.sha256);
  }
  return bytes;
}

}  // namespace

std::string encode_meta(const BundleMeta& meta) {
  Json files{{"input", file_ref(meta.input)}, {"segmentation", file_ref(meta.segmentation)}};
  Json attrs = Json::object();
  for (const auto& [label, ref] : meta.attributions) attrs[std::to_string(label)] = file_ref(ref);
  files["attributions"] = std::move(attrs);
  Json labels = Json::object();
  for (const auto& [label, name] : meta.label_names) labels[std::to_string(label)] = name;
  Json baseline = Json::object();
  for (const auto& [label, p] : meta.baseline) baseline[std::to_string(label)] = p;
  Json model;
  if (meta.model.type == ModelEndpoint::Type::planted) {
    if (!meta.model.planted) throw FormatError("planted endpoint without a model spec");
    model = Json{{"type", "planted"}, {"spec", planted_json(*meta.model.planted)}};
  } else {
    model = Json{{"type", "bridge"}};
    if (!meta.model.command.empty()) model["command"] = meta.model.command;
    if (!meta.model.socket.empty()) model["socket"] = meta.model.socket;
  }
  Json j{{"schema_version", meta.schema_version},
         {"model_id", meta.model_id},
         {"n", meta.n},
         {"m", meta.m},
         {"geometry", meta.geometry ? geometry_json(*meta.geometry) : Json(nullptr)},
         {"preprocessing", meta.preprocessing},
         {"files", std::move(files)},
         {"labels", std::move(labels)},
         {"baseline", std::move(baseline)},
         {"model", std::move(model)},
         {"warnings", meta.warnings}};
  return j.dump(2) + "\n";
}

BundleMeta decode_meta(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta.json is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("meta.json must be an object");
  BundleMeta m;
  try {
    m.schema_version = j.at("schema_version").get<std::string>();
    if (m.schema_version != "1") throw FormatError("meta: unknown schema version " + m.schema_version);
    m.model_id = j.at("model_id").get<std::string>();
    m.n = j.at("n").get<std::size_t>();
    m.m = j.at("m").get<std::size_t>();
    if (j.contains("geometry") && !j["geometry"].is_null()) m.geometry = parse_geometry(j["geometry"]);
    m.preprocessing = j.value("preprocessing", std::string("none"));
    const Json& files = j.at("files");
    m.input = parse_file_ref(files.at("input"), "input");
    m.segmentation = parse_file_ref(files.at("segmentation"), "segmentation");
    if (files.contains("attributions")) {
      for (auto it = files["attributions"].begin(); it != files["attributions"].end(); ++it) {
        m.attributions[parse_label_key(it.key())] = parse_file_ref(it.value(), "attribution " + it.key());
      }
    }
    if (j.contains("labels")) {
      for (auto it = j["labels"].begin(); it != j["labels"].end(); ++it) {
        m.label_names[parse_label_key(it.key())] = it.value().get<std::string>();
      }
    }
    if (j.contains("baseline")) {
      for (auto it = j["baseline"].begin(); it != j["baseline"].end(); ++it) {
        m.baseline[parse_label_key(it.key())] = it.value().get<double>();
      }
    }
    const Json& model = j.at("model");
    const std::string type = model.at("type").get<std::string>();
    if (type == "planted") {
      m.model.type = ModelEndpoint::Type::planted;
      m.model.planted = parse_planted(model.at("spec"));
    } else if (type == "bridge") {
      m.model.type = ModelEndpoint::Type::bridge;
      if (model.contains("command")) m.model.command = model["command"].get<std::vector<std::string>>();
      if (model.contains("socket")) m.model.socket = model["socket"].get<std::string>();
      if (m.model.command.empty() && m.model.socket.empty()) {
        throw FormatError("meta: bridge endpoint needs a command or a socket");
      }
    } else {
      throw FormatError("meta: unknown model endpoint type '" + type + "'");
    }
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta.json: ") + e.what());
  }
  for (const auto& [label, ref] : m.attributions) {
    if (label >= m.m) throw FormatError("meta: attribution label " + std::to_string(label) + " >= m");
  }
  for (const auto& [label, p] : m.baseline) {
    if (label >= m.m) throw FormatError("meta: baseline label " + std::to_string(label) + " >= m");
  }
  return m;
}

CaseBundle load_bundle(const std::filesystem::path& dir) {
  BundleMeta meta = decode_meta(read_text(dir / kMetaFile));
  if (!meta.geometry) throw FormatError("bundle meta lacks grid geometry");
  if (meta.geometry->size() != meta.n) throw FormatError("bundle geometry does not match n");

  InputVector input = InputVector::from_bytes(read_checked(dir, meta.input, "input"), meta.geometry);
  if (input.size() != meta.n) {
    throw FormatError("input file holds " + std::to_string(input.size()) + " values, meta says n = " +
                      std::to_string(meta.n));
  }
  const auto seg_bytes = read_checked(dir, meta.segmentation, "segmentation");
  Segmentation seg = [&] {
    try {
      return Segmentation::from_pixel_ids(binio::decode_u32(seg_bytes), *meta.geometry);
    } catch (const DimensionError& e) {
      throw FormatError(std::string("bundle segmentation: ") + e.what());
    }
  }();

  std::map<std::uint32_t, AttributionMap> attrs;
  for (const auto& [label, ref] : meta.attributions) {
    const auto raw = binio::decode_f32(read_checked(dir, ref, "attribution"));
    if (raw.size() != meta.n) throw FormatError("attribution file " + ref.path + " has wrong length");
    AttributionMap a{std::vector<double>(raw.begin(), raw.end()), LabelId{label, std::nullopt}, "file"};
    if (auto it = meta.label_names.find(label); it != meta.label_names.end()) a.label.name = it->second;
    attrs.emplace(label, std::move(a));
  }

  ModelHandle model;
  if (meta.model.type == ModelEndpoint::Type::planted) {
    auto planted = make_planted_model(*meta.model.planted);
    if (planted->model_id() != meta.model_id) {
      throw FormatError("bundle model_id " + meta.model_id + " does not match planted spec id " +
                        planted->model_id());
    }
    model = std::move(planted);
  } else {
    // "{bundle}" in a command argument stands for the bundle directory.
    std::vector<std::string> command = meta.model.command;
    for (std::string& arg : command) {
      for (auto pos = arg.find("{bundle}"); pos != std::string::npos; pos = arg.find("{bundle}", pos)) {
        arg.replace(pos, 8, dir.string());
        pos += dir.string().size();
      }
    }
    auto transport = meta.model.socket.empty() ? bridge::spawn_process(command)
                                               : bridge::connect_unix_socket(meta.model.socket);
    model = std::make_shared<bridge::BridgeModel>(meta.model_id, meta.m, input, std::move(transport));
  }
  if (model->input_dim() != meta.n || model->label_count() != meta.m) {
    throw FormatError("bundle model dimensions do not match meta n/m");
  }
  return CaseBundle{dir, std::move(meta), std::move(input), std::move(seg), std::move(attrs),
                    std::move(model)};
}

void write_fixture_bundle(const oracle::Fixture& fixture, const std::filesystem::path& dir,
                          bool with_attributions) {
  std::filesystem::create_directories(dir);
  BundleMeta meta;
  meta.model_id = fixture.model->model_id();
  meta.n = fixture.input.size();
  meta.m = fixture.model->label_count();
  meta.geometry = fixture.input.geometry();
  meta.preprocessing = "none";

  const auto input_bytes = fixture.input.to_bytes();
  binio::write_file(dir / "input.f32", input_bytes);
  meta.input = FileRef{"input.f32", sha256_hex(input_bytes)};

  const auto seg_bytes = binio::encode_u32(fixture.seg.pixel_ids());
  binio::write_file(dir / "segmentation.u32", seg_bytes);
  meta.segmentation = FileRef{"segmentation.u32", sha256_hex(seg_bytes)};

  const SoftmaxVector base = predict(*fixture.model, fixture.input);
  for (const LabelId& l : {fixture.l1, fixture.l2}) {
    meta.baseline[l.index] = base[l.index];
    if (l.name) meta.label_names[l.index] = *l.name;
    if (with_attributions) {
      const AttributionMap a = occlusion_attribution(*fixture.model, fixture.input, fixture.seg, l);
      const std::string name = "attr_" + std::to_string(l.index) + ".f32";
      std::vector<float> narrow(a.values.begin(), a.values.end());
      const auto bytes = binio::encode_f32(narrow);
      binio::write_file(dir / name, bytes);
      meta.attributions[l.index] = FileRef{name, sha256_hex(bytes)};
    }
  }
  meta.model.type = ModelEndpoint::Type::planted;
  meta.model.planted = fixture.model->spec();

  std::ofstream out(dir / kMetaFile, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + (dir / kMetaFile).string());
  out << encode_meta(meta);
}

}  // namespace redcert::bundle
