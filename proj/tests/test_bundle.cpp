#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <unistd.h>

#include <json.hpp>

#include "redcert/bridge_client.hpp"
#include "redcert/bundle.hpp"
#include "redcert/error.hpp"
#include "redcert/search.hpp"
#include "support.hpp"

using namespace redcert;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("redcert_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string fake_bridge() { return (fs::path(REDCERT_TEST_DIR) / "fake_bridge.py").string(); }

oracle::Fixture grid4(std::uint64_t seed) {
  oracle::FixtureSpec spec;
  spec.rows = 4;
  spec.cols = 4;
  spec.geometry = Geometry{8, 8, 3};
  spec.seed = seed;
  return oracle::generate_fixture(spec);
}

void rewrite_meta(const fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json j;
  {
    std::ifstream in(dir / bundle::kMetaFile);
    in >> j;
  }
  edit(j);
  std::ofstream(dir / bundle::kMetaFile, std::ios::trunc) << j.dump(2);
}

}  // namespace

TEST_SUITE("bundle") {
  TEST_CASE("fixture bundle round trip") {
    const auto f = testing::fixture(oracle::FixtureKind::planted_disjoint, 2);
    const fs::path dir = scratch("bundle_rt");
    bundle::write_fixture_bundle(f, dir, true);
    const auto b = bundle::load_bundle(dir);
    CHECK(b.input.digest() == f.input.digest());
    CHECK(b.seg.pixel_ids() == f.seg.pixel_ids());
    CHECK(b.model->model_id() == f.model->model_id());
    CHECK(b.meta.n == f.input.size());
    CHECK(b.meta.m == 4);
    REQUIRE(b.meta.baseline.count(0) == 1);
    CHECK(b.meta.baseline.at(0) == doctest::Approx(predict(*f.model, f.input)[0]).epsilon(1e-12));
    CHECK(b.attributions.size() == 2);
    CHECK(b.label(0).name == "l0");
    CHECK(bundle::decode_meta(bundle::encode_meta(b.meta)).model_id == b.meta.model_id);
    fs::remove_all(dir);
  }

  TEST_CASE("tampering is detected") {
    const auto f = testing::fixture(oracle::FixtureKind::planted_disjoint, 2);
    const fs::path dir = scratch("bundle_tamper");
    bundle::write_fixture_bundle(f, dir);
    {
      std::fstream io(dir / "input.f32", std::ios::in | std::ios::out | std::ios::binary);
      io.seekp(0);
      const char zero[4] = {0, 0, 0, 0};
      io.write(zero, 4);
    }
    CHECK_THROWS_AS(bundle::load_bundle(dir), FormatError);
    fs::remove_all(dir);

    bundle::write_fixture_bundle(f, dir);
    rewrite_meta(dir, [](nlohmann::json& j) { j["n"] = 7; });
    CHECK_THROWS_AS(bundle::load_bundle(dir), FormatError);
    bundle::write_fixture_bundle(f, dir);
    rewrite_meta(dir, [](nlohmann::json& j) { j["schema_version"] = "9"; });
    CHECK_THROWS_AS(bundle::load_bundle(dir), FormatError);
    bundle::write_fixture_bundle(f, dir);
    rewrite_meta(dir, [](nlohmann::json& j) { j["model_id"] = "planted-0000000000000000"; });
    CHECK_THROWS_AS(bundle::load_bundle(dir), FormatError);
    CHECK_THROWS_AS(bundle::load_bundle(scratch("bundle_missing")), FormatError);
    fs::remove_all(dir);
  }
}

TEST_SUITE("bridge") {
  TEST_CASE("frame encoding") {
    CHECK(bridge::encode_request(3, "abc", IndexSet::from_sorted({0, 1, 2, 10}), 0.5) ==
          R"({"id":3,"case":"abc","redact":{"rle":[[0,3],[10,1]],"value":0.5}})");
    const auto ok = bridge::decode_response(R"({"id":3,"softmax":[0.25,0.75]})");
    CHECK(ok.id == 3);
    CHECK(ok.softmax == std::vector<double>{0.25, 0.75});
    const auto err = bridge::decode_response(R"({"id":4,"error":{"code":"bad-request","msg":"x"}})");
    REQUIRE(err.error.has_value());
    CHECK(err.error->code == "bad-request");
    CHECK_THROWS_AS(bridge::decode_response("nope"), FormatError);
    CHECK_THROWS_AS(bridge::decode_response(R"({"id":1})"), FormatError);
    CHECK_THROWS_AS(bridge::decode_response(R"({"softmax":[1]})"), FormatError);
  }

  TEST_CASE("bridge-served predictions match the planted model") {
    const auto f = grid4(1);
    const fs::path dir = scratch("bridge_grid");
    bundle::write_fixture_bundle(f, dir);
    const bridge::BridgeModel remote(f.model->model_id(), 4, f.input,
                                     bridge::spawn_process({REDCERT_PYTHON, fake_bridge(), dir.string()}));
    std::mt19937 rng(99);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::uint32_t> segs;
      for (std::uint32_t k = 0; k < 16; ++k) {
        if (rng() % 3 == 0) segs.push_back(k);
      }
      const float v = (t % 5 == 0) ? 0.5f : 0.0f;
      const InputVector x = redact(f.input, f.seg.indices_of(segs), v);
      const auto a = predict(remote, x);
      const auto b = predict(*f.model, x);
      for (std::size_t l = 0; l < 4; ++l) CHECK(a[l] == doctest::Approx(b[l]).epsilon(1e-5));
    }
    // Arbitrary edits are not redactions and never reach the wire.
    std::vector<float> vals(f.input.values().begin(), f.input.values().end());
    vals[0] = 3.0f;
    vals[1] = 4.0f;
    CHECK_THROWS_AS(predict(remote, InputVector(vals, f.input.geometry())), EvaluationError);
    fs::remove_all(dir);
  }

  TEST_CASE("malformed frames get bad-request and the connection survives") {
    const auto f = grid4(2);
    const fs::path dir = scratch("bridge_bad");
    bundle::write_fixture_bundle(f, dir);
    auto t = bridge::spawn_process({REDCERT_PYTHON, fake_bridge(), dir.string()});
    t->send_line("this is not json");
    auto r = bridge::decode_response(t->recv_line());
    REQUIRE(r.error.has_value());
    CHECK(r.error->code == "bad-request");
    t->send_line(R"({"id":5,"case":")" + f.input.digest() + R"(","redact":{"rle":[[0,99999]],"value":0}})");
    r = bridge::decode_response(t->recv_line());
    CHECK(r.id == 5);
    REQUIRE(r.error.has_value());
    CHECK(r.error->code == "bad-request");
    t->send_line(bridge::encode_request(6, f.input.digest(), IndexSet{}, 0.0));
    r = bridge::decode_response(t->recv_line());
    CHECK(r.id == 6);
    REQUIRE(r.softmax.has_value());
    CHECK((*r.softmax)[0] == doctest::Approx(predict(*f.model, f.input)[0]).epsilon(1e-5));
    fs::remove_all(dir);
  }

  TEST_CASE("error frames surface as evaluation errors") {
    const auto f = grid4(3);
    const fs::path dir = scratch("bridge_case");
    bundle::write_fixture_bundle(f, dir);
    // The bridge serves a different input than the one this model claims.
    std::vector<float> vals(f.input.values().begin(), f.input.values().end());
    vals[0] += 1.0f;
    const bridge::BridgeModel remote(f.model->model_id(), 4, InputVector(vals, f.input.geometry()),
                                     bridge::spawn_process({REDCERT_PYTHON, fake_bridge(), dir.string()}));
    CHECK_THROWS_WITH_AS(predict(remote, InputVector(vals, f.input.geometry())),
                         doctest::Contains("unknown-case"), EvaluationError);
    fs::remove_all(dir);
  }

  TEST_CASE("a bridge bundle classifies like its planted original") {
    const auto f = testing::fixture(oracle::FixtureKind::planted_overlap, 4);
    const fs::path planted = scratch("bridge_src");
    const fs::path remote = scratch("bridge_dst");
    bundle::write_fixture_bundle(f, planted);
    fs::copy(planted, remote, fs::copy_options::recursive);
    rewrite_meta(remote, [&](nlohmann::json& j) {
      j["model"] = {{"type", "bridge"}, {"command", {REDCERT_PYTHON, fake_bridge(), planted.string()}}};
    });
    const auto a = bundle::load_bundle(planted);
    const auto b = bundle::load_bundle(remote);
    const PairCase ca = make_pair_case(a.model, a.input, a.seg, a.label(0), a.label(1), {});
    const PairCase cb = make_pair_case(b.model, b.input, b.seg, b.label(0), b.label(1), {});
    const SearchOutcome oa = classify_pair(ca);
    const SearchOutcome ob = classify_pair(cb);
    CHECK(oa.kind == SearchOutcome::Kind::overlapping);
    CHECK(ob.kind == oa.kind);
    // Baselines differ in the last bits between the two evaluators, the sets must not.
    REQUIRE(ob.certificate.has_value());
    CHECK(std::get<OverlapCertificate>(*ob.certificate).s == std::get<OverlapCertificate>(*oa.certificate).s);
    fs::remove_all(planted);
    fs::remove_all(remote);
  }

  TEST_CASE("unix socket transport") {
    const auto f = grid4(5);
    const fs::path dir = scratch("bridge_sock");
    bundle::write_fixture_bundle(f, dir);
    const std::string sock = (fs::temp_directory_path() / ("redcert_" + std::to_string(::getpid()) + ".sock")).string();
    auto server = bridge::spawn_process({REDCERT_PYTHON, fake_bridge(), dir.string(), "--socket", sock});
    CHECK(server->recv_line() == "ready");
    const bridge::BridgeModel remote(f.model->model_id(), 4, f.input, bridge::connect_unix_socket(sock));
    const IndexSet s = f.seg.indices_of(f.support1);
    CHECK(predict(remote, redact(f.input, s))[0] ==
          doctest::Approx(predict(*f.model, redact(f.input, s))[0]).epsilon(1e-5));
    fs::remove_all(dir);
  }
}
