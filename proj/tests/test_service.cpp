#include "gsr/service/server.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <set>

using namespace gsr;
using namespace gsr::service;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(GSR_FIXTURE_DIR) / "service";

json fixture(const std::string& name) {
  std::ifstream in(kFixtures / name);
  EXPECT_TRUE(in.good()) << name;
  return json::parse(in);
}

json edit(std::uint64_t seq, json fields = json::object()) {
  fields["schema_version"] = kSchemaVersion;
  fields["type"] = "edit";
  fields["seq"] = seq;
  return fields;
}

/// Asset directory with one sphere, shared by the whole suite.
class AssetDir : public ::testing::Environment {
 public:
  static std::filesystem::path path() { return std::filesystem::temp_directory_path() / "gsr_test_service_assets"; }
  static const HeadAsset& sphere() {
    static const HeadAsset a = generate_sphere_asset(1500, 1.0, Vec3(0.7, 0.6, 0.5), 0.5, 3);
    return a;
  }

  void SetUp() override {
    std::filesystem::create_directories(path());
    save_asset(sphere(), (path() / "sphere.gsr").string());
  }
  void TearDown() override { std::filesystem::remove_all(path()); }
};

const auto* const kEnv = ::testing::AddGlobalTestEnvironment(new AssetDir);

AssetLoader sphere_loader() {
  auto asset = std::make_shared<const HeadAsset>(AssetDir::sphere());
  return [asset](const std::string& id) -> std::shared_ptr<const HeadAsset> {
    if (id != "sphere") throw ProtocolError("unknown_asset", "asset", "unknown asset '" + id + "'");
    return asset;
  };
}

SessionState loaded_state() {
  SessionState s;
  s.asset_id = "sphere";
  s.camera.width = 64;
  s.camera.height = 64;
  return s;
}

std::string field_of_failure(const SessionState& s, const json& msg) {
  try {
    apply_edit(s, msg);
  } catch (const ProtocolError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::set<std::string> keys(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

double peak_luminance(const ImageBuffer& img) {
  double m = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) m = std::max(m, luminance(img.pixel(x, y)));
  return m;
}

/// Collects everything a session emits.
struct Recorder {
  std::mutex mutex;
  std::condition_variable cv;
  std::vector<Outbound> out;

  Sink sink() {
    return [this](Outbound o) {
      std::lock_guard lock(mutex);
      out.push_back(std::move(o));
      cv.notify_all();
    };
  }

  std::vector<json> texts() {
    std::lock_guard lock(mutex);
    std::vector<json> t;
    for (const auto& o : out)
      if (!o.binary) t.push_back(json::parse(o.data));
    return t;
  }

  std::vector<json> of_type(const std::string& type) {
    std::vector<json> r;
    for (auto& j : texts())
      if (j["type"] == type) r.push_back(j);
    return r;
  }

  bool wait_for_frame(std::uint64_t seq, std::chrono::seconds timeout) {
    std::unique_lock lock(mutex);
    return cv.wait_for(lock, timeout, [&] {
      for (const auto& o : out)
        if (!o.binary) {
          const json j = json::parse(o.data);
          if (j["type"] == "frame" && j["seq"] == seq) return true;
        }
      return false;
    });
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Protocol

TEST(Protocol, FixtureEditsApplyInSequence) {
  SessionState s = loaded_state();
  s = apply_edit(s, fixture("edit_point_light.json"));
  EXPECT_EQ(s.light.mode, LightMode::kPoint);
  EXPECT_NEAR(s.light.direction.norm(), 1.0, 1e-15);
  EXPECT_NEAR(s.light.direction.x() / s.light.direction.y(), 0.75, 1e-12);
  EXPECT_EQ(s.light.intensity, 4.0);

  s = apply_edit(s, fixture("edit_points.json"));
  ASSERT_EQ(s.light.mode, LightMode::kPoints);
  ASSERT_EQ(s.light.lights.size(), 2u);
  EXPECT_EQ(s.light.lights[0].radiance, Vec3::Constant(2.0));
  EXPECT_EQ(s.light.lights[1].radiance, Vec3(0.2, 0.4, 1.0));

  s = apply_edit(s, fixture("edit_env.json"));
  EXPECT_EQ(s.light.mode, LightMode::kEnv);
  EXPECT_EQ(s.light.preset, "sunset");
  EXPECT_EQ(s.light.rotation_deg, 45.0);

  s = apply_edit(s, fixture("edit_sh.json"));
  EXPECT_EQ(s.light.mode, LightMode::kSH);
  EXPECT_EQ(s.light.sh.channels[2][0], 1.2);

  s = apply_edit(s, fixture("edit_camera.json"));
  EXPECT_EQ(s.camera.width, 128);
  EXPECT_EQ(s.camera.height, 96);
  EXPECT_EQ(s.camera.fov_deg, 35.0);

  s = apply_edit(s, fixture("edit_material.json"));
  EXPECT_EQ(s.material.roughness_scale, 0.3);
  EXPECT_EQ(s.material.albedo_tint, Vec3(1.0, 0.8, 0.8));

  // A partial point-light edit switches back to the point light and keeps
  // its color and intensity from seq 1.
  s = apply_edit(s, fixture("edit_partial_direction.json"));
  EXPECT_EQ(s.light.mode, LightMode::kPoint);
  EXPECT_EQ(s.light.intensity, 4.0);
  EXPECT_EQ(s.light.color, Vec3(1.0, 0.9, 0.8));
  EXPECT_LT(s.light.direction.x(), 0.0);
  EXPECT_EQ(s.seq, 7u);
  EXPECT_EQ(s.light.preset, "sunset");  // inactive parameters survive
}

TEST(Protocol, InvalidFixturesNameTheirField) {
  const SessionState s = loaded_state();
  EXPECT_EQ(field_of_failure(s, fixture("invalid_roughness_scale.json")), "material.roughness_scale");
  EXPECT_EQ(field_of_failure(s, fixture("invalid_schema_version.json")), "schema_version");
  EXPECT_EQ(field_of_failure(s, fixture("invalid_mixed_light.json")), "light.type");
  EXPECT_EQ(field_of_failure(s, fixture("invalid_unknown_field.json")), "camera.zoom");
}

TEST(Protocol, FieldErrors) {
  const SessionState s = loaded_state();
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"type", "env"}, {"direction", {0, 0, 1}}}}})), "light.direction");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"type", "laser"}}}})), "light.type");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"direction", {0, 0, 0}}}}})), "light.direction");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"intensity", -1.0}}}})), "light.intensity");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"preset", "moon"}}}})), "light.preset");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"lights", {{{"color", {1, 1, 1}}}}}}}})),
            "light.lights[0].direction");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"light", {{"sh", {{"degree", 2}, {"coeffs", {{1.0}}}}}}}})), "light.sh.coeffs");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"camera", {{"width", 0}}}})), "camera.width");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"camera", {{"width", 64.5}}}})), "camera.width");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"camera", {{"elevation_deg", 95}}}})), "camera.elevation_deg");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"material", {{"albedo_tint", {1, 2, 1}}}}})), "material.albedo_tint");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"asset", 7}})), "asset");
  EXPECT_EQ(field_of_failure(s, edit(1, {{"extra", true}})), "extra");
  json no_type = edit(1);
  no_type.erase("type");
  EXPECT_EQ(field_of_failure(s, no_type), "type");
  json no_seq = edit(1);
  no_seq.erase("seq");
  EXPECT_EQ(field_of_failure(s, no_seq), "seq");
  EXPECT_EQ(field_of_failure(s, json::array()), "");
}

TEST(Protocol, SequenceMustIncrease) {
  SessionState s = apply_edit(loaded_state(), edit(5));
  EXPECT_EQ(field_of_failure(s, edit(5)), "seq");
  EXPECT_EQ(field_of_failure(s, edit(4)), "seq");
  EXPECT_EQ(apply_edit(s, edit(9)).seq, 9u);
}

TEST(Protocol, RoughnessScaleRange) {
  const SessionState s = loaded_state();
  auto with_scale = [](double v) { return edit(1, {{"material", {{"roughness_scale", v}}}}); };
  EXPECT_EQ(apply_edit(s, with_scale(0.1)).material.roughness_scale, 0.1);
  EXPECT_EQ(apply_edit(s, with_scale(3.0)).material.roughness_scale, 3.0);
  EXPECT_EQ(field_of_failure(s, with_scale(0.0999)), "material.roughness_scale");
  EXPECT_EQ(field_of_failure(s, with_scale(3.001)), "material.roughness_scale");
  try {
    apply_edit(s, with_scale(5.0));
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code(), "range");
    EXPECT_NE(std::string(e.what()).find("roughness_scale"), std::string::npos);
  }
}

TEST(Protocol, MaterialScalesThenClampsRoughness) {
  HeadAsset a = AssetDir::sphere();
  a.splats[0].roughness = 0.5f;
  a.splats[1].roughness = 0.05f;
  a.splats[2].roughness = 0.2f;
  MaterialOverrides m;
  m.roughness_scale = 3.0;
  m.albedo_tint = Vec3(0.5, 1.0, 0.0);
  const HeadAsset b = apply_material(a, m);
  EXPECT_FLOAT_EQ(b.splats[0].roughness, 1.0f);
  EXPECT_FLOAT_EQ(b.splats[2].roughness, 0.6f);
  EXPECT_FLOAT_EQ(b.splats[0].albedo.x(), 0.5f * a.splats[0].albedo.x());
  EXPECT_FLOAT_EQ(b.splats[0].albedo.y(), a.splats[0].albedo.y());
  EXPECT_EQ(b.splats[0].albedo.z(), 0.0f);
  m.roughness_scale = 0.1;
  EXPECT_FLOAT_EQ(apply_material(a, m).splats[1].roughness, static_cast<float>(kMinRoughness));
  validate_asset(apply_material(a, m));
}

TEST(Protocol, LowerRoughnessScaleRaisesPeakUnderFrontalLight) {
  SessionState s = loaded_state();
  s.camera.width = s.camera.height = 96;
  s.light.direction = Vec3::UnitZ();
  s.material.roughness_scale = 0.3;
  const double sharp = peak_luminance(render_state(AssetDir::sphere(), s));
  s.material.roughness_scale = 1.0;
  const double base = peak_luminance(render_state(AssetDir::sphere(), s));
  EXPECT_GT(sharp, base);
}

TEST(Protocol, EnvPresets) {
  for (const auto& name : env_preset_names()) {
    const EnvMap env = make_env_preset(name);
    for (double v : env.rgb) ASSERT_GE(v, 0.0) << name;
    LightState l;
    l.mode = LightMode::kEnv;
    l.preset = name;
    validate_condition(light_condition(l));
  }
  EXPECT_THROW(make_env_preset("moon"), ProtocolError);
  // A full turn is the identity.
  LightState a, b;
  a.mode = b.mode = LightMode::kEnv;
  b.rotation_deg = 360.0;
  const auto& ma = std::get<EnvLight>(light_condition(a)).map;
  const auto& mb = std::get<EnvLight>(light_condition(b)).map;
  for (std::size_t i = 0; i < ma.rgb.size(); ++i) ASSERT_NEAR(ma.rgb[i], mb.rgb[i], 1e-9);
}

TEST(Protocol, ShDegreeMustMatchAsset) {
  SessionState s = loaded_state();
  s = apply_edit(s, edit(1, {{"light", {{"sh", {{"degree", 1}, {"coeffs", {{1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}}}}}}}}));
  try {
    check_renderable(s, AssetDir::sphere());
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.field(), "light.sh.degree");
  }
}

TEST(Protocol, StateEchoMatchesDocumentedFrame) {
  const json doc = fixture("server_frame.json");
  const json echo = state_json(loaded_state());
  EXPECT_EQ(keys(echo), keys(doc["state"]));
  for (const char* k : {"camera", "light", "material"}) EXPECT_EQ(keys(echo[k]), keys(doc["state"][k])) << k;
}

TEST(Protocol, RenderRequestFixture) {
  const RenderRequest r = parse_render_request(fixture("render_request.json"));
  EXPECT_EQ(r.state.asset_id, "sphere");
  EXPECT_EQ(r.state.camera.width, 64);
  EXPECT_EQ(r.format, FrameFormat::kPng);
  json bad = fixture("render_request.json");
  bad.erase("asset");
  EXPECT_THROW(parse_render_request(bad), ProtocolError);
  bad = fixture("render_request.json");
  bad["format"] = "jpeg";
  EXPECT_THROW(parse_render_request(bad), ProtocolError);
}

// ---------------------------------------------------------------------------
// Session, driven synchronously

TEST(Session, CoalescedBatchAcksEveryMessageAndRendersOnce) {
  Recorder rec;
  Session session("t", sphere_loader(), loaded_state(), std::make_shared<const HeadAsset>(AssetDir::sphere()), false);
  session.attach(rec.sink());
  SessionState expected = loaded_state();
  for (std::uint64_t k = 1; k <= 5; ++k) {
    const json msg = edit(k, {{"camera", {{"azimuth_deg", 10.0 * k}}}});
    expected = apply_edit(expected, msg);
    session.submit(msg.dump());
  }
  EXPECT_EQ(session.run_pending(), 5u);

  const auto acks = rec.of_type("ack");
  ASSERT_EQ(acks.size(), 5u);
  for (std::size_t i = 0; i < acks.size(); ++i) {
    EXPECT_EQ(acks[i]["seq"], i + 1);
    EXPECT_EQ(acks[i]["frame_seq"], 5);
  }
  const auto frames = rec.of_type("frame");
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0]["seq"], 5);
  EXPECT_EQ(frames[0]["coalesced"], json({1, 2, 3, 4, 5}));
  EXPECT_EQ(frames[0]["state"], state_json(expected));
  EXPECT_EQ(keys(frames[0]), keys(fixture("server_frame.json")));
  EXPECT_EQ(keys(acks[0]), keys(fixture("server_ack.json")));

  ASSERT_EQ(rec.out.size(), 7u);
  ASSERT_TRUE(rec.out.back().binary);
  const std::string& png = rec.out.back().data;
  EXPECT_EQ(frames[0]["byte_length"], png.size());
  const ImageBuffer img = decode_png(std::vector<std::uint8_t>(png.begin(), png.end()));
  EXPECT_EQ(img.width, 64);
  EXPECT_EQ(img.height, 64);
}

TEST(Session, ClientErrorsLeaveStateUnchanged) {
  Recorder rec;
  Session session("t", sphere_loader(), loaded_state(), std::make_shared<const HeadAsset>(AssetDir::sphere()), false);
  session.attach(rec.sink());
  const json before = state_json(session.state());
  session.submit(fixture("invalid_roughness_scale.json").dump());
  session.submit("{not json");
  session.submit("[]");
  session.submit(edit(1, {{"asset", "nope"}}).dump());
  session.run_pending();
  EXPECT_EQ(state_json(session.state()), before);
  EXPECT_TRUE(rec.of_type("frame").empty());
  EXPECT_TRUE(rec.of_type("ack").empty());

  const auto errors = rec.of_type("error");
  ASSERT_EQ(errors.size(), 4u);
  EXPECT_EQ(errors[0]["field"], "material.roughness_scale");
  EXPECT_EQ(errors[0]["seq"], 1);
  EXPECT_EQ(keys(errors[0]), keys(fixture("server_error.json")));
  EXPECT_EQ(errors[1]["code"], "parse");
  EXPECT_TRUE(errors[1]["seq"].is_null());
  EXPECT_EQ(errors[2]["code"], "schema");
  EXPECT_EQ(errors[3]["code"], "unknown_asset");
  EXPECT_EQ(errors[3]["field"], "asset");

  // The session keeps serving.
  session.submit(edit(1, {{"material", {{"roughness_scale", 0.5}}}}).dump());
  session.run_pending();
  ASSERT_EQ(rec.of_type("frame").size(), 1u);
  EXPECT_EQ(session.state().material.roughness_scale, 0.5);
}

TEST(Session, EditsRequireAnAsset) {
  Recorder rec;
  Session session("t", sphere_loader(), {}, nullptr, false);
  session.attach(rec.sink());
  session.submit(edit(1, {{"camera", {{"width", 32}, {"height", 32}}}}).dump());
  session.run_pending();
  auto errors = rec.of_type("error");
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0]["code"], "not_loaded");
  EXPECT_EQ(errors[0]["field"], "asset");

  session.submit(edit(1, {{"asset", "sphere"}, {"camera", {{"width", 32}, {"height", 32}}}}).dump());
  session.run_pending();
  const auto frames = rec.of_type("frame");
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0]["state"]["asset"], "sphere");
}

TEST(Session, IdenticalEditsGiveByteIdenticalFrames) {
  auto frame_bytes = [](const json& msg) {
    Recorder rec;
    Session session("t", sphere_loader(), loaded_state(), std::make_shared<const HeadAsset>(AssetDir::sphere()), false);
    session.attach(rec.sink());
    session.submit(msg.dump());
    session.run_pending();
    EXPECT_TRUE(rec.out.back().binary);
    return rec.out.back().data;
  };
  const json msg = edit(1, {{"light", {{"type", "env"}, {"preset", "studio"}, {"rotation_deg", 30}}},
                            {"material", {{"roughness_scale", 0.7}}}});
  EXPECT_EQ(frame_bytes(msg), frame_bytes(msg));
}

TEST(Session, DetachedSinkDropsOutput) {
  Recorder rec;
  Session session("t", sphere_loader(), loaded_state(), std::make_shared<const HeadAsset>(AssetDir::sphere()), false);
  const auto token = session.attach(rec.sink());
  session.detach(token + 1);  // stale token: no effect
  session.detach(token);
  session.submit(edit(1).dump());
  session.run_pending();
  EXPECT_TRUE(rec.out.empty());
  EXPECT_EQ(session.state().seq, 1u);
}

// ---------------------------------------------------------------------------
// Session with its owner thread

TEST(Session, WorkerFramesReflectPrefixesInOrder) {
  Recorder rec;
  const int n = 30;
  std::vector<json> msgs;
  std::vector<json> expected_state{state_json(loaded_state())};
  SessionState s = loaded_state();
  for (int k = 1; k <= n; ++k) {
    msgs.push_back(edit(k, {{"camera", {{"azimuth_deg", 7.0 * k}}}, {"light", {{"intensity", 1.0 + 0.1 * k}}}}));
    s = apply_edit(s, msgs.back());
    expected_state.push_back(state_json(s));
  }
  {
    Session session("t", sphere_loader(), loaded_state(), std::make_shared<const HeadAsset>(AssetDir::sphere()));
    session.attach(rec.sink());
    for (const auto& m : msgs) session.submit(m.dump());
    ASSERT_TRUE(rec.wait_for_frame(n, std::chrono::seconds(60)));
  }

  const auto acks = rec.of_type("ack");
  ASSERT_EQ(acks.size(), static_cast<std::size_t>(n));
  const auto frames = rec.of_type("frame");
  std::set<std::uint64_t> frame_seqs;
  std::uint64_t last = 0;
  for (const auto& f : frames) {
    const auto seq = f["seq"].get<std::uint64_t>();
    EXPECT_GT(seq, last);
    last = seq;
    frame_seqs.insert(seq);
    EXPECT_EQ(f["state"], expected_state[seq]) << seq;
  }
  for (int k = 0; k < n; ++k) {
    EXPECT_EQ(acks[k]["seq"], k + 1);
    const auto fs = acks[k]["frame_seq"].get<std::uint64_t>();
    EXPECT_GE(fs, static_cast<std::uint64_t>(k + 1));
    EXPECT_TRUE(frame_seqs.count(fs)) << "ack " << k + 1 << " points at a frame that was never sent";
  }
  EXPECT_EQ(last, static_cast<std::uint64_t>(n));
}

// ---------------------------------------------------------------------------
// HTTP routing

TEST(Service, ListsAssets) {
  Service service(AssetDir::path());
  const HttpReply r = service.handle("GET", "/assets", "");
  ASSERT_EQ(r.status, 200);
  const json j = json::parse(r.body);
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  ASSERT_EQ(j["assets"].size(), 1u);
  EXPECT_EQ(j["assets"][0]["id"], "sphere");
  EXPECT_EQ(j["assets"][0]["splats"], 1500);
}

TEST(Service, LoadOpensSession) {
  Service service(AssetDir::path());
  const HttpReply r = service.handle("POST", "/assets/sphere/load", "");
  ASSERT_EQ(r.status, 200);
  const json j = json::parse(r.body);
  const std::string id = j["session"];
  EXPECT_EQ(j["socket"], "/ws/session/" + id);
  EXPECT_EQ(service.session(id)->state().asset_id, "sphere");
  EXPECT_NE(json::parse(service.handle("POST", "/assets/sphere/load", "").body)["session"], id);
}

TEST(Service, ErrorsAreStructured) {
  Service service(AssetDir::path());
  auto check = [&](const HttpReply& r, int status, const std::string& field) {
    EXPECT_EQ(r.status, status);
    const json j = json::parse(r.body);
    EXPECT_EQ(j["type"], "error");
    EXPECT_EQ(j["field"], field);
  };
  check(service.handle("POST", "/assets/nope/load", ""), 404, "asset");
  check(service.handle("POST", "/assets/../sphere/load", ""), 404, "asset");
  check(service.handle("GET", "/nowhere", ""), 404, "path");
  check(service.handle("GET", "/render", ""), 405, "method");
  check(service.handle("POST", "/render", "{"), 400, "");
  json body = fixture("render_request.json");
  body["material"]["roughness_scale"] = 5.0;
  check(service.handle("POST", "/render", body.dump()), 400, "material.roughness_scale");
  body = fixture("render_request.json");
  body["asset"] = "nope";
  check(service.handle("POST", "/render", body.dump()), 404, "asset");
}

TEST(Service, RenderMatchesDirectRender) {
  Service service(AssetDir::path());
  json body = fixture("render_request.json");
  const RenderRequest req = parse_render_request(body);
  const ImageBuffer img = render_state(AssetDir::sphere(), req.state);

  HttpReply r = service.handle("POST", "/render", body.dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const auto png = encode_png(img);
  EXPECT_EQ(r.body, std::string(png.begin(), png.end()));

  body["format"] = "pfm";
  r = service.handle("POST", "/render", body.dump());
  ASSERT_EQ(r.status, 200);
  const auto pfm = encode_pfm(img);
  EXPECT_EQ(r.body, std::string(pfm.begin(), pfm.end()));
}

// ---------------------------------------------------------------------------
// Over the network

namespace {

struct Client {
  net::io_context ioc;
  unsigned short port;

  http::response<http::string_body> request(http::verb verb, const std::string& target, const std::string& body = "") {
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return res;
  }
};

json read_json(websocket::stream<tcp::socket>& ws) {
  beast::flat_buffer buf;
  ws.read(buf);
  EXPECT_TRUE(ws.got_text());
  return json::parse(beast::buffers_to_string(buf.data()));
}

}  // namespace

TEST(Server, HttpAndSocketRoundTrip) {
  Service service(AssetDir::path());
  HttpServer server(service, "127.0.0.1", 0);
  server.start();
  Client client{{}, server.port()};

  auto res = client.request(http::verb::get, "/assets");
  ASSERT_EQ(res.result_int(), 200);
  EXPECT_EQ(json::parse(res.body())["assets"][0]["id"], "sphere");

  res = client.request(http::verb::post, "/render", fixture("render_request.json").dump());
  ASSERT_EQ(res.result_int(), 200);
  EXPECT_EQ(res[http::field::content_type], "image/png");
  EXPECT_EQ(decode_png(std::vector<std::uint8_t>(res.body().begin(), res.body().end())).width, 64);

  res = client.request(http::verb::post, "/assets/sphere/load");
  ASSERT_EQ(res.result_int(), 200);
  const std::string socket_path = json::parse(res.body())["socket"];

  tcp::resolver resolver(client.ioc);
  websocket::stream<tcp::socket> ws(client.ioc);
  net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(client.port)));
  ws.handshake("127.0.0.1", socket_path);

  ws.text(true);
  ws.write(net::buffer(fixture("invalid_roughness_scale.json").dump()));
  json err = read_json(ws);
  EXPECT_EQ(err["type"], "error");
  EXPECT_EQ(err["field"], "material.roughness_scale");

  ws.write(net::buffer(edit(1, {{"camera", {{"width", 48}, {"height", 40}}}}).dump()));
  const json ack = read_json(ws);
  EXPECT_EQ(ack["type"], "ack");
  EXPECT_EQ(ack["frame_seq"], 1);
  const json header = read_json(ws);
  EXPECT_EQ(header["type"], "frame");
  EXPECT_EQ(header["state"]["asset"], "sphere");
  beast::flat_buffer buf;
  ws.read(buf);
  EXPECT_TRUE(ws.got_binary());
  const std::string png = beast::buffers_to_string(buf.data());
  EXPECT_EQ(header["byte_length"], png.size());
  const ImageBuffer img = decode_png(std::vector<std::uint8_t>(png.begin(), png.end()));
  EXPECT_EQ(img.width, 48);
  EXPECT_EQ(img.height, 40);
  ws.close(websocket::close_code::normal);

  // A socket on a fresh session id starts without an asset.
  websocket::stream<tcp::socket> ws2(client.ioc);
  net::connect(ws2.next_layer(), resolver.resolve("127.0.0.1", std::to_string(client.port)));
  ws2.handshake("127.0.0.1", "/ws/session/fresh");
  ws2.write(net::buffer(edit(1).dump()));
  EXPECT_EQ(read_json(ws2)["code"], "not_loaded");
  ws2.close(websocket::close_code::normal);

  server.stop();
}
