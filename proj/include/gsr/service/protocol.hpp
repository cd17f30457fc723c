#pragma once

// Wire schema of the relight service: session state, partial edit messages,
// render requests and their validation. docs/service_protocol.md is the
// reader-facing description of the same rules.

#include "gsr/lighting.hpp"
#include "gsr/rasterizer.hpp"
#include "gsr/scene.hpp"

#include "json.hpp"

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsr::service {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline constexpr double kMinRoughnessScale = 0.1;
inline constexpr double kMaxRoughnessScale = 3.0;
inline constexpr int kMaxFrameSide = 2048;
inline constexpr int kMaxLights = 256;
inline constexpr double kMaxIntensity = 1000.0;
inline constexpr int kEnvSpecularSamples = 64;

/// Client error with the offending field as a dotted path ("material.roughness_scale").
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, std::string field, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), field_(std::move(field)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string code_;
  std::string field_;
};

inline json error_json(const std::string& code, const std::string& field, const std::string& message,
                       std::optional<std::uint64_t> seq = std::nullopt) {
  json j = {{"schema_version", kSchemaVersion}, {"type", "error"}, {"code", code}, {"field", field},
            {"message", message}};
  j["seq"] = seq ? json(*seq) : json(nullptr);
  return j;
}

inline json error_json(const ProtocolError& e, std::optional<std::uint64_t> seq = std::nullopt) {
  return error_json(e.code(), e.field(), e.what(), seq);
}

// ---------------------------------------------------------------------------
// State.

enum class LightMode { kPoint, kPoints, kEnv, kSH };

inline const char* to_string(LightMode m) {
  switch (m) {
    case LightMode::kPoint: return "point";
    case LightMode::kPoints: return "points";
    case LightMode::kEnv: return "env";
    case LightMode::kSH: return "sh";
  }
  return "point";
}

struct CameraState {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance = 4.5;
  int width = 256;
  int height = 256;
  double fov_deg = 30.0;

  Camera camera() const { return Camera::orbit(azimuth_deg, elevation_deg, distance, width, height, fov_deg); }
};

/// Parameters of every light mode are kept; mode selects the active one.
struct LightState {
  LightMode mode = LightMode::kPoint;
  Vec3 direction = Vec3::UnitZ();  // frontal
  Vec3 color = Vec3::Ones();
  double intensity = 3.0;
  PointSet lights;
  std::string preset = "studio";
  double rotation_deg = 0.0;
  SHLightingRGB sh = SHLightingRGB(kDefaultSHDegree);
};

struct MaterialOverrides {
  double roughness_scale = 1.0;
  Vec3 albedo_tint = Vec3::Ones();

  bool identity() const { return roughness_scale == 1.0 && albedo_tint == Vec3::Ones(); }
};

struct SessionState {
  std::string asset_id;  // empty until an asset is loaded
  CameraState camera;
  LightState light;
  MaterialOverrides material;
  std::uint64_t seq = 0;
};

// ---------------------------------------------------------------------------
// Environment presets.

inline const std::vector<std::string>& env_preset_names() {
  static const std::vector<std::string> names{"uniform", "studio", "sunset"};
  return names;
}

/// Small procedural equirectangular maps.
inline EnvMap make_env_preset(const std::string& name, int width = 64, int height = 32) {
  EnvMap env(width, height, false);
  auto lobe = [](const Vec3& d, const Vec3& axis, double cos_radius) { return d.dot(axis.normalized()) >= cos_radius; };
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 d = envmap_texel_direction(env, u, v);
      Vec3 c;
      if (name == "uniform") {
        c = Vec3::Ones();
      } else if (name == "studio") {
        c = Vec3::Constant(0.15);
        if (lobe(d, Vec3(0.5, 0.6, 0.62), std::cos(20.0 * kPi / 180.0))) c = Vec3::Constant(8.0);
        else if (lobe(d, Vec3(-0.8, 0.1, 0.6), std::cos(25.0 * kPi / 180.0))) c = Vec3::Constant(2.0);
      } else if (name == "sunset") {
        const double up = d.y();
        c = up >= 0.0 ? Vec3(Vec3(1.0, 0.55, 0.3) * (0.4 + 0.6 * (1.0 - up))) : Vec3(Vec3::Constant(0.05));
        const double el = 10.0 * kPi / 180.0, az = 60.0 * kPi / 180.0;
        if (lobe(d, Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)),
                 std::cos(6.0 * kPi / 180.0)))
          c = Vec3(20.0, 14.0, 8.0);
      } else {
        throw ProtocolError("range", "light.preset", "unknown environment preset '" + name + "'");
      }
      env.set_pixel(u, v, c);
    }
  }
  return env;
}

// ---------------------------------------------------------------------------
// Field parsing.

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ProtocolError("schema", field, field + " must be an object");
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ProtocolError("schema", join(prefix, key), "unknown field '" + join(prefix, key) + "'");
  }
}

inline double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ProtocolError("schema", field, field + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ProtocolError("range", field, field + " must be finite");
  return v;
}

inline double number_in(const json& j, const std::string& field, double lo, double hi) {
  const double v = number(j, field);
  if (v < lo || v > hi)
    throw ProtocolError("range", field,
                        field + " = " + json(v).dump() + " outside [" + json(lo).dump() + ", " + json(hi).dump() + "]");
  return v;
}

inline int integer_in(const json& j, const std::string& field, int lo, int hi) {
  if (!j.is_number_integer()) throw ProtocolError("schema", field, field + " must be an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi)
    throw ProtocolError("range", field,
                        field + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline Vec3 vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ProtocolError("schema", field, field + " must be an array of 3 numbers");
  return {number(j[0], field), number(j[1], field), number(j[2], field)};
}

inline Vec3 vec3_in(const json& j, const std::string& field, double lo, double hi) {
  if (!j.is_array() || j.size() != 3) throw ProtocolError("schema", field, field + " must be an array of 3 numbers");
  return {number_in(j[0], field, lo, hi), number_in(j[1], field, lo, hi), number_in(j[2], field, lo, hi)};
}

inline Vec3 direction(const json& j, const std::string& field) {
  const Vec3 d = vec3(j, field);
  if (!(d.norm() > 1e-12)) throw ProtocolError("range", field, field + " must be non-zero");
  return d.normalized();
}

inline PointLight point_light(const json& j, const std::string& field) {
  require_object(j, field);
  check_keys(j, {"direction", "color", "intensity"}, field);
  if (!j.contains("direction")) throw ProtocolError("schema", field + ".direction", "missing " + field + ".direction");
  const Vec3 d = direction(j["direction"], field + ".direction");
  const Vec3 c = j.contains("color") ? vec3_in(j["color"], field + ".color", 0.0, kMaxIntensity) : Vec3::Ones();
  const double s = j.contains("intensity") ? number_in(j["intensity"], field + ".intensity", 0.0, kMaxIntensity) : 1.0;
  return {d, s * c};
}

inline SHLightingRGB sh_lighting(const json& j, const std::string& field) {
  require_object(j, field);
  check_keys(j, {"degree", "coeffs"}, field);
  if (!j.contains("degree")) throw ProtocolError("schema", field + ".degree", "missing " + field + ".degree");
  const int degree = integer_in(j["degree"], field + ".degree", 0, kMaxSHDegree);
  const std::string cf = field + ".coeffs";
  if (!j.contains("coeffs") || !j["coeffs"].is_array() || j["coeffs"].size() != 3)
    throw ProtocolError("schema", cf, cf + " must hold 3 channel arrays");
  SHLightingRGB sh(degree);
  for (int c = 0; c < 3; ++c) {
    const json& row = j["coeffs"][c];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(sh_coeff_count(degree)))
      throw ProtocolError("schema", cf, cf + " rows must hold " + std::to_string(sh_coeff_count(degree)) + " numbers");
    for (int i = 0; i < sh_coeff_count(degree); ++i) sh.channels[c][i] = number(row[i], cf);
  }
  return sh;
}

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline void apply_camera(CameraState& cam, const json& j) {
  require_object(j, "camera");
  check_keys(j, {"azimuth_deg", "elevation_deg", "distance", "width", "height", "fov_deg"}, "camera");
  if (j.contains("azimuth_deg")) cam.azimuth_deg = number(j["azimuth_deg"], "camera.azimuth_deg");
  if (j.contains("elevation_deg")) cam.elevation_deg = number_in(j["elevation_deg"], "camera.elevation_deg", -89.0, 89.0);
  if (j.contains("distance")) cam.distance = number_in(j["distance"], "camera.distance", 0.1, 100.0);
  if (j.contains("width")) cam.width = integer_in(j["width"], "camera.width", 1, kMaxFrameSide);
  if (j.contains("height")) cam.height = integer_in(j["height"], "camera.height", 1, kMaxFrameSide);
  if (j.contains("fov_deg")) cam.fov_deg = number_in(j["fov_deg"], "camera.fov_deg", 1.0, 170.0);
}

inline std::optional<LightMode> mode_of_key(const std::string& key) {
  if (key == "direction" || key == "color" || key == "intensity") return LightMode::kPoint;
  if (key == "lights") return LightMode::kPoints;
  if (key == "preset" || key == "rotation_deg") return LightMode::kEnv;
  if (key == "sh") return LightMode::kSH;
  return std::nullopt;
}

/// A light edit selects its mode with "type" or, without it, by the mode
/// its fields belong to. Fields of a different mode than the selected one
/// are rejected.
inline void apply_light(LightState& light, const json& j) {
  require_object(j, "light");
  check_keys(j, {"type", "direction", "color", "intensity", "lights", "preset", "rotation_deg", "sh"}, "light");
  std::optional<LightMode> mode;
  if (j.contains("type")) {
    const json& t = j["type"];
    if (!t.is_string()) throw ProtocolError("schema", "light.type", "light.type must be a string");
    const auto s = t.get<std::string>();
    for (LightMode m : {LightMode::kPoint, LightMode::kPoints, LightMode::kEnv, LightMode::kSH})
      if (s == to_string(m)) mode = m;
    if (!mode) throw ProtocolError("range", "light.type", "light.type must be point, points, env or sh");
  }
  for (const auto& [key, value] : j.items()) {
    const auto m = mode_of_key(key);
    if (!m) continue;
    if (!mode) {
      mode = m;
    } else if (*mode != *m) {
      const bool explicit_type = j.contains("type");
      throw ProtocolError("schema", explicit_type ? "light." + key : "light.type",
                          explicit_type ? "light." + key + " does not apply to light type " + to_string(*mode)
                                        : "light fields of several types; set light.type");
    }
  }
  if (j.contains("direction")) light.direction = direction(j["direction"], "light.direction");
  if (j.contains("color")) light.color = vec3_in(j["color"], "light.color", 0.0, kMaxIntensity);
  if (j.contains("intensity")) light.intensity = number_in(j["intensity"], "light.intensity", 0.0, kMaxIntensity);
  if (j.contains("lights")) {
    const json& arr = j["lights"];
    if (!arr.is_array()) throw ProtocolError("schema", "light.lights", "light.lights must be an array");
    if (arr.size() > static_cast<std::size_t>(kMaxLights))
      throw ProtocolError("range", "light.lights", "at most " + std::to_string(kMaxLights) + " lights");
    PointSet ps;
    for (std::size_t i = 0; i < arr.size(); ++i) ps.push_back(point_light(arr[i], "light.lights[" + std::to_string(i) + "]"));
    light.lights = std::move(ps);
  }
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ProtocolError("schema", "light.preset", "light.preset must be a string");
    const auto p = j["preset"].get<std::string>();
    const auto& names = env_preset_names();
    if (std::find(names.begin(), names.end(), p) == names.end())
      throw ProtocolError("range", "light.preset", "unknown environment preset '" + p + "'");
    light.preset = p;
  }
  if (j.contains("rotation_deg")) light.rotation_deg = number(j["rotation_deg"], "light.rotation_deg");
  if (j.contains("sh")) light.sh = sh_lighting(j["sh"], "light.sh");
  if (mode) light.mode = *mode;
}

inline void apply_material(MaterialOverrides& m, const json& j) {
  require_object(j, "material");
  check_keys(j, {"roughness_scale", "albedo_tint"}, "material");
  if (j.contains("roughness_scale"))
    m.roughness_scale = number_in(j["roughness_scale"], "material.roughness_scale", kMinRoughnessScale, kMaxRoughnessScale);
  if (j.contains("albedo_tint")) m.albedo_tint = vec3_in(j["albedo_tint"], "material.albedo_tint", 0.0, 1.0);
}

inline void check_header(const json& msg, const char* type) {
  if (!msg.is_object()) throw ProtocolError("schema", "", "message must be a JSON object");
  if (!msg.contains("schema_version")) throw ProtocolError("schema", "schema_version", "missing schema_version");
  if (!msg["schema_version"].is_number_integer() || msg["schema_version"].get<std::int64_t>() != kSchemaVersion)
    throw ProtocolError("schema", "schema_version", "unsupported schema_version, expected " + std::to_string(kSchemaVersion));
  if (type) {
    if (!msg.contains("type") || !msg["type"].is_string())
      throw ProtocolError("schema", "type", "missing message type");
    if (msg["type"].get<std::string>() != type)
      throw ProtocolError("schema", "type", "unknown message type '" + msg["type"].get<std::string>() + "'");
  }
}

}  // namespace detail

/// Sequence number of a message if it carries a usable one, for tagging
/// errors about it.
inline std::optional<std::uint64_t> message_seq(const json& msg) {
  if (!msg.is_object() || !msg.contains("seq")) return std::nullopt;
  const json& s = msg["seq"];
  if (s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0)) return s.get<std::uint64_t>();
  return std::nullopt;
}

/// Applies an edit message to a copy of state. The message is validated as
/// a whole before anything is applied, so a rejected message leaves state
/// unchanged. Asset existence is the caller's concern.
inline SessionState apply_edit(const SessionState& state, const json& msg) {
  detail::check_header(msg, "edit");
  detail::check_keys(msg, {"schema_version", "type", "seq", "asset", "camera", "light", "material"}, "");
  const auto maybe_seq = message_seq(msg);
  if (!maybe_seq) throw ProtocolError("schema", "seq", "seq must be a non-negative integer");
  const std::uint64_t seq = *maybe_seq;
  if (seq <= state.seq)
    throw ProtocolError("sequence", "seq",
                        "seq " + std::to_string(seq) + " is not greater than the last applied " + std::to_string(state.seq));
  SessionState next = state;
  if (msg.contains("asset")) {
    if (!msg["asset"].is_string() || msg["asset"].get<std::string>().empty())
      throw ProtocolError("schema", "asset", "asset must be a non-empty string");
    next.asset_id = msg["asset"].get<std::string>();
  }
  if (msg.contains("camera")) detail::apply_camera(next.camera, msg["camera"]);
  if (msg.contains("light")) detail::apply_light(next.light, msg["light"]);
  if (msg.contains("material")) detail::apply_material(next.material, msg["material"]);
  next.seq = seq;
  return next;
}

/// Checks that state can be rendered with asset (degree of SH lighting).
inline void check_renderable(const SessionState& state, const HeadAsset& asset) {
  if (state.light.mode == LightMode::kSH && state.light.sh.degree() != asset.sh_degree)
    throw ProtocolError("range", "light.sh.degree",
                        "SH lighting degree " + std::to_string(state.light.sh.degree()) + " does not match the asset degree " +
                            std::to_string(asset.sh_degree));
}

inline json state_json(const SessionState& s) {
  using detail::vec_json;
  json lights = json::array();
  for (const auto& l : s.light.lights) lights.push_back({{"direction", vec_json(l.direction)}, {"color", vec_json(l.radiance)}});
  json coeffs = json::array();
  for (const auto& ch : s.light.sh.channels) coeffs.push_back(ch.coeffs);
  return {
      {"asset", s.asset_id.empty() ? json(nullptr) : json(s.asset_id)},
      {"seq", s.seq},
      {"camera",
       {{"azimuth_deg", s.camera.azimuth_deg},
        {"elevation_deg", s.camera.elevation_deg},
        {"distance", s.camera.distance},
        {"width", s.camera.width},
        {"height", s.camera.height},
        {"fov_deg", s.camera.fov_deg}}},
      {"light",
       {{"type", to_string(s.light.mode)},
        {"direction", vec_json(s.light.direction)},
        {"color", vec_json(s.light.color)},
        {"intensity", s.light.intensity},
        {"lights", lights},
        {"preset", s.light.preset},
        {"rotation_deg", s.light.rotation_deg},
        {"sh", {{"degree", s.light.sh.degree()}, {"coeffs", coeffs}}}}},
      {"material",
       {{"roughness_scale", s.material.roughness_scale}, {"albedo_tint", vec_json(s.material.albedo_tint)}}},
  };
}

// ---------------------------------------------------------------------------
// Rendering a state.

/// Roughness is scaled then clamped to [0.01, 1]; albedo is tinted.
inline HeadAsset apply_material(const HeadAsset& asset, const MaterialOverrides& m) {
  HeadAsset out = asset;
  const Vec3f tint = m.albedo_tint.cast<float>();
  for (Splat& s : out.splats) {
    s.roughness = static_cast<float>(std::clamp(m.roughness_scale * s.roughness, kMinRoughness, 1.0));
    s.albedo = s.albedo.cwiseProduct(tint);
  }
  return out;
}

inline LightCondition light_condition(const LightState& l) {
  switch (l.mode) {
    case LightMode::kPoint: return PointSet{{l.direction, l.intensity * l.color}};
    case LightMode::kPoints: return l.lights;
    case LightMode::kSH: return l.sh;
    case LightMode::kEnv: {
      EnvLight env;
      env.map = rotate_envmap(make_env_preset(l.preset), l.rotation_deg * kPi / 180.0);
      env.specular_samples = kEnvSpecularSamples;
      return env;
    }
  }
  return PointSet{};
}

inline ImageBuffer render_state(const HeadAsset& asset, const SessionState& state) {
  check_renderable(state, asset);
  const Camera cam = state.camera.camera();
  const LightCondition cond = light_condition(state.light);
  if (state.material.identity()) return render(asset, cam, cond);
  return render(apply_material(asset, state.material), cam, cond);
}

// ---------------------------------------------------------------------------
// One-shot render requests.

enum class FrameFormat { kPng, kPfm };

struct RenderRequest {
  SessionState state;
  FrameFormat format = FrameFormat::kPng;
};

/// Same fields as an edit message (without seq) plus "format"; "asset" is
/// required, everything else defaults.
inline RenderRequest parse_render_request(const json& body) {
  detail::check_header(body, nullptr);
  detail::check_keys(body, {"schema_version", "type", "asset", "camera", "light", "material", "format"}, "");
  if (body.contains("type") && body["type"] != "render") throw ProtocolError("schema", "type", "type must be render");
  if (!body.contains("asset")) throw ProtocolError("schema", "asset", "missing asset");
  RenderRequest req;
  json edit = body;
  edit.erase("format");
  edit["type"] = "edit";
  edit["seq"] = 1;
  req.state = apply_edit(SessionState{}, edit);
  if (body.contains("format")) {
    const json& f = body["format"];
    if (f == "png") req.format = FrameFormat::kPng;
    else if (f == "pfm") req.format = FrameFormat::kPfm;
    else throw ProtocolError("range", "format", "format must be png or pfm");
  }
  return req;
}

}  // namespace gsr::service
