#pragma once

#include "gsr/common.hpp"
#include "gsr/sh.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gsr {

/// One 3D Gaussian: frozen geometry plus relighting attributes.
///
/// transport holds 3 rows (r, g, b) of (sh_degree + 1)^2 SH coefficients,
/// row-major.
struct Splat {
  Vec3f position = Vec3f::Zero();
  Quatf rotation = Quatf::Identity();  // local frame to world
  Vec3f scale = Vec3f::Constant(0.01f);
  float opacity = 1.0f;
  Vec3f albedo = Vec3f::Constant(0.5f);
  Vec3f normal = Vec3f::UnitZ();
  float roughness = 0.5f;
  std::vector<float> transport = std::vector<float>(3 * sh_coeff_count(kDefaultSHDegree), 0.0f);

  float transport_at(int channel, int coeff, int width) const { return transport[channel * width + coeff]; }
};

struct AssetMetadata {
  std::string name = "asset";
  std::string generator = "unknown";
  bool ground_truth = false;
};

struct HeadAsset {
  std::vector<Splat> splats;
  int sh_degree = kDefaultSHDegree;
  AssetMetadata metadata;

  int transport_width() const { return sh_coeff_count(sh_degree); }
  std::size_t size() const { return splats.size(); }
};

/// Fixed dielectric base reflectance for skin and hair.
struct MaterialConstants {
  double f0 = 0.04;
};

inline constexpr float kUnitTolerance = 1e-5f;
inline constexpr float kRenormalizeTolerance = 1e-3f;

inline void validate_splat(const Splat& s, int sh_degree, std::size_t index = 0) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvariantViolation, "splat " + std::to_string(index) + ": " + what);
  };
  const auto width = static_cast<std::size_t>(sh_coeff_count(sh_degree));
  if (s.transport.size() != 3 * width)
    throw Error(ErrorCode::kShapeMismatch, "splat " + std::to_string(index) + ": transport has " +
                                               std::to_string(s.transport.size()) + " entries, expected " +
                                               std::to_string(3 * width));
  if (!s.position.allFinite() || !s.rotation.coeffs().allFinite() || !s.scale.allFinite() ||
      !std::isfinite(s.opacity) || !s.albedo.allFinite() || !s.normal.allFinite() || !std::isfinite(s.roughness))
    fail("non-finite attribute");
  for (float t : s.transport)
    if (!std::isfinite(t)) fail("non-finite transport coefficient");
  if (std::abs(s.rotation.norm() - 1.0f) > kUnitTolerance) fail("rotation quaternion is not unit");
  if (std::abs(s.normal.norm() - 1.0f) > kUnitTolerance) fail("normal is not unit");
  if ((s.scale.array() <= 0.0f).any()) fail("scale must be positive");
  if (s.opacity < 0.0f || s.opacity > 1.0f) fail("opacity outside [0, 1]");
  if ((s.albedo.array() < 0.0f).any() || (s.albedo.array() > 1.0f).any()) fail("albedo outside [0, 1]");
  if (!(s.roughness > 0.0f) || s.roughness > 1.0f) fail("roughness outside (0, 1]");
}

inline void validate_asset(const HeadAsset& asset) {
  check_sh_degree(asset.sh_degree);
  if (asset.splats.empty()) throw Error(ErrorCode::kInvariantViolation, "asset has no splats");
  for (std::size_t i = 0; i < asset.splats.size(); ++i) validate_splat(asset.splats[i], asset.sh_degree, i);
}

// ---------------------------------------------------------------------------
// Asset file: text header terminated by a "data" line, then a little-endian
// float32 blob, splat-major. Field order per splat:
//   position:3 rotation:4 (w x y z) scale:3 opacity:1 albedo:3 normal:3
//   roughness:1 transport:3*(s+1)^2 (rgb rows)

inline constexpr int kAssetVersion = 1;
inline constexpr const char* kAssetMagic = "GSRASSET";

namespace detail {

inline std::string asset_layout(int transport_entries) {
  return "position:3 rotation:4 scale:3 opacity:1 albedo:3 normal:3 roughness:1 transport:" +
         std::to_string(transport_entries);
}

inline void put_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline float get_f32(const unsigned char* p) {
  const std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

/// Accepts v within kRenormalizeTolerance of unit length, renormalizing only
/// when it is outside the float invariant tolerance.
template <typename V>
bool settle_unit(V& v) {
  const float n = v.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0f) > kRenormalizeTolerance) return false;
  if (std::abs(n - 1.0f) > kUnitTolerance) v.normalize();
  return true;
}

}  // namespace detail

inline std::string serialize_asset(const HeadAsset& asset) {
  validate_asset(asset);
  const int entries = 3 * asset.transport_width();
  std::ostringstream header;
  header << kAssetMagic << "\n"
         << "version " << kAssetVersion << "\n"
         << "name " << asset.metadata.name << "\n"
         << "generator " << asset.metadata.generator << "\n"
         << "ground_truth " << (asset.metadata.ground_truth ? 1 : 0) << "\n"
         << "count " << asset.splats.size() << "\n"
         << "sh_degree " << asset.sh_degree << "\n"
         << "layout " << detail::asset_layout(entries) << "\n"
         << "data\n";
  std::string out = header.str();
  out.reserve(out.size() + asset.splats.size() * (18 + entries) * 4);
  for (const Splat& s : asset.splats) {
    for (int i = 0; i < 3; ++i) detail::put_f32(out, s.position[i]);
    detail::put_f32(out, s.rotation.w());
    detail::put_f32(out, s.rotation.x());
    detail::put_f32(out, s.rotation.y());
    detail::put_f32(out, s.rotation.z());
    for (int i = 0; i < 3; ++i) detail::put_f32(out, s.scale[i]);
    detail::put_f32(out, s.opacity);
    for (int i = 0; i < 3; ++i) detail::put_f32(out, s.albedo[i]);
    for (int i = 0; i < 3; ++i) detail::put_f32(out, s.normal[i]);
    detail::put_f32(out, s.roughness);
    for (float t : s.transport) detail::put_f32(out, t);
  }
  return out;
}

inline HeadAsset deserialize_asset(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw Error(ErrorCode::kTruncated, "asset header truncated");
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };
  if (next_line() != kAssetMagic) throw Error(ErrorCode::kParse, "not an asset file (bad magic)");
  std::map<std::string, std::string> fields;
  for (;;) {
    const std::string line = next_line();
    if (line == "data") break;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) throw Error(ErrorCode::kParse, "malformed header line: " + line);
    fields[line.substr(0, sp)] = line.substr(sp + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::kParse, std::string("asset header missing '") + key + "'");
    return it->second;
  };
  auto to_int = [&](const char* key) -> long long {
    const std::string& v = need(key);
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size()) throw Error(ErrorCode::kParse, std::string("bad integer for '") + key + "': " + v);
    return x;
  };
  if (to_int("version") != kAssetVersion)
    throw Error(ErrorCode::kVersionMismatch,
                "asset version " + need("version") + ", reader supports " + std::to_string(kAssetVersion));

  HeadAsset asset;
  asset.metadata.name = need("name");
  asset.metadata.generator = need("generator");
  asset.metadata.ground_truth = to_int("ground_truth") != 0;
  const long long count = to_int("count");
  asset.sh_degree = static_cast<int>(to_int("sh_degree"));
  check_sh_degree(asset.sh_degree);
  if (count <= 0) throw Error(ErrorCode::kInvariantViolation, "asset has no splats");

  // The layout line must match the field order this reader knows, with the
  // transport width implied by sh_degree.
  const std::string& layout = need("layout");
  const std::string prefix = detail::asset_layout(0);
  const std::string stem = prefix.substr(0, prefix.size() - 1);
  if (layout.compare(0, stem.size(), stem) != 0) throw Error(ErrorCode::kParse, "unknown field layout: " + layout);
  long long entries = 0;
  try {
    entries = std::stoll(layout.substr(stem.size()));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, "unknown field layout: " + layout);
  }
  const int width = sh_coeff_count(asset.sh_degree);
  if (entries % 3 != 0 || entries / 3 != width)
    throw Error(ErrorCode::kShapeMismatch, "transport rows are " + std::to_string(entries / 3) +
                                               " wide but sh_degree " + std::to_string(asset.sh_degree) +
                                               " needs " + std::to_string(width));

  const std::size_t per_splat = 18 + static_cast<std::size_t>(entries);
  const std::size_t need_bytes = static_cast<std::size_t>(count) * per_splat * 4;
  if (bytes.size() - pos < need_bytes)
    throw Error(ErrorCode::kTruncated, "asset blob has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                           std::to_string(need_bytes));

  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  auto next = [&] {
    const float v = detail::get_f32(p);
    p += 4;
    return v;
  };
  asset.splats.resize(static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < asset.splats.size(); ++k) {
    Splat& s = asset.splats[k];
    for (int i = 0; i < 3; ++i) s.position[i] = next();
    const float w = next(), x = next(), y = next(), z = next();
    s.rotation = Quatf(w, x, y, z);
    for (int i = 0; i < 3; ++i) s.scale[i] = next();
    s.opacity = next();
    for (int i = 0; i < 3; ++i) s.albedo[i] = next();
    for (int i = 0; i < 3; ++i) s.normal[i] = next();
    s.roughness = next();
    s.transport.resize(static_cast<std::size_t>(entries));
    for (float& t : s.transport) t = next();
    if (!detail::settle_unit(s.rotation.coeffs()))
      throw Error(ErrorCode::kInvariantViolation, "splat " + std::to_string(k) + ": rotation quaternion is not unit");
    if (!detail::settle_unit(s.normal))
      throw Error(ErrorCode::kInvariantViolation, "splat " + std::to_string(k) + ": normal is not unit");
    validate_splat(s, asset.sh_degree, k);
  }
  return asset;
}

inline void save_asset(const HeadAsset& asset, const std::string& path) {
  const std::string bytes = serialize_asset(asset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline HeadAsset load_asset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_asset(bytes);
}

// ---------------------------------------------------------------------------
// Camera: pinhole, OpenCV axes (x right, y down, z forward), world-to-camera
// rotation R and translation t. Pixel (i, j) covers [i, i+1) x [j, j+1);
// its sample point is the center (i + 0.5, j + 0.5).

struct Camera {
  double fx = 100.0, fy = 100.0, cx = 50.0, cy = 50.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 100, height = 100;

  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }

  bool operator==(const Camera& o) const {
    return fx == o.fx && fy == o.fy && cx == o.cx && cy == o.cy && rotation == o.rotation &&
           translation == o.translation && width == o.width && height == o.height;
  }

  /// Looks at the origin from azimuth/elevation (degrees) at distance, with
  /// +y up. Azimuth 0, elevation 0 sits on +z.
  static Camera orbit(double azimuth_deg, double elevation_deg, double distance, int width, int height,
                      double fov_y_deg = 30.0) {
    const double az = azimuth_deg * kPi / 180.0;
    const double el = std::clamp(elevation_deg, -89.0, 89.0) * kPi / 180.0;
    const Vec3 eye = distance * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
    return look_at(eye, Vec3::Zero(), Vec3::UnitY(), width, height, fov_y_deg);
  }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                        double fov_y_deg = 30.0) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitX());
    right.normalize();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
  }
};

inline void validate_camera(const Camera& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw Error(ErrorCode::kInvariantViolation, "camera focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) throw Error(ErrorCode::kInvariantViolation, "camera resolution must be positive");
  if (!cam.rotation.allFinite() || !cam.translation.allFinite())
    throw Error(ErrorCode::kInvariantViolation, "camera extrinsics must be finite");
  if ((cam.rotation * cam.rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-5)
    throw Error(ErrorCode::kInvariantViolation, "camera rotation is not orthonormal");
}

/// Camera text file:
///   W H
///   fx fy cx cy
///   r00 r01 r02 tx
///   r10 r11 r12 ty
///   r20 r21 r22 tz
inline Camera parse_camera(std::istream& in) {
  Camera cam;
  in >> cam.width >> cam.height >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
  for (int r = 0; r < 3; ++r) {
    in >> cam.rotation(r, 0) >> cam.rotation(r, 1) >> cam.rotation(r, 2) >> cam.translation[r];
  }
  if (!in) throw Error(ErrorCode::kParse, "malformed camera file");
  validate_camera(cam);
  return cam;
}

inline Camera load_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_camera(in);
}

inline void save_camera(const Camera& cam, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.precision(17);
  out << cam.width << " " << cam.height << "\n" << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << "\n";
  for (int r = 0; r < 3; ++r)
    out << cam.rotation(r, 0) << " " << cam.rotation(r, 1) << " " << cam.rotation(r, 2) << " " << cam.translation[r]
        << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic ground-truth assets.

/// Unshadowed Lambert transport (Ramamoorthi-Hanrahan clamped cosine,
/// divided by pi): T_lm = (A_l / pi) Y_lm(n), A = (pi, 2pi/3, pi/4, 0).
inline std::vector<double> lambert_transport_row(const Vec3& normal, int degree) {
  static constexpr double kBand[4] = {1.0, 2.0 / 3.0, 0.25, 0.0};
  const SHVector y = sh_basis(normal, degree);
  std::vector<double> row(y.size());
  for (int l = 0, i = 0; l <= degree; ++l)
    for (int m = -l; m <= l; ++m, ++i) row[i] = kBand[l] * y.coeffs[i];
  return row;
}

inline Vec3 fibonacci_sphere_point(int i, int n, double phase = 0.0) {
  static const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - (2.0 * i + 1.0) / n;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = i * kGoldenAngle + phase;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

namespace detail {

/// Disc-shaped splat tangent to the surface at unit normal n.
inline Splat surface_splat(const Vec3& position, const Vec3& n, double tangent_sigma, const Vec3& albedo,
                           double roughness, int degree, const std::vector<double>& row) {
  Splat s;
  s.position = position.cast<float>();
  s.normal = n.cast<float>().normalized();
  s.rotation = Quatf(Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n).normalized().cast<float>());
  s.rotation.normalize();
  s.scale = Vec3f(static_cast<float>(tangent_sigma), static_cast<float>(tangent_sigma),
                  static_cast<float>(0.1 * tangent_sigma));
  s.opacity = 0.9f;
  s.albedo = albedo.cast<float>();
  s.roughness = static_cast<float>(roughness);
  const int width = sh_coeff_count(degree);
  s.transport.assign(3 * width, 0.0f);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < width; ++i) s.transport[c * width + i] = static_cast<float>(row[i]);
  return s;
}

inline double sphere_tangent_sigma(double radius, int n) { return 0.6 * radius * std::sqrt(4.0 * kPi / n); }

}  // namespace detail

/// Fibonacci-lattice sphere with outward normals and Lambert transport. The
/// seed picks the lattice's azimuthal phase.
inline HeadAsset generate_sphere_asset(int n_splats, double radius, const Vec3& albedo, double roughness,
                                       std::uint64_t seed, int degree = kDefaultSHDegree) {
  if (n_splats < 16) throw Error(ErrorCode::kDomain, "sphere asset needs at least 16 splats");
  if (!(radius > 0.0)) throw Error(ErrorCode::kDomain, "sphere radius must be positive");
  check_sh_degree(degree);
  Rng rng(seed);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double sigma = detail::sphere_tangent_sigma(radius, n_splats);
  HeadAsset asset;
  asset.sh_degree = degree;
  asset.metadata = {"sphere", "sphere seed=" + std::to_string(seed), true};
  asset.splats.reserve(n_splats);
  for (int i = 0; i < n_splats; ++i) {
    const Vec3 n = fibonacci_sphere_point(i, n_splats, phase);
    asset.splats.push_back(
        detail::surface_splat(radius * n, n, sigma, albedo, roughness, degree, lambert_transport_row(n, degree)));
  }
  validate_asset(asset);
  return asset;
}

struct TwoLobeParams {
  int splats_per_lobe = 2000;
  double radius_a = 1.0;
  double radius_b = 0.6;
  double separation = 1.6;  // center distance along x
  Vec3 albedo = Vec3::Constant(0.6);
  double roughness = 0.5;
  std::uint64_t seed = 0;
  int sh_degree = kDefaultSHDegree;
};

/// Cosine-weighted fraction of the upper hemisphere at p (normal n) blocked
/// by a sphere (center, radius): sin^2(beta) * max(n.d, 0), beta the cap
/// half-angle and d the cap axis. Exact while the cap is entirely above the
/// horizon; used as an approximation otherwise.
inline double sphere_occlusion_fraction(const Vec3& p, const Vec3& n, const Vec3& center, double radius) {
  const Vec3 v = center - p;
  const double dist = v.norm();
  if (dist <= 1e-12) return 0.0;
  const double sin_beta = std::min(1.0, radius / dist);
  return sin_beta * sin_beta * std::clamp(n.dot(v / dist), 0.0, 1.0);
}

/// Two spheres along x (a at -separation/2, b at +separation/2). Surface
/// points inside the other lobe are dropped. Each splat's Lambert transport
/// is scaled by (1 - occlusion fraction) of the other lobe; splats facing
/// away keep the exact Lambert kernel. Coincident equal lobes reduce to the
/// single sphere.
inline HeadAsset generate_two_lobe_asset(const TwoLobeParams& p) {
  if (p.splats_per_lobe < 16) throw Error(ErrorCode::kDomain, "two-lobe asset needs at least 16 splats per lobe");
  if (!(p.radius_a > 0.0) || !(p.radius_b > 0.0) || p.separation < 0.0)
    throw Error(ErrorCode::kDomain, "two-lobe asset: radii must be positive and separation non-negative");
  if (p.separation == 0.0 && p.radius_a == p.radius_b) {
    HeadAsset asset = generate_sphere_asset(p.splats_per_lobe, p.radius_a, p.albedo, p.roughness, p.seed, p.sh_degree);
    asset.metadata = {"two_lobe", "two_lobe coincident seed=" + std::to_string(p.seed), true};
    return asset;
  }
  Rng rng(p.seed);
  const std::array<Vec3, 2> centers{Vec3(-0.5 * p.separation, 0, 0), Vec3(0.5 * p.separation, 0, 0)};
  const std::array<double, 2> radii{p.radius_a, p.radius_b};
  HeadAsset asset;
  asset.sh_degree = p.sh_degree;
  asset.metadata = {"two_lobe", "two_lobe seed=" + std::to_string(p.seed), true};
  for (int lobe = 0; lobe < 2; ++lobe) {
    const int other = 1 - lobe;
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double sigma = detail::sphere_tangent_sigma(radii[lobe], p.splats_per_lobe);
    for (int i = 0; i < p.splats_per_lobe; ++i) {
      const Vec3 n = fibonacci_sphere_point(i, p.splats_per_lobe, phase);
      const Vec3 pos = centers[lobe] + radii[lobe] * n;
      if ((pos - centers[other]).norm() < radii[other] - 1e-9) continue;
      std::vector<double> row = lambert_transport_row(n, p.sh_degree);
      const double visible = 1.0 - sphere_occlusion_fraction(pos, n, centers[other], radii[other]);
      for (double& t : row) t *= visible;
      asset.splats.push_back(detail::surface_splat(pos, n, sigma, p.albedo, p.roughness, p.sh_degree, row));
    }
  }
  validate_asset(asset);
  return asset;
}

// ---------------------------------------------------------------------------
// Triangle meshes (ASCII OBJ subset: v and triangular f records).

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  Vec3 face_normal(std::size_t f) const {
    const auto& t = faces[f];
    return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
  }
};

inline TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw Error(ErrorCode::kParse, "obj line " + std::to_string(line_no) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      std::string tok;
      int count = 0;
      while (ls >> tok) {
        if (count == 3) throw Error(ErrorCode::kParse, "obj line " + std::to_string(line_no) + ": only triangles are supported");
        int idx = 0;
        try {
          idx = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kParse, "obj line " + std::to_string(line_no) + ": bad face index");
        }
        if (idx < 0) idx = static_cast<int>(mesh.vertices.size()) + idx + 1;
        f[count++] = idx - 1;
      }
      if (count != 3) throw Error(ErrorCode::kParse, "obj line " + std::to_string(line_no) + ": face needs 3 vertices");
      mesh.faces.push_back(f);
    }
  }
  for (const auto& f : mesh.faces)
    for (int i : f)
      if (i < 0 || i >= static_cast<int>(mesh.vertices.size()))
        throw Error(ErrorCode::kParse, "obj: face index out of range");
  return mesh;
}

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_obj(in);
}

inline void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.precision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

/// Subdivided icosahedron projected onto a sphere, outward winding.
inline TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(v.size());
  for (const Vec3& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.faces = std::move(f);
  return mesh;
}

}  // namespace gsr
