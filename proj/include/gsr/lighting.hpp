#pragma once

#include "gsr/common.hpp"
#include "gsr/image.hpp"
#include "gsr/sh.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace gsr {

/// Directional light; direction points from the surface toward the light.
struct PointLight {
  Vec3 direction = Vec3::UnitZ();
  Vec3 radiance = Vec3::Ones();
};

using PointSet = std::vector<PointLight>;

/// Environment lighting. Diffuse shading uses its SH projection; specular
/// uses specular_samples importance-sampled point lights drawn with seed.
struct EnvLight {
  EnvMap map;
  int specular_samples = 64;
  std::uint64_t seed = 0;
};

using LightCondition = std::variant<PointSet, SHLightingRGB, EnvLight>;

inline void validate_point_light(const PointLight& l) {
  if (!l.direction.allFinite() || std::abs(l.direction.norm() - 1.0) > 1e-6)
    throw Error(ErrorCode::kInvariantViolation, "light direction must be unit");
  if (!l.radiance.allFinite() || (l.radiance.array() < 0.0).any())
    throw Error(ErrorCode::kInvariantViolation, "light radiance must be finite and non-negative");
}

inline void validate_condition(const LightCondition& cond) {
  if (const auto* ps = std::get_if<PointSet>(&cond)) {
    for (const auto& l : *ps) validate_point_light(l);
  } else if (const auto* sh = std::get_if<SHLightingRGB>(&cond)) {
    check_sh_degree(sh->degree());
    for (const auto& ch : sh->channels) {
      if (ch.degree != sh->degree()) throw Error(ErrorCode::kInvariantViolation, "SH channels differ in degree");
      for (double c : ch.coeffs)
        if (!std::isfinite(c)) throw Error(ErrorCode::kInvariantViolation, "non-finite SH coefficient");
    }
  } else {
    const auto& env = std::get<EnvLight>(cond);
    if (env.map.empty()) throw Error(ErrorCode::kInvariantViolation, "empty environment map");
    for (double v : env.map.rgb)
      if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::kInvariantViolation, "environment map must be finite and non-negative");
    if (env.specular_samples < 1) throw Error(ErrorCode::kInvariantViolation, "specular_samples must be >= 1");
  }
}

/// Sum of delta projections of every light.
inline SHLightingRGB project_point_set(const PointSet& lights, int degree = kDefaultSHDegree) {
  SHLightingRGB sum(degree);
  for (const auto& l : lights) sum += project_delta_light(l.direction, l.radiance, degree);
  return sum;
}

/// Fibonacci lattice on the +z hemisphere (the asset's frontal side).
inline std::vector<Vec3> hemisphere_candidates(int n) {
  if (n < 1) throw Error(ErrorCode::kDomain, "hemisphere_candidates: n must be >= 1");
  static const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;  // uniform in (0, 1): equal-area bands
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = i * kGoldenAngle;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

struct RandomLightConfig {
  int n_candidates = 46;
  int subset_min = 1;
  int subset_max = 8;
  Vec3 intensity_lo = Vec3::Zero();
  Vec3 intensity_hi = Vec3::Ones();
  std::uint64_t seed = 0;
};

inline void validate_random_config(const RandomLightConfig& cfg) {
  if (!(1 <= cfg.subset_min && cfg.subset_min <= cfg.subset_max && cfg.subset_max <= cfg.n_candidates))
    throw Error(ErrorCode::kDomain, "random lights: need 1 <= subset_min <= subset_max <= n_candidates");
  if ((cfg.intensity_lo.array() < 0.0).any() || (cfg.intensity_lo.array() > cfg.intensity_hi.array()).any())
    throw Error(ErrorCode::kDomain, "random lights: need 0 <= lo <= hi per channel");
}

namespace detail {
/// First k entries of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) std::swap(idx[i], idx[rng.uniform_int(i, n - 1)]);
  idx.resize(k);
  return idx;
}
}  // namespace detail

/// Random subset of the frontal candidate rig with random RGB intensities.
inline PointSet sample_random_condition(const RandomLightConfig& cfg) {
  validate_random_config(cfg);
  Rng rng(cfg.seed);
  const auto candidates = hemisphere_candidates(cfg.n_candidates);
  const int count = static_cast<int>(rng.uniform_int(cfg.subset_min, cfg.subset_max));
  PointSet lights;
  for (int i : detail::sample_without_replacement(cfg.n_candidates, count, rng)) {
    Vec3 rad;
    for (int c = 0; c < 3; ++c) rad[c] = rng.uniform(cfg.intensity_lo[c], cfg.intensity_hi[c]);
    lights.push_back({candidates[i], rad});
  }
  return lights;
}

enum class OlatMode { kUniform, kDirection, kRandom10, kRandom20 };

inline OlatMode parse_olat_mode(const std::string& s) {
  if (s == "uniform") return OlatMode::kUniform;
  if (s == "direction") return OlatMode::kDirection;
  if (s == "random10") return OlatMode::kRandom10;
  if (s == "random20") return OlatMode::kRandom20;
  throw Error(ErrorCode::kParse, "unknown OLAT mode '" + s + "' (uniform, direction, random10, random20)");
}

inline const char* to_string(OlatMode m) {
  switch (m) {
    case OlatMode::kUniform: return "uniform";
    case OlatMode::kDirection: return "direction";
    case OlatMode::kRandom10: return "random10";
    case OlatMode::kRandom20: return "random20";
  }
  return "unknown";
}

inline constexpr int kRigLightCount = 46;
inline constexpr int kDirectionNeighbors = 4;

/// Lightstage protocols over a synthetic hemisphere rig of white unit lights.
///   uniform:   one condition with every light.
///   direction: one condition per light, the light plus its 4 nearest
///              neighbors (by angle, ties by index).
///   randomN:   random_conditions seeded subsets of N lights.
inline std::vector<PointSet> olat_protocol(OlatMode mode, int n_lights = kRigLightCount, std::uint64_t seed = 0,
                                           int random_conditions = 16) {
  const auto rig = hemisphere_candidates(n_lights);
  std::vector<PointSet> out;
  switch (mode) {
    case OlatMode::kUniform: {
      PointSet all;
      for (const Vec3& d : rig) all.push_back({d, Vec3::Ones()});
      out.push_back(std::move(all));
      break;
    }
    case OlatMode::kDirection: {
      const int k = std::min(kDirectionNeighbors, n_lights - 1);
      for (int i = 0; i < n_lights; ++i) {
        std::vector<int> others;
        for (int j = 0; j < n_lights; ++j)
          if (j != i) others.push_back(j);
        std::stable_sort(others.begin(), others.end(),
                         [&](int a, int b) { return rig[i].dot(rig[a]) > rig[i].dot(rig[b]); });
        PointSet set{{rig[i], Vec3::Ones()}};
        for (int j = 0; j < k; ++j) set.push_back({rig[others[j]], Vec3::Ones()});
        out.push_back(std::move(set));
      }
      break;
    }
    case OlatMode::kRandom10:
    case OlatMode::kRandom20: {
      const int size = std::min(mode == OlatMode::kRandom10 ? 10 : 20, n_lights);
      Rng rng(seed);
      for (int c = 0; c < random_conditions; ++c) {
        PointSet set;
        for (int i : detail::sample_without_replacement(n_lights, size, rng)) set.push_back({rig[i], Vec3::Ones()});
        out.push_back(std::move(set));
      }
      break;
    }
  }
  return out;
}

/// Importance-samples n directional lights from an environment map with
/// probability proportional to luminance * sin(theta) per texel. Each
/// light's radiance is the texel radiance times d_omega * W_total / (n w_t)
/// (w_t the texel weight), so summing the lights estimates the map's
/// cosine-weighted integrals without bias. An all-black map yields n
/// zero-radiance lights.
inline PointSet env_to_point_lights(const EnvMap& env, int n, std::uint64_t seed = 0) {
  if (n < 1) throw Error(ErrorCode::kDomain, "env_to_point_lights: n must be >= 1");
  if (env.empty()) throw Error(ErrorCode::kDomain, "env_to_point_lights: empty map");
  const std::size_t texels = env.pixel_count();
  std::vector<double> cdf(texels);
  double total = 0.0;
  for (int v = 0; v < env.height; ++v) {
    const double s = std::sin(kPi * (v + 0.5) / env.height);
    for (int u = 0; u < env.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * env.width + u;
      total += std::max(0.0, luminance(env.pixel(u, v))) * s;
      cdf[i] = total;
    }
  }
  PointSet lights;
  lights.reserve(n);
  if (!(total > 0.0)) {
    for (int i = 0; i < n; ++i) lights.push_back({Vec3::UnitY(), Vec3::Zero()});
    return lights;
  }
  const double d_omega_const = (2.0 * kPi / env.width) * (kPi / env.height);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double target = rng.uniform() * total;
    std::size_t t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    t = std::min(t, texels - 1);
    const int u = static_cast<int>(t % env.width);
    const int v = static_cast<int>(t / env.width);
    const double sin_theta = std::sin(kPi * (v + 0.5) / env.height);
    const double weight = luminance(env.pixel(u, v)) * sin_theta;
    const double scale = d_omega_const * sin_theta * total / (n * weight);
    lights.push_back({envmap_texel_direction(env, u, v), env.pixel(u, v) * scale});
  }
  return lights;
}

// ---------------------------------------------------------------------------
// Light files.

/// One light per line: "x y z r g b"; '#' starts a comment. Directions are
/// normalized.
inline PointSet parse_point_lights(std::istream& in) {
  PointSet lights;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v[6];
    int count = 0;
    while (count < 6 && ls >> v[count]) ++count;
    if (count == 0 && ls.eof()) continue;
    std::string rest;
    if (count != 6 || (ls >> rest))
      throw Error(ErrorCode::kParse, "light file line " + std::to_string(line_no) + ": expected 'x y z r g b'");
    Vec3 dir(v[0], v[1], v[2]);
    if (!(dir.norm() > 0.0)) throw Error(ErrorCode::kParse, "light file line " + std::to_string(line_no) + ": zero direction");
    PointLight l{dir.normalized(), Vec3(v[3], v[4], v[5])};
    if (!l.radiance.allFinite() || (l.radiance.array() < 0.0).any())
      throw Error(ErrorCode::kParse, "light file line " + std::to_string(line_no) + ": negative radiance");
    lights.push_back(l);
  }
  if (lights.empty()) throw Error(ErrorCode::kParse, "light file has no lights");
  return lights;
}

inline PointSet load_point_lights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_point_lights(in);
}

inline void save_point_lights(const PointSet& lights, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.precision(17);
  for (const auto& l : lights)
    out << l.direction.x() << " " << l.direction.y() << " " << l.direction.z() << " " << l.radiance.x() << " "
        << l.radiance.y() << " " << l.radiance.z() << "\n";
}

/// SH file: the degree, then 3 * (degree + 1)^2 coefficients, channel rows
/// r, g, b in band-major order.
inline SHLightingRGB parse_sh_lighting(std::istream& in) {
  int degree = -1;
  if (!(in >> degree)) throw Error(ErrorCode::kParse, "SH file: missing degree");
  check_sh_degree(degree);
  SHLightingRGB sh(degree);
  for (auto& ch : sh.channels)
    for (double& c : ch.coeffs)
      if (!(in >> c)) throw Error(ErrorCode::kParse, "SH file: expected " + std::to_string(3 * sh_coeff_count(degree)) + " coefficients");
  std::string rest;
  if (in >> rest) throw Error(ErrorCode::kParse, "SH file: trailing data");
  return sh;
}

inline SHLightingRGB load_sh_lighting(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_sh_lighting(in);
}

}  // namespace gsr
