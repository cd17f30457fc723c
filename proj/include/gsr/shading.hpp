#pragma once

#include "gsr/common.hpp"
#include "gsr/dual.hpp"
#include "gsr/lighting.hpp"
#include "gsr/scene.hpp"
#include "gsr/sh.hpp"

#include <array>
#include <variant>

namespace gsr {

inline constexpr double kMinRoughness = 0.01;

// The microfacet terms are templated on the scalar so the fitter can run
// them on Dual numbers for exact derivatives w.r.t. normal and roughness.

template <typename T>
T clamp01(const T& x) {
  if (x < T(0.0)) return T(0.0);
  if (x > T(1.0)) return T(1.0);
  return x;
}

/// Trowbridge-Reitz GGX: alpha^2 / (pi ((n.h)^2 (alpha^2 - 1) + 1)^2),
/// alpha = sigma^2, sigma floored at 0.01.
template <typename T>
T ggx_D(const T& n_dot_h, const T& roughness) {
  const T nh = clamp01(n_dot_h);
  const T sigma = roughness < T(kMinRoughness) ? T(kMinRoughness) : roughness;
  const T alpha = sigma * sigma;
  const T a2 = alpha * alpha;
  const T denom = nh * nh * (a2 - T(1.0)) + T(1.0);
  return a2 / (T(kPi) * denom * denom);
}

/// Schlick: F0 + (1 - F0)(1 - max(o.h, 0))^5.
template <typename T>
T fresnel_schlick(const T& o_dot_h, double f0) {
  const T c = o_dot_h < T(0.0) ? T(0.0) : o_dot_h;
  const T m = T(1.0) - c;
  const T m2 = m * m;
  return T(f0) + T(1.0 - f0) * m2 * m2 * m;
}

/// Smith G1 for GGX: 2x / (x + sqrt(alpha^2 + (1 - alpha^2) x^2)).
template <typename T>
T smith_G1(const T& n_dot_x, const T& alpha) {
  const T x = clamp01(n_dot_x);
  if (!(x > T(0.0))) return T(0.0);
  const T a2 = alpha * alpha;
  return T(2.0) * x / (x + sqrt(a2 + (T(1.0) - a2) * x * x));
}

/// Separable Smith masking-shadowing G1(n.i) G1(n.o), alpha = sigma^2.
template <typename T>
T smith_G(const T& n_dot_i, const T& n_dot_o, const T& roughness) {
  const T sigma = roughness < T(kMinRoughness) ? T(kMinRoughness) : roughness;
  const T alpha = sigma * sigma;
  return smith_G1(n_dot_i, alpha) * smith_G1(n_dot_o, alpha);
}

template <typename T>
T dot3(const std::array<T, 3>& n, const Vec3& w) {
  return n[0] * T(w.x()) + n[1] * T(w.y()) + n[2] * T(w.z());
}

/// Cook-Torrance reflectance times the clamped cosine, f(w_i, w_o, n) max(n.w_i, 0).
/// Zero when either side is back-facing or the halfway vector degenerates.
template <typename T>
T specular_cosine_term(const Vec3& w_i, const Vec3& w_o, const std::array<T, 3>& n, const T& roughness, double f0) {
  const T n_i = dot3(n, w_i);
  const T n_o = dot3(n, w_o);
  if (!(n_i > T(0.0)) || !(n_o > T(0.0))) return T(0.0);
  const Vec3 sum = w_i + w_o;
  const double len = sum.norm();
  if (len < 1e-12) return T(0.0);
  const Vec3 h = sum / len;
  const T d = ggx_D(dot3(n, h), roughness);
  const T f = fresnel_schlick(T(w_o.dot(h)), f0);
  const T g = smith_G(n_i, n_o, roughness);
  // D F G / (4 (n.i)(n.o)) * (n.i)
  return d * f * g / (T(4.0) * n_o);
}

/// Cook-Torrance specular BRDF D F G / (4 (n.w_i)(n.w_o)).
inline double specular_brdf(const Vec3& w_i, const Vec3& w_o, const Vec3& n, double roughness, double f0 = 0.04) {
  const double n_i = n.dot(w_i);
  if (!(n_i > 0.0)) return 0.0;
  const std::array<double, 3> na{n.x(), n.y(), n.z()};
  return specular_cosine_term(w_i, w_o, na, roughness, f0) / n_i;
}

/// Diffuse PRT: per channel albedo[c] * <T_c, L_c>.
inline Vec3 diffuse_prt(const Splat& s, const SHLightingRGB& light) {
  const int width = sh_coeff_count(light.degree());
  if (s.transport.size() != static_cast<std::size_t>(3 * width))
    throw Error(ErrorCode::kDomain, "diffuse_prt: transport width does not match lighting degree");
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    const auto& l = light.channels[c].coeffs;
    double acc = 0.0;
    for (int i = 0; i < width; ++i) acc += static_cast<double>(s.transport[c * width + i]) * l[i];
    out[c] = static_cast<double>(s.albedo[c]) * acc;
  }
  return out;
}

/// Specular sum over point lights: sum_i f(w_i, w_o, n) max(n.w_i, 0) I_i.
inline Vec3 specular_sum(const Splat& s, const PointSet& lights, const Vec3& w_o, double f0 = 0.04) {
  const Vec3 u = unit_vector(s.normal.x(), s.normal.y(), s.normal.z());  // float storage is unit only to ~1e-7
  const std::array<double, 3> n{u.x(), u.y(), u.z()};
  const double roughness = s.roughness;
  Vec3 out = Vec3::Zero();
  for (const auto& l : lights) {
    const double k = specular_cosine_term(l.direction, w_o, n, roughness, f0);
    if (k != 0.0) out += k * l.radiance;
  }
  return out;
}

/// A light condition reduced to what shading consumes: SH lighting for the
/// diffuse term and point lights for the specular term.
struct PreparedLight {
  SHLightingRGB sh;
  PointSet specular_lights;
  bool has_specular = true;
};

inline PreparedLight prepare_light(const LightCondition& cond, int sh_degree = kDefaultSHDegree) {
  validate_condition(cond);
  PreparedLight p;
  if (const auto* ps = std::get_if<PointSet>(&cond)) {
    p.sh = project_point_set(*ps, sh_degree);
    p.specular_lights = *ps;
  } else if (const auto* sh = std::get_if<SHLightingRGB>(&cond)) {
    if (sh->degree() != sh_degree) throw Error(ErrorCode::kDomain, "SH lighting degree does not match the asset");
    p.sh = *sh;
    p.has_specular = false;
  } else {
    const auto& env = std::get<EnvLight>(cond);
    p.sh = project_envmap(env.map, sh_degree);
    p.specular_lights = env_to_point_lights(env.map, env.specular_samples, env.seed);
  }
  return p;
}

struct ShadeResult {
  Vec3 rgb = Vec3::Zero();
  bool specular_evaluated = true;  // false for SH-only lighting
};

/// Diffuse PRT plus Cook-Torrance specular. Values may be slightly negative
/// from SH ringing.
inline ShadeResult shade(const Splat& s, const PreparedLight& light, const Vec3& w_o,
                         const MaterialConstants& material = {}) {
  ShadeResult r;
  r.rgb = diffuse_prt(s, light.sh);
  if (light.has_specular) r.rgb += specular_sum(s, light.specular_lights, w_o, material.f0);
  r.specular_evaluated = light.has_specular;
  return r;
}

inline ShadeResult shade(const Splat& s, const LightCondition& cond, const Vec3& w_o, int sh_degree = kDefaultSHDegree,
                         const MaterialConstants& material = {}) {
  return shade(s, prepare_light(cond, sh_degree), w_o, material);
}

}  // namespace gsr
