#pragma once

#include "gsr/common.hpp"
#include "gsr/image.hpp"

#include <array>
#include <span>
#include <vector>

namespace gsr {

inline constexpr int kMaxSHDegree = 3;
inline constexpr int kDefaultSHDegree = 2;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

inline void check_sh_degree(int degree) {
  if (degree < 0 || degree > kMaxSHDegree)
    throw Error(ErrorCode::kUnsupportedDegree, "SH degree " + std::to_string(degree) + " (supported: 0..3)");
}

/// Real SH coefficients, band-major (l = 0..s, m = -l..l).
struct SHVector {
  int degree = kDefaultSHDegree;
  std::vector<double> coeffs = std::vector<double>(sh_coeff_count(kDefaultSHDegree), 0.0);

  SHVector() = default;
  explicit SHVector(int d) : degree(d), coeffs(sh_coeff_count(d), 0.0) { check_sh_degree(d); }

  std::size_t size() const { return coeffs.size(); }
  double& operator[](std::size_t i) { return coeffs[i]; }
  double operator[](std::size_t i) const { return coeffs[i]; }

  SHVector& operator+=(const SHVector& o) {
    if (o.degree != degree) throw Error(ErrorCode::kDomain, "SH degree mismatch in +=");
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
    return *this;
  }
  SHVector& operator*=(double s) {
    for (double& c : coeffs) c *= s;
    return *this;
  }
};

/// One SH vector per color channel.
struct SHLightingRGB {
  std::array<SHVector, 3> channels;

  SHLightingRGB() = default;
  explicit SHLightingRGB(int degree) : channels{SHVector(degree), SHVector(degree), SHVector(degree)} {}

  int degree() const { return channels[0].degree; }

  SHLightingRGB& operator+=(const SHLightingRGB& o) {
    for (int c = 0; c < 3; ++c) channels[c] += o.channels[c];
    return *this;
  }
  SHLightingRGB& operator*=(double s) {
    for (auto& ch : channels) ch *= s;
    return *this;
  }
};

// Real SH constants, no Condon-Shortley phase:
//   l=0: Y00  = 1 / (2 sqrt(pi))
//   l=1: Y1m  = sqrt(3 / 4pi) * (y, z, x)
//   l=2: Y2-2 = sqrt(15 / 4pi) xy      Y2-1 = sqrt(15 / 4pi) yz
//        Y20  = sqrt(5 / 16pi)(3z^2 - 1)
//        Y21  = sqrt(15 / 4pi) xz      Y22  = sqrt(15 / 16pi)(x^2 - y^2)
//   l=3: Y3-3 = sqrt(35 / 32pi) y(3x^2 - y^2)   Y3-2 = sqrt(105 / 4pi) xyz
//        Y3-1 = sqrt(21 / 32pi) y(5z^2 - 1)     Y30  = sqrt(7 / 16pi) z(5z^2 - 3)
//        Y31  = sqrt(21 / 32pi) x(5z^2 - 1)     Y32  = sqrt(105 / 16pi) z(x^2 - y^2)
//        Y33  = sqrt(35 / 32pi) x(x^2 - 3y^2)
namespace sh_const {
inline constexpr double k00 = 0.28209479177387814;
inline constexpr double k1 = 0.48860251190291992;
inline constexpr double k2a = 1.0925484305920792;
inline constexpr double k20 = 0.31539156525252005;
inline constexpr double k22 = 0.54627421529603959;
inline constexpr double k33 = 0.59004358992664352;
inline constexpr double k32a = 2.8906114426405538;
inline constexpr double k31 = 0.45704579946446572;
inline constexpr double k30 = 0.37317633259011546;
inline constexpr double k32b = 1.4453057213202769;
}  // namespace sh_const

/// Writes Y_lm(x, y, z) for all bands up to degree into out. Assumes a unit
/// direction and out.size() >= (degree + 1)^2.
template <typename T>
void sh_eval(T x, T y, T z, int degree, std::span<T> out) {
  using namespace sh_const;
  out[0] = T(k00);
  if (degree < 1) return;
  out[1] = T(k1) * y;
  out[2] = T(k1) * z;
  out[3] = T(k1) * x;
  if (degree < 2) return;
  out[4] = T(k2a) * x * y;
  out[5] = T(k2a) * y * z;
  out[6] = T(k20) * (T(3) * z * z - T(1));
  out[7] = T(k2a) * x * z;
  out[8] = T(k22) * (x * x - y * y);
  if (degree < 3) return;
  out[9] = T(k33) * y * (T(3) * x * x - y * y);
  out[10] = T(k32a) * x * y * z;
  out[11] = T(k31) * y * (T(5) * z * z - T(1));
  out[12] = T(k30) * z * (T(5) * z * z - T(3));
  out[13] = T(k31) * x * (T(5) * z * z - T(1));
  out[14] = T(k32b) * z * (x * x - y * y);
  out[15] = T(k33) * x * (x * x - T(3) * y * y);
}

/// SH basis at dir. The direction is always normalized; *renormalized
/// reports inputs that were off unit length by more than 1e-6.
inline SHVector sh_basis(const Vec3& dir, int degree, bool* renormalized = nullptr) {
  check_sh_degree(degree);
  const double norm = dir.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorCode::kDomain, "sh_basis: zero or non-finite direction");
  const Vec3 d = dir / norm;
  if (renormalized) *renormalized = std::abs(norm - 1.0) > 1e-6;
  SHVector out(degree);
  sh_eval<double>(d.x(), d.y(), d.z(), degree, out.coeffs);
  return out;
}

inline double sh_dot(const SHVector& a, const SHVector& b) {
  if (a.degree != b.degree || a.size() != b.size())
    throw Error(ErrorCode::kDomain, "sh_dot: degree mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.coeffs[i] * b.coeffs[i];
  return s;
}

/// Directional light projection: channel c gets radiance[c] * Y(dir).
/// No solid-angle factor is applied.
inline SHLightingRGB project_delta_light(const Vec3& dir, const Vec3& radiance, int degree = kDefaultSHDegree) {
  if (!radiance.allFinite() || (radiance.array() < 0.0).any())
    throw Error(ErrorCode::kDomain, "project_delta_light: radiance must be finite and non-negative");
  const SHVector basis = sh_basis(dir, degree);
  SHLightingRGB out(degree);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < basis.size(); ++i) out.channels[c].coeffs[i] = radiance[c] * basis.coeffs[i];
  return out;
}

/// Riemann-sum projection of a lat-long map, texel solid angle
/// (2 pi / W)(pi / H) sin(theta).
inline SHLightingRGB project_envmap(const EnvMap& env, int degree = kDefaultSHDegree) {
  check_sh_degree(degree);
  if (env.empty()) throw Error(ErrorCode::kDomain, "project_envmap: empty map");
  if (env.width < 4 || env.height < 2)
    throw Error(ErrorCode::kDomain, "project_envmap: map must be at least 4x2");
  const int n = sh_coeff_count(degree);
  SHLightingRGB out(degree);
  std::array<double, 16> basis{};
  const double dphi = 2.0 * kPi / env.width;
  const double dtheta = kPi / env.height;
  for (int v = 0; v < env.height; ++v) {
    const double theta = (v + 0.5) * dtheta;
    const double d_omega = dphi * dtheta * std::sin(theta);
    for (int u = 0; u < env.width; ++u) {
      const Vec3 radiance = env.pixel(u, v);
      if (!radiance.allFinite() || (radiance.array() < 0.0).any())
        throw Error(ErrorCode::kDomain, "project_envmap: values must be finite and non-negative");
      const Vec3 d = envmap_direction(theta, (u + 0.5) * dphi);
      sh_eval<double>(d.x(), d.y(), d.z(), degree, std::span<double>(basis.data(), n));
      for (int c = 0; c < 3; ++c) {
        const double w = radiance[c] * d_omega;
        if (w == 0.0) continue;
        auto& coeffs = out.channels[c].coeffs;
        for (int i = 0; i < n; ++i) coeffs[i] += w * basis[i];
      }
    }
  }
  return out;
}

}  // namespace gsr
