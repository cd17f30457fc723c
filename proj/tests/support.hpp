#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "gsr/scene.hpp"

#include <vector>

namespace gsr::testing {

/// Random anisotropic splats inside a ball of the given radius, with random
/// relighting attributes (transport rows are perturbed Lambert kernels).
inline HeadAsset random_asset(int n, std::uint64_t seed, double radius = 1.0, double scale_lo = 0.02,
                              double scale_hi = 0.12) {
  Rng rng(seed);
  HeadAsset asset;
  asset.metadata = {"random", "random seed=" + std::to_string(seed), false};
  asset.splats.reserve(n);
  const int width = asset.transport_width();
  for (int k = 0; k < n; ++k) {
    Splat s;
    Vec3 p;
    do {
      p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (p.norm() > 1.0);
    s.position = (radius * p).cast<float>();
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    s.rotation = q.normalized().cast<float>();
    s.scale = Vec3(rng.uniform(scale_lo, scale_hi), rng.uniform(scale_lo, scale_hi), rng.uniform(scale_lo, scale_hi))
                  .cast<float>();
    s.opacity = static_cast<float>(rng.uniform(0.3, 1.0));
    s.albedo = Vec3(rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)).cast<float>();
    const Vec3 n = rng.unit_vector();
    s.normal = n.cast<float>();
    s.normal.normalize();
    s.roughness = static_cast<float>(rng.uniform(0.2, 0.9));
    const auto row = lambert_transport_row(n, asset.sh_degree);
    s.transport.resize(3 * width);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < width; ++i) s.transport[c * width + i] = static_cast<float>(row[i] * rng.uniform(0.7, 1.2));
    asset.splats.push_back(std::move(s));
  }
  validate_asset(asset);
  return asset;
}

inline std::vector<Vec3> random_colors(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> c(n);
  for (auto& v : c) v = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  return c;
}

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) m = std::max(m, std::abs(a.rgb[i] - b.rgb[i]));
  return m;
}

}  // namespace gsr::testing
