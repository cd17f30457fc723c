#pragma once

// Synthetic OLAT capture around a ground-truth asset: surround cameras with
// per-view rig lighting, and controlled perturbations of the relighting
// attributes.

#include "gsr/fit/fitter.hpp"

#include <vector>

namespace gsr {

/// n_views cameras on a Fibonacci sphere looking at the origin. Each view
/// carries its own light-stage rig: lights_per_view rig lights chosen at
/// random and expressed in that camera's frame, so every lit surface faces
/// some camera.
inline std::vector<Observation> surround_olat(const HeadAsset& truth, int n_views, int lights_per_view, int resolution,
                                              std::uint64_t seed, double distance = 4.5,
                                              double total_intensity = 3.0) {
  const auto rig = hemisphere_candidates(kRigLightCount);
  Rng rng(seed);
  std::vector<Observation> obs;
  obs.reserve(n_views);
  for (int v = 0; v < n_views; ++v) {
    const Vec3 d = fibonacci_sphere_point(v, n_views, 0.3);
    const Camera cam = Camera::look_at(distance * d, Vec3::Zero(), Vec3::UnitY(), resolution, resolution);
    const Vec3 right = cam.rotation.row(0).transpose();
    const Vec3 up = -cam.rotation.row(1).transpose();
    PointSet lights;
    for (int i : detail::sample_without_replacement(kRigLightCount, lights_per_view, rng)) {
      const Vec3& r = rig[i];
      lights.push_back({(r.x() * right + r.y() * up + r.z() * d).normalized(),
                        Vec3::Constant(total_intensity / lights_per_view)});
    }
    ImageBuffer img = render(truth, cam, lights);
    obs.push_back({cam, std::move(lights), std::move(img)});
  }
  return obs;
}

/// Tilts every normal by exactly angle_deg about a random tangent axis and
/// offsets every roughness (clamped to the valid range).
inline HeadAsset perturb_relight_attributes(const HeadAsset& truth, double angle_deg, double roughness_offset,
                                            std::uint64_t seed) {
  Rng rng(seed);
  HeadAsset out = truth;
  for (Splat& s : out.splats) {
    const Vec3 n = s.normal.cast<double>().normalized();
    Vec3 axis = n.cross(rng.unit_vector());
    while (axis.norm() < 1e-6) axis = n.cross(rng.unit_vector());
    s.normal = (Eigen::AngleAxisd(angle_deg * kPi / 180.0, axis.normalized()) * n).cast<float>();
    s.roughness = static_cast<float>(std::clamp(s.roughness + roughness_offset, kMinRoughness, 1.0));
  }
  return out;
}

}  // namespace gsr
