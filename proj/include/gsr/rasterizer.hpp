#pragma once

#include "gsr/common.hpp"
#include "gsr/image.hpp"
#include "gsr/lighting.hpp"
#include "gsr/scene.hpp"
#include "gsr/shading.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace gsr {

// Compositing constants (3DGS convention).
inline constexpr double kAlphaCeiling = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kCovarianceDilation = 0.3;  // px^2 on the diagonal
inline constexpr double kSupportPower = -4.5;       // 3-sigma ellipse: -0.5 * 3^2
inline constexpr double kNearPlane = 0.01;
inline constexpr int kTileSize = 16;

/// A splat projected to pixel space.
struct Projected2DGaussian {
  int index = 0;         // splat index in the asset
  Vec2 mean;             // pixel coordinates
  Mat2 cov_raw;          // J W Sigma W^T J^T before dilation
  Mat2 cov;              // after dilation
  double conic_a = 0.0;  // inverse covariance entries (a b; b c)
  double conic_b = 0.0;
  double conic_c = 0.0;
  double depth = 0.0;    // camera-space z of the mean
  double opacity = 0.0;
  double radius = 0.0;   // 3 sqrt(lambda_max), pixels
};

inline Mat3 splat_covariance(const Splat& s) {
  const Mat3 r = s.rotation.cast<double>().normalized().toRotationMatrix();
  const Vec3 sc = s.scale.cast<double>();
  return r * sc.cwiseProduct(sc).asDiagonal() * r.transpose();
}

/// Perspective projection of one splat (EWA splatting). Returns nullopt when
/// the mean is behind the near plane or the 3-sigma footprint misses the
/// frame.
inline std::optional<Projected2DGaussian> project_splat(const Splat& s, const Camera& cam, int index = 0) {
  const Vec3 p = cam.to_camera(s.position.cast<double>());
  if (!(p.z() > kNearPlane)) return std::nullopt;
  const double inv_z = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * inv_z, 0.0, -cam.fx * p.x() * inv_z * inv_z,  //
      0.0, cam.fy * inv_z, -cam.fy * p.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> jw = j * cam.rotation;
  Projected2DGaussian g;
  g.index = index;
  g.cov_raw = jw * splat_covariance(s) * jw.transpose();
  g.cov_raw(0, 1) = g.cov_raw(1, 0) = 0.5 * (g.cov_raw(0, 1) + g.cov_raw(1, 0));
  g.cov = g.cov_raw;
  g.cov(0, 0) += kCovarianceDilation;
  g.cov(1, 1) += kCovarianceDilation;
  const double det = g.cov(0, 0) * g.cov(1, 1) - g.cov(0, 1) * g.cov(0, 1);
  if (!(det > 0.0)) return std::nullopt;
  g.conic_a = g.cov(1, 1) / det;
  g.conic_b = -g.cov(0, 1) / det;
  g.conic_c = g.cov(0, 0) / det;
  const double mid = 0.5 * (g.cov(0, 0) + g.cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - det));
  g.radius = 3.0 * std::sqrt(lambda_max);
  g.mean = Vec2(cam.fx * p.x() * inv_z + cam.cx, cam.fy * p.y() * inv_z + cam.cy);
  g.depth = p.z();
  g.opacity = s.opacity;
  if (g.mean.x() + g.radius < 0.0 || g.mean.x() - g.radius > cam.width || g.mean.y() + g.radius < 0.0 ||
      g.mean.y() - g.radius > cam.height)
    return std::nullopt;
  return g;
}

/// Projects every splat and sorts front to back by depth, ties by index.
inline std::vector<Projected2DGaussian> project_asset(const HeadAsset& asset, const Camera& cam) {
  std::vector<Projected2DGaussian> out;
  out.reserve(asset.splats.size());
  for (std::size_t k = 0; k < asset.splats.size(); ++k)
    if (auto g = project_splat(asset.splats[k], cam, static_cast<int>(k))) out.push_back(*g);
  std::sort(out.begin(), out.end(), [](const Projected2DGaussian& a, const Projected2DGaussian& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });
  return out;
}

/// Surface-to-camera unit direction for a splat.
inline Vec3 view_direction(const Camera& cam, const Splat& s) {
  return (cam.center() - s.position.cast<double>()).normalized();
}

namespace detail {

/// Front-to-back compositing of one pixel over a depth-ordered candidate
/// list (indices into sorted). visit(j, weight) is called for every
/// contributing splat; returns the final transmittance.
template <typename Visit>
double composite_pixel(double sx, double sy, const std::vector<Projected2DGaussian>& sorted,
                       std::span<const std::uint32_t> candidates, Visit&& visit) {
  double transmittance = 1.0;
  for (const std::uint32_t j : candidates) {
    const Projected2DGaussian& g = sorted[j];
    const double dx = sx - g.mean.x();
    const double dy = sy - g.mean.y();
    const double power = -0.5 * (g.conic_a * dx * dx + g.conic_c * dy * dy) - g.conic_b * dx * dy;
    if (power < kSupportPower || power > 0.0) continue;
    const double alpha = std::min(kAlphaCeiling, g.opacity * std::exp(power));
    if (alpha < kMinAlpha) continue;
    const double next = transmittance * (1.0 - alpha);
    if (next < kTransmittanceCutoff) break;
    visit(j, alpha * transmittance);
    transmittance = next;
  }
  return transmittance;
}

/// Half extents of the axis-aligned box around the 3-sigma ellipse, with a
/// small margin for rounding in the conic.
inline Vec2 support_half_extent(const Projected2DGaussian& g) {
  const double k = std::sqrt(-2.0 * kSupportPower) * (1.0 + 1e-9);
  return Vec2(k * std::sqrt(g.cov(0, 0)) + 1e-9, k * std::sqrt(g.cov(1, 1)) + 1e-9);
}

/// CSR binning of sorted splats into square tiles; each tile list keeps the
/// global depth order.
struct TileBins {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::uint32_t> offsets;  // tiles_x * tiles_y + 1
  std::vector<std::uint32_t> entries;
};

inline TileBins bin_tiles(const std::vector<Projected2DGaussian>& sorted, int width, int height) {
  TileBins bins;
  bins.tiles_x = (width + kTileSize - 1) / kTileSize;
  bins.tiles_y = (height + kTileSize - 1) / kTileSize;
  const std::size_t n_tiles = static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y;
  auto tile_range = [&](const Projected2DGaussian& g, int& x0, int& x1, int& y0, int& y1) {
    const Vec2 h = support_half_extent(g);
    x0 = std::max(0, static_cast<int>(std::floor((g.mean.x() - h.x()) / kTileSize)));
    x1 = std::min(bins.tiles_x - 1, static_cast<int>(std::floor((g.mean.x() + h.x()) / kTileSize)));
    y0 = std::max(0, static_cast<int>(std::floor((g.mean.y() - h.y()) / kTileSize)));
    y1 = std::min(bins.tiles_y - 1, static_cast<int>(std::floor((g.mean.y() + h.y()) / kTileSize)));
  };
  std::vector<std::uint32_t> counts(n_tiles + 1, 0);
  for (const auto& g : sorted) {
    int x0, x1, y0, y1;
    tile_range(g, x0, x1, y0, y1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx + 1];
  }
  for (std::size_t t = 0; t < n_tiles; ++t) counts[t + 1] += counts[t];
  bins.offsets = counts;
  bins.entries.resize(bins.offsets.back());
  std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
  for (std::uint32_t j = 0; j < sorted.size(); ++j) {
    int x0, x1, y0, y1;
    tile_range(sorted[j], x0, x1, y0, y1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) bins.entries[cursor[static_cast<std::size_t>(ty) * bins.tiles_x + tx]++] = j;
  }
  return bins;
}

/// Front-to-back compositing of every pixel. visit(pixel, j, weight) is
/// called per contributing splat in depth order, finish(pixel,
/// transmittance) once per pixel. The tiled path walks each tile's list once
/// and touches only the pixels inside each splat's support box; brute force
/// runs composite_pixel over all splats.
template <typename Visit, typename Finish>
void composite_all(const std::vector<Projected2DGaussian>& sorted, int width, int height, bool brute_force,
                   unsigned threads, Visit&& visit, Finish&& finish) {
  if (brute_force) {
    std::vector<std::uint32_t> all(sorted.size());
    std::iota(all.begin(), all.end(), 0u);
    parallel_for(
        static_cast<std::size_t>(height),
        [&](std::size_t y) {
          for (int x = 0; x < width; ++x) {
            const std::size_t p = y * width + x;
            const double t = composite_pixel(x + 0.5, y + 0.5, sorted, std::span<const std::uint32_t>(all),
                                             [&](std::uint32_t j, double w) { visit(p, j, w); });
            finish(p, t);
          }
        },
        threads);
    return;
  }
  const TileBins bins = bin_tiles(sorted, width, height);
  parallel_for(
      static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y,
      [&](std::size_t t) {
        const int tx = static_cast<int>(t % bins.tiles_x);
        const int ty = static_cast<int>(t / bins.tiles_x);
        const int x_begin = tx * kTileSize, y_begin = ty * kTileSize;
        const int x_end = std::min(width, x_begin + kTileSize);
        const int y_end = std::min(height, y_begin + kTileSize);
        std::array<double, kTileSize * kTileSize> transmittance;
        std::array<bool, kTileSize * kTileSize> done{};
        transmittance.fill(1.0);
        int open = (x_end - x_begin) * (y_end - y_begin);
        for (std::uint32_t e = bins.offsets[t]; e < bins.offsets[t + 1] && open > 0; ++e) {
          const std::uint32_t j = bins.entries[e];
          const Projected2DGaussian& g = sorted[j];
          const Vec2 h = support_half_extent(g);
          const int x0 = std::max(x_begin, static_cast<int>(std::ceil(g.mean.x() - h.x() - 0.5)));
          const int x1 = std::min(x_end - 1, static_cast<int>(std::floor(g.mean.x() + h.x() - 0.5)));
          const int y0 = std::max(y_begin, static_cast<int>(std::ceil(g.mean.y() - h.y() - 0.5)));
          const int y1 = std::min(y_end - 1, static_cast<int>(std::floor(g.mean.y() + h.y() - 0.5)));
          for (int y = y0; y <= y1; ++y) {
            const double dy = y + 0.5 - g.mean.y();
            for (int x = x0; x <= x1; ++x) {
              const int local = (y - y_begin) * kTileSize + (x - x_begin);
              if (done[local]) continue;
              const double dx = x + 0.5 - g.mean.x();
              const double power = -0.5 * (g.conic_a * dx * dx + g.conic_c * dy * dy) - g.conic_b * dx * dy;
              if (power < kSupportPower || power > 0.0) continue;
              const double alpha = std::min(kAlphaCeiling, g.opacity * std::exp(power));
              if (alpha < kMinAlpha) continue;
              const double next = transmittance[local] * (1.0 - alpha);
              if (next < kTransmittanceCutoff) {
                done[local] = true;
                --open;
                continue;
              }
              visit(static_cast<std::size_t>(y) * width + x, j, alpha * transmittance[local]);
              transmittance[local] = next;
            }
          }
        }
        for (int y = y_begin; y < y_end; ++y)
          for (int x = x_begin; x < x_end; ++x)
            finish(static_cast<std::size_t>(y) * width + x, transmittance[(y - y_begin) * kTileSize + (x - x_begin)]);
      },
      threads);
}

}  // namespace detail

struct RenderOptions {
  MaterialConstants material;
  bool brute_force = false;  // all splats against all pixels, no tiling
  unsigned threads = 0;      // 0: worker_count()
};

/// Composites per-splat payloads (indexed by asset splat index) with fixed
/// geometry. Black background.
inline ImageBuffer composite(const std::vector<Projected2DGaussian>& sorted, std::span<const Vec3> payload,
                             const Camera& cam, const RenderOptions& opts = {}) {
  ImageBuffer img(cam.width, cam.height);
  std::vector<Vec3> ordered(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) ordered[j] = payload[sorted[j].index];
  std::vector<Vec3> acc(static_cast<std::size_t>(cam.width) * cam.height, Vec3::Zero());
  detail::composite_all(
      sorted, cam.width, cam.height, opts.brute_force, opts.threads,
      [&](std::size_t p, std::uint32_t j, double w) { acc[p] += w * ordered[j]; },
      [&](std::size_t p, double t) {
        img.set_pixel(static_cast<int>(p % cam.width), static_cast<int>(p / cam.width), acc[p]);
        img.alpha[p] = 1.0 - t;
      });
  return img;
}

/// Renders with caller-supplied per-splat colors (no shading, no clamping).
inline ImageBuffer render_with_colors(const HeadAsset& asset, const Camera& cam, std::span<const Vec3> colors,
                                      const RenderOptions& opts = {}) {
  if (colors.size() != asset.splats.size()) throw Error(ErrorCode::kDomain, "one color per splat required");
  return composite(project_asset(asset, cam), colors, cam, opts);
}

/// Shaded colors of the visible splats. Small negative values from SH
/// ringing are composited as is; display encoding clamps them.
inline std::vector<Vec3> shade_visible(const HeadAsset& asset, const Camera& cam,
                                       const std::vector<Projected2DGaussian>& sorted, const PreparedLight& light,
                                       const MaterialConstants& material) {
  std::vector<Vec3> colors(asset.splats.size(), Vec3::Zero());
  const Vec3 eye = cam.center();
  parallel_for(sorted.size(), [&](std::size_t j) {
    const Splat& s = asset.splats[sorted[j].index];
    const Vec3 w_o = (eye - s.position.cast<double>()).normalized();
    colors[sorted[j].index] = shade(s, light, w_o, material).rgb;
  });
  return colors;
}

inline ImageBuffer render(const HeadAsset& asset, const Camera& cam, const PreparedLight& light,
                          const RenderOptions& opts = {}) {
  const auto sorted = project_asset(asset, cam);
  const auto colors = shade_visible(asset, cam, sorted, light, opts.material);
  return composite(sorted, colors, cam, opts);
}

inline ImageBuffer render(const HeadAsset& asset, const Camera& cam, const LightCondition& cond,
                          const RenderOptions& opts = {}) {
  return render(asset, cam, prepare_light(cond, asset.sh_degree), opts);
}

/// Normal map: composites (n + 1) / 2 with the same weights as render().
inline ImageBuffer render_normal_map(const HeadAsset& asset, const Camera& cam, const RenderOptions& opts = {}) {
  std::vector<Vec3> payload(asset.splats.size());
  for (std::size_t k = 0; k < asset.splats.size(); ++k)
    payload[k] = 0.5 * (asset.splats[k].normal.cast<double>() + Vec3::Ones());
  return composite(project_asset(asset, cam), payload, cam, opts);
}

/// Per-pixel compositing weights w_pk = alpha_k(p) prod_{j<k} (1 - alpha_j(p))
/// for a fixed camera and geometry, in compositing order (CSR layout).
struct WeightCache {
  int width = 0, height = 0;
  std::vector<std::uint32_t> offsets;  // width * height + 1
  std::vector<std::uint32_t> splat;    // asset splat index
  std::vector<double> weight;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t begin(std::size_t pixel) const { return offsets[pixel]; }
  std::size_t end(std::size_t pixel) const { return offsets[pixel + 1]; }

  /// sum_k w_pk c_k per pixel, in compositing order.
  ImageBuffer reconstruct(std::span<const Vec3> colors) const {
    ImageBuffer img(width, height);
    for (std::size_t p = 0; p < pixel_count(); ++p) {
      Vec3 c = Vec3::Zero();
      double a = 0.0;
      for (std::size_t e = begin(p); e < end(p); ++e) {
        c += weight[e] * colors[splat[e]];
        a += weight[e];
      }
      img.set_pixel(static_cast<int>(p % width), static_cast<int>(p / width), c);
      img.alpha[p] = a;
    }
    return img;
  }
};

inline WeightCache extract_weight_cache(const HeadAsset& asset, const Camera& cam, const RenderOptions& opts = {}) {
  const auto sorted = project_asset(asset, cam);
  const std::size_t n_pixels = static_cast<std::size_t>(cam.width) * cam.height;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> per_pixel(n_pixels);
  detail::composite_all(
      sorted, cam.width, cam.height, opts.brute_force, opts.threads,
      [&](std::size_t p, std::uint32_t j, double w) {
        per_pixel[p].emplace_back(static_cast<std::uint32_t>(sorted[j].index), w);
      },
      [](std::size_t, double) {});
  WeightCache cache;
  cache.width = cam.width;
  cache.height = cam.height;
  cache.offsets.resize(n_pixels + 1, 0);
  for (std::size_t p = 0; p < n_pixels; ++p)
    cache.offsets[p + 1] = cache.offsets[p] + static_cast<std::uint32_t>(per_pixel[p].size());
  cache.splat.reserve(cache.offsets.back());
  cache.weight.reserve(cache.offsets.back());
  for (const auto& px : per_pixel) {
    for (const auto& [k, w] : px) {
      cache.splat.push_back(k);
      cache.weight.push_back(w);
    }
  }
  return cache;
}

}  // namespace gsr
