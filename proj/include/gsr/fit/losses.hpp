#pragma once

#include "gsr/common.hpp"
#include "gsr/fit/normals.hpp"
#include "gsr/image.hpp"
#include "gsr/scene.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsr {

namespace detail {
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                                               std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                               std::to_string(b.height) + ")");
}
}  // namespace detail

/// Anisotropic total variation: sum over pixels and rgb channels of
/// |I(x+1,y) - I(x,y)| + |I(x,y+1) - I(x,y)| (forward differences).
inline double loss_tv(const ImageBuffer& img) {
  double sum = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, c);
        if (x + 1 < img.width) sum += std::abs(img.at(x + 1, y, c) - v);
        if (y + 1 < img.height) sum += std::abs(img.at(x, y + 1, c) - v);
      }
    }
  }
  return sum;
}

/// Adds scale * d(loss_tv)/d(img) into grad (layout of img.rgb).
inline void add_tv_gradient(const ImageBuffer& img, double scale, std::span<double> grad) {
  const auto idx = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * img.width + x) * 3 + c; };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, c);
        if (x + 1 < img.width) {
          const double s = scale * detail::sign(img.at(x + 1, y, c) - v);
          grad[idx(x + 1, y, c)] += s;
          grad[idx(x, y, c)] -= s;
        }
        if (y + 1 < img.height) {
          const double s = scale * detail::sign(img.at(x, y + 1, c) - v);
          grad[idx(x, y + 1, c)] += s;
          grad[idx(x, y, c)] -= s;
        }
      }
    }
  }
}

/// Total variation of a rendered normal map.
inline double loss_normal_tv(const ImageBuffer& normal_map) { return loss_tv(normal_map); }

/// Total variation of a rendered rgb image.
inline double loss_tv_image(const ImageBuffer& pred) { return loss_tv(pred); }

/// Mean absolute error over all pixels and rgb channels.
inline double loss_image(const ImageBuffer& pred, const ImageBuffer& target) {
  detail::require_same_shape(pred, target, "loss_image");
  if (pred.rgb.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.rgb.size(); ++i) sum += std::abs(pred.rgb[i] - target.rgb[i]);
  return sum / static_cast<double>(pred.rgb.size());
}

inline void add_image_gradient(const ImageBuffer& pred, const ImageBuffer& target, double scale, std::span<double> grad) {
  const double k = scale / static_cast<double>(pred.rgb.size());
  for (std::size_t i = 0; i < pred.rgb.size(); ++i) grad[i] += k * detail::sign(pred.rgb[i] - target.rgb[i]);
}

// Multi-scale L1 pyramid. This is a stand-in for a learned perceptual loss,
// which needs a pretrained network: the mean of L1 errors between 2x, 4x
// and 8x average-pooled images (trailing rows/columns that do not fill a
// block are dropped).
inline constexpr int kPyramidLevels = 3;

namespace detail {
template <typename Fn>
void for_each_pyramid_block(const ImageBuffer& img, Fn&& fn) {
  for (int level = 1; level <= kPyramidLevels; ++level) {
    const int f = 1 << level;
    const int w = img.width / f, h = img.height / f;
    if (w == 0 || h == 0) continue;
    for (int by = 0; by < h; ++by)
      for (int bx = 0; bx < w; ++bx) fn(level, f, w, h, bx, by);
  }
}

inline double block_mean(const ImageBuffer& img, int f, int bx, int by, int c) {
  double s = 0.0;
  for (int y = by * f; y < (by + 1) * f; ++y)
    for (int x = bx * f; x < (bx + 1) * f; ++x) s += img.at(x, y, c);
  return s / (f * f);
}
}  // namespace detail

inline double loss_pyramid(const ImageBuffer& pred, const ImageBuffer& target) {
  detail::require_same_shape(pred, target, "loss_pyramid");
  double level_sum[kPyramidLevels + 1] = {};
  int level_blocks[kPyramidLevels + 1] = {};
  detail::for_each_pyramid_block(pred, [&](int level, int f, int w, int h, int bx, int by) {
    level_blocks[level] = w * h;
    for (int c = 0; c < 3; ++c)
      level_sum[level] += std::abs(detail::block_mean(pred, f, bx, by, c) - detail::block_mean(target, f, bx, by, c));
  });
  double total = 0.0;
  for (int l = 1; l <= kPyramidLevels; ++l)
    if (level_blocks[l] > 0) total += level_sum[l] / (3.0 * level_blocks[l]);
  return total / kPyramidLevels;
}

inline void add_pyramid_gradient(const ImageBuffer& pred, const ImageBuffer& target, double scale,
                                 std::span<double> grad) {
  detail::for_each_pyramid_block(pred, [&](int, int f, int w, int h, int bx, int by) {
    for (int c = 0; c < 3; ++c) {
      const double diff = detail::block_mean(pred, f, bx, by, c) - detail::block_mean(target, f, bx, by, c);
      const double g = scale * detail::sign(diff) / (kPyramidLevels * 3.0 * w * h * f * f);
      if (g == 0.0) continue;
      for (int y = by * f; y < (by + 1) * f; ++y)
        for (int x = bx * f; x < (bx + 1) * f; ++x) grad[(static_cast<std::size_t>(y) * pred.width + x) * 3 + c] += g;
    }
  });
}

// Sign patterns of every absolute-value argument. Two points with equal
// patterns lie in the same smooth piece of the L1 and TV terms.
inline void append_l1_signs(const ImageBuffer& pred, const ImageBuffer& target, std::vector<std::int8_t>& out) {
  for (std::size_t i = 0; i < pred.rgb.size(); ++i) out.push_back(static_cast<std::int8_t>(detail::sign(pred.rgb[i] - target.rgb[i])));
}

inline void append_pyramid_signs(const ImageBuffer& pred, const ImageBuffer& target, std::vector<std::int8_t>& out) {
  detail::for_each_pyramid_block(pred, [&](int, int f, int, int, int bx, int by) {
    for (int c = 0; c < 3; ++c)
      out.push_back(static_cast<std::int8_t>(
          detail::sign(detail::block_mean(pred, f, bx, by, c) - detail::block_mean(target, f, bx, by, c))));
  });
}

inline void append_tv_signs(const ImageBuffer& img, std::vector<std::int8_t>& out) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, c);
        if (x + 1 < img.width) out.push_back(static_cast<std::int8_t>(detail::sign(img.at(x + 1, y, c) - v)));
        if (y + 1 < img.height) out.push_back(static_cast<std::int8_t>(detail::sign(img.at(x, y + 1, c) - v)));
      }
}

/// Channel-variance regularizer on transport: (1/N) sum_k ||T_k - mean_c T_k||^2.
inline double loss_prt(const HeadAsset& asset) {
  if (asset.splats.empty()) return 0.0;
  const int w = asset.transport_width();
  double sum = 0.0;
  for (const Splat& s : asset.splats) {
    for (int i = 0; i < w; ++i) {
      const double m = (double(s.transport[i]) + s.transport[w + i] + s.transport[2 * w + i]) / 3.0;
      for (int c = 0; c < 3; ++c) {
        const double d = s.transport[c * w + i] - m;
        sum += d * d;
      }
    }
  }
  return sum / static_cast<double>(asset.splats.size());
}

/// Cosine distillation toward nearest-triangle normals:
/// (1/N) sum_k (1 - n_k . n_mesh_k).
inline double loss_normal_distill(std::span<const Vec3> normals, std::span<const Vec3> mesh_normals) {
  if (normals.size() != mesh_normals.size()) throw Error(ErrorCode::kShapeMismatch, "loss_normal_distill: size mismatch");
  if (normals.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < normals.size(); ++k) sum += 1.0 - normals[k].dot(mesh_normals[k]);
  return sum / static_cast<double>(normals.size());
}

inline double loss_normal_distill(const HeadAsset& asset, const MeshNormalField& field) {
  std::vector<Vec3> n, m;
  n.reserve(asset.splats.size());
  m.reserve(asset.splats.size());
  for (const Splat& s : asset.splats) {
    n.push_back(s.normal.cast<double>());
    m.push_back(field.nearest(s.position.cast<double>()).normal);
  }
  return loss_normal_distill(n, m);
}

}  // namespace gsr
