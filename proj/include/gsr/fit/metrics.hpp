#pragma once

#include "gsr/common.hpp"
#include "gsr/fit/losses.hpp"
#include "gsr/image.hpp"

#include <vector>

namespace gsr {

inline constexpr double kPsnrCapDb = 100.0;

/// PSNR for images in [0, 1]; capped at 100 dB when MSE < 1e-10.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  detail::require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    se += d * d;
  }
  const double mse = a.rgb.empty() ? 0.0 : se / static_cast<double>(a.rgb.size());
  if (mse < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// data range 1. Averaged over valid window positions and rgb channels;
/// images smaller than the window use one window spanning the image.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  detail::require_same_shape(a, b, "ssim");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int win_x = std::min(11, a.width), win_y = std::min(11, a.height);
  if (win_x <= 0 || win_y <= 0) return 1.0;
  std::vector<double> kx(win_x), ky(win_y);
  auto fill = [](std::vector<double>& k) {
    const double center = 0.5 * (static_cast<double>(k.size()) - 1.0);
    double s = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) s += k[i] = std::exp(-0.5 * std::pow((i - center) / 1.5, 2));
    for (double& v : k) v /= s;
  };
  fill(kx);
  fill(ky);
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int oy = 0; oy + win_y <= a.height; ++oy) {
      for (int ox = 0; ox + win_x <= a.width; ++ox) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < win_y; ++y) {
          for (int x = 0; x < win_x; ++x) {
            const double w = kx[x] * ky[y];
            const double va = a.at(ox + x, oy + y, c), vb = b.at(ox + x, oy + y, c);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace gsr
