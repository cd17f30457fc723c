#include "gsr/rasterizer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace gsr;
using gsr::testing::max_abs_diff;
using gsr::testing::random_asset;
using gsr::testing::random_colors;

namespace {

Camera front_camera(int w, int h, double dist = 4.0) { return Camera::orbit(0.0, 0.0, dist, w, h); }

Splat isotropic_splat(const Vec3& pos, double sigma, double opacity) {
  Splat s;
  s.position = pos.cast<float>();
  s.scale = Vec3f::Constant(static_cast<float>(sigma));
  s.opacity = static_cast<float>(opacity);
  return s;
}

HeadAsset one_splat_asset(const Splat& s) {
  HeadAsset a;
  a.splats = {s};
  return a;
}

}  // namespace

TEST(ProjectSplat, IsotropicOnAxis) {
  const Camera cam = front_camera(64, 64);
  const auto g = project_splat(isotropic_splat(Vec3::Zero(), 0.1, 1.0), cam);
  ASSERT_TRUE(g.has_value());
  EXPECT_NEAR(g->cov(0, 0), g->cov(1, 1), 1e-6);
  EXPECT_NEAR(g->cov(0, 1), 0.0, 1e-6);
  EXPECT_NEAR(g->mean.x(), 32.0, 1e-9);
  EXPECT_NEAR(g->mean.y(), 32.0, 1e-9);
  // Independent check of the on-axis footprint: (fx sigma / z)^2.
  EXPECT_NEAR(g->cov_raw(0, 0), std::pow(cam.fx * 0.1 / 4.0, 2), 1e-6);  // float scale
}

TEST(ProjectSplat, BehindCameraCulled) {
  const Camera cam = front_camera(64, 64);
  EXPECT_FALSE(project_splat(isotropic_splat(Vec3(0, 0, 5), 0.1, 1.0), cam).has_value());
  EXPECT_FALSE(project_splat(isotropic_splat(Vec3(0, 0, 4), 0.1, 1.0), cam).has_value());
  // Far outside the frame.
  EXPECT_FALSE(project_splat(isotropic_splat(Vec3(50, 0, 0), 0.1, 1.0), cam).has_value());
}

TEST(ProjectSplat, CovarianceQuadraticInScale) {
  const Camera cam = Camera::orbit(20.0, 10.0, 4.0, 64, 64);
  Splat s = isotropic_splat(Vec3(0.2, -0.1, 0.3), 0.05, 0.8);
  s.scale = Vec3f(0.05f, 0.02f, 0.08f);
  s.rotation = Quatf(Eigen::AngleAxisf(0.7f, Vec3f(1, 2, 3).normalized()));
  const auto a = project_splat(s, cam);
  s.scale *= 2.0f;
  const auto b = project_splat(s, cam);
  ASSERT_TRUE(a && b);
  EXPECT_TRUE(b->cov_raw.isApprox(4.0 * a->cov_raw, 1e-6));
  // Dilated covariance stays symmetric positive definite.
  EXPECT_GT(a->cov.determinant(), 0.0);
  EXPECT_EQ(a->cov(0, 1), a->cov(1, 0));
}

TEST(Render, CenteredOpaqueSplatAlpha) {
  // 65x65 frame: the principal point (32.5, 32.5) is pixel (32, 32)'s center.
  const Camera cam = front_camera(65, 65);
  for (double o : {1.0, 0.6}) {
    const HeadAsset a = one_splat_asset(isotropic_splat(Vec3::Zero(), 0.05, o));
    const ImageBuffer img = render_with_colors(a, cam, std::vector<Vec3>{Vec3::Ones()});
    EXPECT_NEAR(img.alpha[32 * 65 + 32], std::min(o, 0.99), 1e-7);  // float opacity
  }
}

TEST(Render, EmptyLightGivesBlackWithCoverage) {
  const HeadAsset a = generate_sphere_asset(800, 1.0, Vec3::Constant(0.6), 0.4, 1);
  const Camera cam = front_camera(48, 48);
  const ImageBuffer img = render(a, cam, PointSet{{Vec3(0, 0, 1), Vec3::Zero()}});
  for (double v : img.rgb) EXPECT_EQ(v, 0.0);
  EXPECT_GT(*std::max_element(img.alpha.begin(), img.alpha.end()), 0.9);
}

TEST(Render, Deterministic) {
  const HeadAsset a = random_asset(3000, 4);
  const Camera cam = Camera::orbit(35.0, 15.0, 4.0, 96, 80);
  const PointSet lights{{Vec3(0.3, 0.5, 0.8).normalized(), Vec3(1.0, 0.9, 0.8)}};
  const ImageBuffer x = render(a, cam, lights), y = render(a, cam, lights);
  EXPECT_EQ(x.rgb, y.rgb);
  EXPECT_EQ(x.alpha, y.alpha);
}

TEST(Render, TiledMatchesBruteForce) {
  for (std::uint64_t seed : {1, 2}) {
    const HeadAsset a = random_asset(2000, seed);
    const Camera cam = Camera::orbit(10.0 * seed, 5.0, 3.5, 100, 72);
    const auto colors = random_colors(a.size(), seed);
    const ImageBuffer tiled = render_with_colors(a, cam, colors);
    const ImageBuffer brute = render_with_colors(a, cam, colors, {.material = {}, .brute_force = true});
    EXPECT_LT(max_abs_diff(tiled, brute), 1e-5);
    for (std::size_t i = 0; i < tiled.alpha.size(); ++i) EXPECT_NEAR(tiled.alpha[i], brute.alpha[i], 1e-5);
  }
}

TEST(Render, LinearInColors) {
  const HeadAsset a = random_asset(1500, 6);
  const Camera cam = Camera::orbit(-20.0, 10.0, 3.5, 64, 64);
  const auto c1 = random_colors(a.size(), 1), c2 = random_colors(a.size(), 2);
  const double s = 0.7, t = 1.9;
  std::vector<Vec3> mix(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) mix[k] = s * c1[k] + t * c2[k];
  const ImageBuffer i1 = render_with_colors(a, cam, c1), i2 = render_with_colors(a, cam, c2);
  const ImageBuffer im = render_with_colors(a, cam, mix);
  for (std::size_t i = 0; i < im.rgb.size(); ++i) EXPECT_NEAR(im.rgb[i], s * i1.rgb[i] + t * i2.rgb[i], 1e-6);
}

TEST(Render, OlatSuperposition) {
  const HeadAsset a = generate_sphere_asset(1500, 1.0, Vec3(0.8, 0.7, 0.6), 0.35, 2);
  const Camera cam = Camera::orbit(15.0, 10.0, 4.0, 64, 64);
  RandomLightConfig cfg{.subset_min = 4, .subset_max = 4, .intensity_lo = Vec3::Constant(0.5),
                        .intensity_hi = Vec3::Constant(1.5), .seed = 77};
  const PointSet all = sample_random_condition(cfg);
  ImageBuffer sum(cam.width, cam.height);
  for (const auto& l : all) {
    const ImageBuffer one = render(a, cam, PointSet{l});
    for (std::size_t i = 0; i < sum.rgb.size(); ++i) sum.rgb[i] += one.rgb[i];
  }
  EXPECT_LT(max_abs_diff(render(a, cam, all), sum), 1e-5);
}

TEST(NormalMap, SingleSplatPayload) {
  const Camera cam = front_camera(33, 33);
  Splat s = isotropic_splat(Vec3::Zero(), 0.1, 0.8);
  s.normal = Vec3f(0, 0, 1);
  const ImageBuffer nm = render_normal_map(one_splat_asset(s), cam);
  int covered = 0;
  for (int y = 0; y < 33; ++y)
    for (int x = 0; x < 33; ++x) {
      const double a = nm.alpha[y * 33 + x];
      if (a == 0.0) continue;
      ++covered;
      EXPECT_NEAR(nm.at(x, y, 0), 0.5 * a, 1e-12);
      EXPECT_NEAR(nm.at(x, y, 1), 0.5 * a, 1e-12);
      EXPECT_NEAR(nm.at(x, y, 2), 1.0 * a, 1e-12);
    }
  EXPECT_GT(covered, 10);
}

TEST(NormalMap, UniformNormalsFlatInsideFullCoverage) {
  // A dense opaque wall of splats facing the camera.
  HeadAsset a;
  for (int i = -20; i <= 20; ++i)
    for (int j = -20; j <= 20; ++j) {
      Splat s = isotropic_splat(Vec3(0.05 * i, 0.05 * j, 0.0), 0.04, 1.0);
      s.scale.z() = 0.004f;
      s.normal = Vec3f(0, 0, 1);
      a.splats.push_back(s);
    }
  const Camera cam = front_camera(40, 40);
  const ImageBuffer nm = render_normal_map(a, cam);
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 29; ++x) {
      ASSERT_GT(nm.alpha[y * 40 + x], 0.999);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(nm.at(x + 1, y, c), nm.at(x, y, c), 1e-3);
    }
}

TEST(NormalMap, SharesWeightsWithRender) {
  const HeadAsset a = random_asset(1000, 12);
  const Camera cam = Camera::orbit(40.0, -10.0, 3.5, 48, 48);
  const ImageBuffer nm = render_normal_map(a, cam);
  const ImageBuffer rc = render_with_colors(a, cam, random_colors(a.size(), 3));
  EXPECT_EQ(nm.alpha, rc.alpha);
}

TEST(WeightCache, ReconstructsRender) {
  const HeadAsset a = random_asset(2500, 8);
  const Camera cam = Camera::orbit(-30.0, 20.0, 3.5, 80, 64);
  const WeightCache cache = extract_weight_cache(a, cam);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto colors = random_colors(a.size(), seed);
    const ImageBuffer direct = render_with_colors(a, cam, colors);
    const ImageBuffer rec = cache.reconstruct(colors);
    EXPECT_LT(max_abs_diff(direct, rec), 1e-6);
  }
  // Weights telescope to the accumulated alpha.
  const ImageBuffer direct = render_with_colors(a, cam, random_colors(a.size(), 1));
  for (std::size_t p = 0; p < cache.pixel_count(); ++p) {
    double sum = 0.0;
    for (std::size_t e = cache.begin(p); e < cache.end(p); ++e) {
      EXPECT_GE(cache.weight[e], 0.0);
      EXPECT_LE(cache.weight[e], 1.0);
      sum += cache.weight[e];
    }
    EXPECT_NEAR(sum, direct.alpha[p], 1e-6);
    EXPECT_LE(sum, 1.0 + 1e-12);
  }
}

TEST(WeightCache, EmptyPixelsHaveEmptyLists) {
  const HeadAsset a = one_splat_asset(isotropic_splat(Vec3::Zero(), 0.05, 1.0));
  const Camera cam = front_camera(64, 64);
  const WeightCache cache = extract_weight_cache(a, cam);
  EXPECT_EQ(cache.begin(0), cache.end(0));
  EXPECT_GT(cache.end(32 * 64 + 32) - cache.begin(32 * 64 + 32), 0u);
}

TEST(Images, PfmRoundTrip) {
  ImageBuffer img(7, 5);
  Rng rng(2);
  for (double& v : img.rgb) v = static_cast<float>(rng.uniform(0.0, 10.0));
  const auto path = std::filesystem::temp_directory_path() / "gsr_test_rt.pfm";
  write_pfm(img, path.string());
  const ImageBuffer back = read_pfm(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.width, 7);
  ASSERT_EQ(back.height, 5);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST(Images, PngGammaRoundTrip) {
  ImageBuffer img(6, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) img.set_pixel(x, y, Vec3(x / 5.0, y / 3.0, 0.5));
  const ImageBuffer back = decode_png(encode_png(img));
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    // One 8-bit step in gamma space, mapped back to linear.
    const double g = std::pow(img.rgb[i], 1.0 / 2.2);
    const double tol = std::pow(std::min(1.0, g + 1.0 / 255.0), 2.2) - img.rgb[i] + 1e-12;
    EXPECT_NEAR(back.rgb[i], img.rgb[i], std::max(tol, 1e-6));
  }
  EXPECT_THROW(decode_png({1, 2, 3}), Error);
}

TEST(Images, EnvmapRotation) {
  EnvMap env(16, 4, false);
  env.set_pixel(3, 1, Vec3(1, 2, 3));
  const EnvMap quarter = rotate_envmap(env, kPi / 2.0);  // 4 columns
  EXPECT_EQ(quarter.pixel(7, 1), Vec3(1, 2, 3));
  EXPECT_EQ(quarter.pixel(3, 1), Vec3::Zero());
  const EnvMap full = rotate_envmap(env, 2.0 * kPi);
  EXPECT_EQ(full.rgb, env.rgb);
  // Rotating by +a moves the radiance at direction d to R_y(a) d.
  const Vec3 d = envmap_texel_direction(env, 3, 1);
  const Vec3 rotated = Eigen::AngleAxisd(kPi / 2.0, Vec3::UnitY()) * d;
  EXPECT_TRUE(rotated.isApprox(envmap_texel_direction(env, 7, 1), 1e-12));
}
