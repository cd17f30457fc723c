#pragma once

#include "gsr/common.hpp"
#include "gsr/dual.hpp"
#include "gsr/fit/losses.hpp"
#include "gsr/fit/normals.hpp"
#include "gsr/image.hpp"
#include "gsr/lighting.hpp"
#include "gsr/rasterizer.hpp"
#include "gsr/scene.hpp"
#include "gsr/shading.hpp"

#include <functional>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsr {

/// Stage-2 loss weights. Defaults are the published Stage-2 values; the
/// perceptual slot weights the multi-scale L1 pyramid stand-in.
struct LossWeights {
  double image = 0.1;
  double perceptual = 1.0;
  double tv_image = 1.0;
  double prt = 10.0;
  double normal_distill = 1.0;
  double normal_tv = 10.0;

  static LossWeights zero() { return {0, 0, 0, 0, 0, 0}; }
};

struct FreeAttributes {
  bool normal = true;
  bool roughness = true;
  bool transport = true;
  bool albedo = false;  // produced by the frozen base branch
};

struct FitConfig {
  int iterations = 2000;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  FreeAttributes free;
};

/// One supervision image: camera, lighting and the observed radiance.
struct Observation {
  Camera camera;
  LightCondition condition;
  ImageBuffer image;
};

struct LossTerms {
  double image = 0.0;
  double perceptual = 0.0;
  double tv_image = 0.0;
  double prt = 0.0;
  double normal_distill = 0.0;
  double normal_tv = 0.0;
  double total = 0.0;
};

/// Flat double-precision copy of the relighting attributes, one block per
/// splat: normal(3) roughness(1) albedo(3) transport(3 * width).
class RelightParams {
 public:
  static constexpr int kNormal = 0;
  static constexpr int kRoughness = 3;
  static constexpr int kAlbedo = 4;
  static constexpr int kTransport = 7;

  explicit RelightParams(const HeadAsset& asset)
      : splats_(asset.splats.size()), width_(asset.transport_width()), stride_(kTransport + 3 * width_) {
    values.resize(splats_ * stride_);
    for (std::size_t k = 0; k < splats_; ++k) {
      const Splat& s = asset.splats[k];
      double* b = block(k);
      for (int i = 0; i < 3; ++i) b[kNormal + i] = s.normal[i];
      b[kRoughness] = s.roughness;
      for (int i = 0; i < 3; ++i) b[kAlbedo + i] = s.albedo[i];
      for (int i = 0; i < 3 * width_; ++i) b[kTransport + i] = s.transport[i];
    }
  }

  std::size_t splat_count() const { return splats_; }
  int transport_width() const { return width_; }
  int stride() const { return stride_; }
  double* block(std::size_t k) { return values.data() + k * stride_; }
  const double* block(std::size_t k) const { return values.data() + k * stride_; }
  Vec3 normal(std::size_t k) const { return {block(k)[0], block(k)[1], block(k)[2]}; }
  /// The losses see only the direction of the stored normal.
  Vec3 unit_normal(std::size_t k) const {
    const double* b = block(k);
    return unit_vector(b[0], b[1], b[2]);
  }

  /// True for entries the optimizer may change.
  std::vector<bool> free_mask(const FreeAttributes& f) const {
    std::vector<bool> mask(values.size(), false);
    for (std::size_t k = 0; k < splats_; ++k) {
      const std::size_t o = k * stride_;
      for (int i = 0; i < 3; ++i) mask[o + kNormal + i] = f.normal;
      mask[o + kRoughness] = f.roughness;
      for (int i = 0; i < 3; ++i) mask[o + kAlbedo + i] = f.albedo;
      for (int i = 0; i < 3 * width_; ++i) mask[o + kTransport + i] = f.transport;
    }
    return mask;
  }

  /// Copies the free attributes into asset (geometry is never touched).
  void write_to(HeadAsset& asset, const FreeAttributes& f) const {
    for (std::size_t k = 0; k < splats_; ++k) {
      Splat& s = asset.splats[k];
      const double* b = block(k);
      if (f.normal) s.normal = Vec3(b[0], b[1], b[2]).normalized().cast<float>();
      if (f.roughness) s.roughness = static_cast<float>(std::clamp(b[kRoughness], kMinRoughness, 1.0));
      if (f.albedo)
        for (int i = 0; i < 3; ++i) s.albedo[i] = static_cast<float>(std::clamp(b[kAlbedo + i], 0.0, 1.0));
      if (f.transport)
        for (int i = 0; i < 3 * width_; ++i) s.transport[i] = static_cast<float>(b[kTransport + i]);
    }
  }

  std::vector<double> values;

 private:
  std::size_t splats_;
  int width_;
  int stride_;
};

/// The Stage-2 objective on frozen geometry. Compositing weights are
/// extracted once per distinct camera, so every image is linear in the
/// per-splat colors and gradients flow through the weight lists.
///
/// Image terms are per-entry means: L1 and pyramid by construction, and the
/// TV sums divided by the number of rgb entries.
class Stage2Problem {
 public:
  Stage2Problem(const HeadAsset& geometry, std::vector<Observation> observations, const LossWeights& weights,
                const MeshNormalField* mesh = nullptr, const MaterialConstants& material = {})
      : splat_count_(geometry.splats.size()), width_(geometry.transport_width()), weights_(weights),
        material_(material) {
    validate_asset(geometry);
    if (weights.normal_distill > 0.0 && mesh == nullptr)
      throw Error(ErrorCode::kDomain, "normal distillation weight is set but no mesh was supplied");
    for (auto& o : observations) {
      validate_camera(o.camera);
      if (o.image.width != o.camera.width || o.image.height != o.camera.height)
        throw Error(ErrorCode::kShapeMismatch, "observation image does not match its camera resolution");
      std::size_t view = views_.size();
      for (std::size_t v = 0; v < views_.size(); ++v)
        if (views_[v].camera == o.camera) view = v;
      if (view == views_.size()) views_.push_back(make_view(geometry, o.camera));
      obs_.push_back({view, prepare_light(o.condition, geometry.sh_degree), std::move(o.image)});
    }
    if (mesh && weights.normal_distill > 0.0) {
      mesh_normals_.reserve(splat_count_);
      for (const Splat& s : geometry.splats) mesh_normals_.push_back(mesh->nearest(s.position.cast<double>()).normal);
    }
  }

  std::size_t observation_count() const { return obs_.size(); }
  std::size_t view_count() const { return views_.size(); }
  const WeightCache& cache(std::size_t view) const { return views_[view].cache; }
  const LossWeights& weights() const { return weights_; }

  /// Loss terms at params; when grad is non-null it receives the gradient
  /// w.r.t. every entry of params.values (free or not).
  LossTerms evaluate(const RelightParams& params, std::vector<double>* grad) const {
    LossTerms terms;
    const std::size_t n_params = params.values.size();
    if (grad) grad->assign(n_params, 0.0);

    // Image terms, averaged over observations.
    std::vector<LossTerms> per_obs(obs_.size());
    std::vector<std::vector<double>> obs_grad(grad ? obs_.size() : 0);
    parallel_for(obs_.size(), [&](std::size_t o) {
      per_obs[o] = image_terms(params, o, grad ? &obs_grad[o] : nullptr);
    });
    const double inv_obs = obs_.empty() ? 0.0 : 1.0 / static_cast<double>(obs_.size());
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      terms.image += per_obs[o].image * inv_obs;
      terms.perceptual += per_obs[o].perceptual * inv_obs;
      terms.tv_image += per_obs[o].tv_image * inv_obs;
      if (grad)
        for (std::size_t i = 0; i < n_params; ++i) (*grad)[i] += obs_grad[o][i];
    }

    // Normal-map TV, averaged over distinct cameras.
    if (weights_.normal_tv > 0.0 && !views_.empty()) {
      const double inv_views = 1.0 / static_cast<double>(views_.size());
      for (std::size_t v = 0; v < views_.size(); ++v)
        terms.normal_tv += normal_tv_term(params, v, weights_.normal_tv * inv_views, grad) * inv_views;
    }

    // Per-splat regularizers.
    const double inv_n = 1.0 / static_cast<double>(splat_count_);
    const int tw = width_;
    for (std::size_t k = 0; k < splat_count_; ++k) {
      const double* b = params.block(k);
      if (weights_.prt > 0.0) {
        for (int i = 0; i < tw; ++i) {
          const double m = (b[RelightParams::kTransport + i] + b[RelightParams::kTransport + tw + i] +
                            b[RelightParams::kTransport + 2 * tw + i]) / 3.0;
          for (int c = 0; c < 3; ++c) {
            const double d = b[RelightParams::kTransport + c * tw + i] - m;
            terms.prt += d * d * inv_n;
            if (grad) (*grad)[k * params.stride() + RelightParams::kTransport + c * tw + i] += weights_.prt * 2.0 * d * inv_n;
          }
        }
      }
      if (weights_.normal_distill > 0.0) {
        const Vec3& m = mesh_normals_[k];
        terms.normal_distill += (1.0 - params.unit_normal(k).dot(m)) * inv_n;
        if (grad)
          for (int i = 0; i < 3; ++i) (*grad)[k * params.stride() + i] -= weights_.normal_distill * m[i] * inv_n;
      }
    }

    // Gradients so far are w.r.t. the unit normal u = n / |n|; chain through
    // the normalization, which leaves only the tangential part.
    if (grad) {
      for (std::size_t k = 0; k < splat_count_; ++k) {
        double* g = grad->data() + k * params.stride();
        const Vec3 gu(g[0], g[1], g[2]);
        if (gu.isZero(0.0)) continue;
        const Vec3 u = params.unit_normal(k);
        const Vec3 gn = (gu - u * u.dot(gu)) / params.normal(k).norm();
        for (int i = 0; i < 3; ++i) g[i] = gn[i];
      }
    }

    terms.total = weights_.image * terms.image + weights_.perceptual * terms.perceptual +
                  weights_.tv_image * terms.tv_image + weights_.prt * terms.prt +
                  weights_.normal_distill * terms.normal_distill + weights_.normal_tv * terms.normal_tv;
    return terms;
  }

  /// Signs of every L1 and TV argument in the weighted terms at params.
  std::vector<std::int8_t> kink_pattern(const RelightParams& params) const {
    std::vector<std::int8_t> out;
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const ImageBuffer pred = predict(params, o);
      if (weights_.image > 0.0) append_l1_signs(pred, obs_[o].target, out);
      if (weights_.perceptual > 0.0) append_pyramid_signs(pred, obs_[o].target, out);
      if (weights_.tv_image > 0.0) append_tv_signs(pred, out);
    }
    if (weights_.normal_tv > 0.0)
      for (std::size_t v = 0; v < views_.size(); ++v) append_tv_signs(normal_map(params, v), out);
    return out;
  }

  /// Predicted image of observation o.
  ImageBuffer predict(const RelightParams& params, std::size_t o) const {
    const Ob& ob = obs_[o];
    const View& view = views_[ob.view];
    std::vector<Vec3> colors(splat_count_, Vec3::Zero());
    for (std::size_t j = 0; j < view.visible.size(); ++j)
      colors[view.visible[j]] = shade_params(params, view.visible[j], ob.light, view.view_dirs[j]).color;
    return view.cache.reconstruct(colors);
  }

 private:
  struct View {
    Camera camera;
    WeightCache cache;
    std::vector<std::uint32_t> visible;  // splats referenced by the cache
    std::vector<Vec3> view_dirs;         // parallel to visible
  };
  struct Ob {
    std::size_t view;
    PreparedLight light;
    ImageBuffer target;
  };
  struct ShadedSplat {
    Vec3 color;
    Eigen::Matrix<double, 3, 4> d_spec;   // d color / d(ux, uy, uz, roughness)
    Vec3 diffuse_dot;                     // <T_c, L_c>
  };
  using D4 = Dual<4>;

  static View make_view(const HeadAsset& geometry, const Camera& cam) {
    View v;
    v.camera = cam;
    v.cache = extract_weight_cache(geometry, cam);
    std::vector<bool> seen(geometry.splats.size(), false);
    for (std::uint32_t k : v.cache.splat) seen[k] = true;
    for (std::uint32_t k = 0; k < seen.size(); ++k) {
      if (!seen[k]) continue;
      v.visible.push_back(k);
      v.view_dirs.push_back(view_direction(cam, geometry.splats[k]));
    }
    return v;
  }

  // Mirrors shade(): same operation order, so at float-exact attributes the
  // value path reproduces render() bit for bit.
  ShadedSplat shade_params(const RelightParams& params, std::size_t k, const PreparedLight& light,
                           const Vec3& w_o) const {
    const double* b = params.block(k);
    const int tw = width_;
    ShadedSplat out;
    for (int c = 0; c < 3; ++c) {
      const auto& l = light.sh.channels[c].coeffs;
      double acc = 0.0;
      for (int i = 0; i < tw; ++i) acc += b[RelightParams::kTransport + c * tw + i] * l[i];
      out.diffuse_dot[c] = acc;
      out.color[c] = b[RelightParams::kAlbedo + c] * acc;
    }
    out.d_spec.setZero();
    if (light.has_specular) {
      const Vec3 u = params.unit_normal(k);
      const std::array<D4, 3> n{D4::variable(u[0], 0), D4::variable(u[1], 1), D4::variable(u[2], 2)};
      const D4 roughness = D4::variable(b[RelightParams::kRoughness], 3);
      std::array<D4, 3> spec{D4(0.0), D4(0.0), D4(0.0)};
      for (const auto& li : light.specular_lights) {
        const D4 kterm = specular_cosine_term(li.direction, w_o, n, roughness, material_.f0);
        if (kterm.v == 0.0 && kterm.d == std::array<double, 4>{}) continue;
        for (int c = 0; c < 3; ++c) spec[c] += kterm * D4(li.radiance[c]);
      }
      for (int c = 0; c < 3; ++c) {
        out.color[c] += spec[c].v;
        for (int i = 0; i < 4; ++i) out.d_spec(c, i) = spec[c].d[i];
      }
    }
    return out;
  }

  LossTerms image_terms(const RelightParams& params, std::size_t o, std::vector<double>* grad) const {
    const Ob& ob = obs_[o];
    const View& view = views_[ob.view];
    std::vector<ShadedSplat> shaded(view.visible.size());
    std::vector<Vec3> colors(splat_count_, Vec3::Zero());
    for (std::size_t j = 0; j < view.visible.size(); ++j) {
      shaded[j] = shade_params(params, view.visible[j], ob.light, view.view_dirs[j]);
      colors[view.visible[j]] = shaded[j].color;
    }
    const ImageBuffer pred = view.cache.reconstruct(colors);
    LossTerms t;
    if (weights_.image > 0.0) t.image = loss_image(pred, ob.target);
    if (weights_.perceptual > 0.0) t.perceptual = loss_pyramid(pred, ob.target);
    const double per_entry = 1.0 / static_cast<double>(pred.rgb.size());
    if (weights_.tv_image > 0.0) t.tv_image = loss_tv(pred) * per_entry;
    if (!grad) return t;

    grad->assign(params.values.size(), 0.0);
    const double inv_obs = 1.0 / static_cast<double>(obs_.size());
    std::vector<double> d_pred(pred.rgb.size(), 0.0);
    if (weights_.image > 0.0) add_image_gradient(pred, ob.target, weights_.image * inv_obs, d_pred);
    if (weights_.perceptual > 0.0) add_pyramid_gradient(pred, ob.target, weights_.perceptual * inv_obs, d_pred);
    if (weights_.tv_image > 0.0) add_tv_gradient(pred, weights_.tv_image * inv_obs * per_entry, d_pred);

    std::vector<Vec3> d_color(splat_count_, Vec3::Zero());
    const WeightCache& cache = view.cache;
    for (std::size_t p = 0; p < cache.pixel_count(); ++p) {
      const Vec3 dp(d_pred[3 * p], d_pred[3 * p + 1], d_pred[3 * p + 2]);
      if (dp.isZero(0.0)) continue;
      for (std::size_t e = cache.begin(p); e < cache.end(p); ++e) d_color[cache.splat[e]] += cache.weight[e] * dp;
    }

    const int tw = width_;
    for (std::size_t j = 0; j < view.visible.size(); ++j) {
      const std::size_t k = view.visible[j];
      const Vec3 g = d_color[k];
      if (g.isZero(0.0)) continue;
      const double* b = params.block(k);
      double* out = grad->data() + k * params.stride();
      for (int c = 0; c < 3; ++c) {
        const auto& l = ob.light.sh.channels[c].coeffs;
        const double albedo = b[RelightParams::kAlbedo + c];
        for (int i = 0; i < tw; ++i) out[RelightParams::kTransport + c * tw + i] += g[c] * albedo * l[i];
        out[RelightParams::kAlbedo + c] += g[c] * shaded[j].diffuse_dot[c];
      }
      const Eigen::Matrix<double, 1, 4> d_geo = g.transpose() * shaded[j].d_spec;
      for (int i = 0; i < 3; ++i) out[RelightParams::kNormal + i] += d_geo[i];
      out[RelightParams::kRoughness] += d_geo[3];
    }
    return t;
  }

  ImageBuffer normal_map(const RelightParams& params, std::size_t v) const {
    const View& view = views_[v];
    std::vector<Vec3> payload(splat_count_, Vec3::Zero());
    for (std::uint32_t k : view.visible) payload[k] = 0.5 * (params.unit_normal(k) + Vec3::Ones());
    return view.cache.reconstruct(payload);
  }

  double normal_tv_term(const RelightParams& params, std::size_t v, double grad_scale, std::vector<double>* grad) const {
    const View& view = views_[v];
    const ImageBuffer nmap = normal_map(params, v);
    const double per_entry = 1.0 / static_cast<double>(nmap.rgb.size());
    const double value = loss_tv(nmap) * per_entry;
    if (grad) {
      std::vector<double> d_map(nmap.rgb.size(), 0.0);
      add_tv_gradient(nmap, grad_scale * per_entry, d_map);
      const WeightCache& cache = view.cache;
      for (std::size_t p = 0; p < cache.pixel_count(); ++p) {
        const Vec3 dp(d_map[3 * p], d_map[3 * p + 1], d_map[3 * p + 2]);
        if (dp.isZero(0.0)) continue;
        for (std::size_t e = cache.begin(p); e < cache.end(p); ++e) {
          double* out = grad->data() + cache.splat[e] * static_cast<std::size_t>(params.stride());
          for (int i = 0; i < 3; ++i) out[RelightParams::kNormal + i] += 0.5 * cache.weight[e] * dp[i];
        }
      }
    }
    return value;
  }

  std::size_t splat_count_;
  int width_;
  LossWeights weights_;
  MaterialConstants material_;
  std::vector<View> views_;
  std::vector<Ob> obs_;
  std::vector<Vec3> mesh_normals_;
};

/// Loss and gradient at the attributes stored in asset.
inline std::pair<LossTerms, std::vector<double>> total_stage2_loss(const HeadAsset& asset, const Stage2Problem& problem) {
  std::vector<double> grad;
  const LossTerms t = problem.evaluate(RelightParams(asset), &grad);
  return {t, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // stencil crosses an L1 or TV kink
};

/// Relative error |a - f| / max(|a|, |f|, floor) between analytic and
/// central-difference derivatives over every free entry. Entries whose
/// stencil x +- step changes the sign of any L1 or TV argument are not
/// differentiable there; they are counted and skipped.
inline GradientReport check_gradients(const Stage2Problem& problem, const RelightParams& at, const FreeAttributes& free,
                                      double step = 1e-6, double floor = 1e-6) {
  std::vector<double> analytic;
  problem.evaluate(at, &analytic);
  const std::vector<bool> mask = at.free_mask(free);
  GradientReport report;
  RelightParams probe = at;
  const std::vector<std::int8_t> pattern = problem.kink_pattern(at);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double x0 = probe.values[i];
    probe.values[i] = x0 + step;
    const double fp = problem.evaluate(probe, nullptr).total;
    const bool kink_p = problem.kink_pattern(probe) != pattern;
    probe.values[i] = x0 - step;
    const double fm = problem.evaluate(probe, nullptr).total;
    const bool kink_m = problem.kink_pattern(probe) != pattern;
    probe.values[i] = x0;
    if (kink_p || kink_m) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    ++report.checked;
    if (rel > report.max_relative_error || report.checked == 1) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.worst_analytic = analytic[i];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Adam fit on the free relighting attributes.

struct FitResult {
  HeadAsset asset;
  std::vector<LossTerms> trace;  // loss before each update
};

using FitProgress = std::function<void(int iteration, const LossTerms&)>;

inline FitResult fit(const HeadAsset& init, const Stage2Problem& problem, const FitConfig& cfg,
                     const FitProgress& progress = {}) {
  if (cfg.iterations <= 0 || !(cfg.learning_rate > 0.0))
    throw Error(ErrorCode::kDomain, "fit: iterations and learning rate must be positive");
  RelightParams params(init);
  const std::vector<bool> mask = params.free_mask(cfg.free);
  std::vector<double> m(params.values.size(), 0.0), v(params.values.size(), 0.0), grad;
  FitResult result{init, {}};
  result.trace.reserve(cfg.iterations);
  double beta1_t = 1.0, beta2_t = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const LossTerms terms = problem.evaluate(params, &grad);
    if (!std::isfinite(terms.total))
      throw Error(ErrorCode::kDivergence, "fit diverged at iteration " + std::to_string(it) + " (loss " +
                                              std::to_string(terms.total) + ")");
    result.trace.push_back(terms);
    if (progress) progress(it, terms);

    beta1_t *= cfg.beta1;
    beta2_t *= cfg.beta2;
    const double step = cfg.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
    for (std::size_t k = 0; k < params.splat_count(); ++k) {
      double* b = params.block(k);
      const std::size_t o = k * params.stride();
      bool normal_moved = false;
      for (int i = 0; i < params.stride(); ++i) {
        if (!mask[o + i]) continue;
        const double g = grad[o + i];
        m[o + i] = cfg.beta1 * m[o + i] + (1.0 - cfg.beta1) * g;
        v[o + i] = cfg.beta2 * v[o + i] + (1.0 - cfg.beta2) * g * g;
        const double delta = step * m[o + i] / (std::sqrt(v[o + i]) + cfg.epsilon);
        if (delta == 0.0) continue;
        b[i] -= delta;
        if (i < 3) normal_moved = true;
      }
      if (normal_moved) {
        const double len = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        if (len > 0.0)
          for (int i = 0; i < 3; ++i) b[i] /= len;
      }
      if (cfg.free.roughness) b[RelightParams::kRoughness] = std::clamp(b[RelightParams::kRoughness], kMinRoughness, 1.0);
      if (cfg.free.albedo)
        for (int i = 0; i < 3; ++i) b[RelightParams::kAlbedo + i] = std::clamp(b[RelightParams::kAlbedo + i], 0.0, 1.0);
    }
  }
  params.write_to(result.asset, cfg.free);
  return result;
}

inline void write_loss_trace_csv(const std::vector<LossTerms>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.precision(10);
  out << "iteration,image,perceptual,tv_image,prt,normal_distill,normal_tv,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const LossTerms& t = trace[i];
    out << i << "," << t.image << "," << t.perceptual << "," << t.tv_image << "," << t.prt << "," << t.normal_distill
        << "," << t.normal_tv << "," << t.total << "\n";
  }
}

}  // namespace gsr
