// gsr: rendering, OLAT stacks, Stage-2 fitting, gradient checks, metrics
// and benchmarks from the command line.
//
// Exit codes: 0 ok, 1 unexpected, 2 usage, 3 io, 4 parse, 5 invariant,
// 6 validation failed.

#include "gsr/fit/fitter.hpp"
#include "gsr/fit/metrics.hpp"
#include "gsr/fit/synthetic.hpp"
#include "gsr/service/protocol.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace gsr;
using gsr::service::json;

namespace {

enum Exit { kOk = 0, kUnexpected = 1, kUsage = 2, kIo = 3, kParse = 4, kInvariant = 5, kValidation = 6 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kIo:
    case ErrorCode::kNotFound: return kIo;
    case ErrorCode::kParse:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTruncated:
    case ErrorCode::kSchema: return kParse;
    default: return kInvariant;
  }
}

void log(const std::string& msg) { std::cerr << "gsr: " << msg << "\n"; }

// ---------------------------------------------------------------------------
// Shared options.

struct Common {
  std::string out = ".";
  std::uint64_t seed = 0;

  std::string path(const std::string& name) const {
    fs::create_directories(out);
    return (fs::path(out) / name).string();
  }
};

struct CameraOptions {
  std::string file;
  double azimuth = 0.0, elevation = 0.0, distance = 4.5, fov = 30.0;
  int width = 256, height = 256;

  void add(CLI::App* app) {
    auto* f = app->add_option("--camera", file, "Camera file (W H / fx fy cx cy / 3x4 [R|t])");
    for (auto* o : {app->add_option("--azimuth", azimuth, "Orbit azimuth, degrees"),
                    app->add_option("--elevation", elevation, "Orbit elevation, degrees")->check(CLI::Range(-89.0, 89.0)),
                    app->add_option("--distance", distance, "Orbit distance")->check(CLI::PositiveNumber),
                    app->add_option("--fov", fov, "Vertical field of view, degrees")->check(CLI::Range(1.0, 170.0))})
      o->excludes(f);
    app->add_option("--width", width, "Image width")->check(CLI::Range(1, 8192));
    app->add_option("--height", height, "Image height")->check(CLI::Range(1, 8192));
  }

  Camera camera() const {
    if (!file.empty()) return load_camera(file);
    return Camera::orbit(azimuth, elevation, distance, width, height, fov);
  }
};

struct MaterialOptions {
  service::MaterialOverrides m;
  std::vector<double> tint;

  void add(CLI::App* app) {
    app->add_option("--roughness-scale", m.roughness_scale, "Multiplies every roughness, then clamps to [0.01, 1]")
        ->check(CLI::Range(service::kMinRoughnessScale, service::kMaxRoughnessScale));
    app->add_option("--albedo-tint", tint, "Albedo multiplier r g b in [0, 1]")->expected(3)->check(CLI::Range(0.0, 1.0));
  }

  HeadAsset apply(const HeadAsset& asset) {
    if (!tint.empty()) m.albedo_tint = Vec3(tint[0], tint[1], tint[2]);
    return m.identity() ? asset : service::apply_material(asset, m);
  }
};

EnvMap load_env(const std::string& file, const std::string& preset) {
  if (!file.empty()) return read_image(file);
  try {
    return service::make_env_preset(preset);
  } catch (const service::ProtocolError& e) {
    throw UsageError(e.what());
  }
}

void write_frame(const ImageBuffer& img, const std::string& stem) {
  write_png(img, stem + ".png");
  write_pfm(img, stem + ".pfm");
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json camera_json(const Camera& c) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back(json::array({c.rotation(i, 0), c.rotation(i, 1), c.rotation(i, 2)}));
  return {{"width", c.width}, {"height", c.height}, {"fx", c.fx},   {"fy", c.fy},
          {"cx", c.cx},       {"cy", c.cy},         {"rotation", r}, {"translation", vec_json(c.translation)}};
}

Camera camera_from(const json& j) {
  Camera c;
  c.width = j.at("width");
  c.height = j.at("height");
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) c.rotation(i, k) = j.at("rotation").at(i).at(k).get<double>();
  c.translation = vec_from(j.at("translation"));
  validate_camera(c);
  return c;
}

json lights_json(const PointSet& lights) {
  json arr = json::array();
  for (const auto& l : lights) arr.push_back({{"direction", vec_json(l.direction)}, {"radiance", vec_json(l.radiance)}});
  return arr;
}

PointSet lights_from(const json& arr) {
  PointSet lights;
  for (const auto& l : arr) lights.push_back({vec_from(l.at("direction")), vec_from(l.at("radiance"))});
  for (const auto& l : lights) validate_point_light(l);
  return lights;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct GenAsset {
  std::string kind = "sphere";
  int splats = 5000;
  double radius = 1.0, radius_b = 0.6, separation = 1.6, roughness = 0.5;
  std::vector<double> albedo{0.7, 0.6, 0.5};
  double normal_noise_deg = 0.0, position_noise = 0.0;
  std::string output = "asset.gsr", mesh_output;
  int mesh_subdivisions = 4;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "sphere or two-lobe")->check(CLI::IsMember({"sphere", "two-lobe"}));
    app->add_option("--splats", splats, "Splat count (per lobe for two-lobe)")->check(CLI::Range(16, 10000000));
    app->add_option("--radius", radius, "Sphere radius (first lobe)")->check(CLI::PositiveNumber);
    app->add_option("--radius-b", radius_b, "Second lobe radius")->check(CLI::PositiveNumber);
    app->add_option("--separation", separation, "Lobe center distance")->check(CLI::NonNegativeNumber);
    app->add_option("--roughness", roughness, "Roughness")->check(CLI::Range(0.01, 1.0));
    app->add_option("--albedo", albedo, "Albedo r g b")->expected(3)->check(CLI::Range(0.0, 1.0));
    app->add_option("--normal-noise-deg", normal_noise_deg, "Tilt every normal by this angle")->check(CLI::Range(0.0, 90.0));
    app->add_option("--position-noise", position_noise, "Uniform jitter of splat centers")->check(CLI::NonNegativeNumber);
    app->add_option("--output", output, "Asset file name");
    app->add_option("--mesh-output", mesh_output, "Also write the proxy surface as OBJ");
    app->add_option("--mesh-subdivisions", mesh_subdivisions, "Icosphere subdivisions")->check(CLI::Range(0, 7));
  }

  int run(const Common& c) {
    const Vec3 alb(albedo[0], albedo[1], albedo[2]);
    HeadAsset asset;
    TriangleMesh mesh;
    if (kind == "sphere") {
      asset = generate_sphere_asset(splats, radius, alb, roughness, c.seed);
      mesh = make_icosphere(radius, mesh_subdivisions);
    } else {
      TwoLobeParams p;
      p.splats_per_lobe = splats;
      p.radius_a = radius;
      p.radius_b = radius_b;
      p.separation = separation;
      p.albedo = alb;
      p.roughness = roughness;
      p.seed = c.seed;
      asset = generate_two_lobe_asset(p);
      mesh = make_icosphere(radius, mesh_subdivisions, Vec3(-0.5 * separation, 0, 0));
      const TriangleMesh b = make_icosphere(radius_b, mesh_subdivisions, Vec3(0.5 * separation, 0, 0));
      const int base = static_cast<int>(mesh.vertices.size());
      mesh.vertices.insert(mesh.vertices.end(), b.vertices.begin(), b.vertices.end());
      for (auto f : b.faces) mesh.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }
    if (normal_noise_deg > 0.0) asset = perturb_relight_attributes(asset, normal_noise_deg, 0.0, c.seed + 1);
    if (position_noise > 0.0) {
      Rng rng(c.seed + 2);
      for (Splat& s : asset.splats)
        s.position += (position_noise * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))).cast<float>();
    }
    save_asset(asset, c.path(output));
    if (!mesh_output.empty()) save_obj(mesh, c.path(mesh_output));
    std::cout << "wrote " << c.path(output) << " (" << asset.size() << " splats)\n";
    return kOk;
  }
};

struct Render {
  std::string asset;
  CameraOptions cam;
  MaterialOptions material;
  std::string lights, sh, env, env_preset, protocol;
  double env_rotation = 0.0;
  int env_samples = service::kEnvSpecularSamples;
  int condition = 0, conditions = 16;
  std::string name = "render";
  bool brute_force = false;

  void add(CLI::App* app) {
    app->add_option("--asset", asset, "Asset file")->required();
    cam.add(app);
    material.add(app);
    app->add_option("--lights", lights, "Point light file: x y z r g b per line");
    app->add_option("--sh", sh, "SH lighting file: degree, then coefficients per channel");
    app->add_option("--env", env, "Environment map (PFM or PNG)");
    app->add_option("--env-preset", env_preset, "Built-in environment: uniform, studio, sunset");
    app->add_option("--protocol", protocol, "OLAT protocol: uniform, direction, random10, random20");
    app->add_option("--condition", condition, "Protocol condition index")->check(CLI::NonNegativeNumber);
    app->add_option("--conditions", conditions, "Conditions of a random protocol")->check(CLI::Range(1, 100000));
    app->add_option("--env-rotation", env_rotation, "Environment rotation about +y, degrees");
    app->add_option("--env-samples", env_samples, "Specular samples drawn from the environment")->check(CLI::Range(1, 100000));
    app->add_option("--name", name, "Output stem; writes <name>.png and <name>.pfm");
    app->add_flag("--brute-force", brute_force, "All splats against all pixels (oracle path)");
  }

  LightCondition light(std::uint64_t seed) const {
    const int given = !lights.empty() + !sh.empty() + !env.empty() + !env_preset.empty() + !protocol.empty();
    if (given != 1) throw UsageError("exactly one of --lights, --sh, --env, --env-preset, --protocol is required");
    if (!lights.empty()) return load_point_lights(lights);
    if (!sh.empty()) return load_sh_lighting(sh);
    if (!protocol.empty()) {
      OlatMode mode;
      try {
        mode = parse_olat_mode(protocol);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const auto set = olat_protocol(mode, kRigLightCount, seed, conditions);
      if (condition >= static_cast<int>(set.size()))
        throw UsageError("--condition " + std::to_string(condition) + " out of range, protocol has " +
                         std::to_string(set.size()));
      return set[condition];
    }
    EnvLight e;
    e.map = rotate_envmap(load_env(env, env_preset), env_rotation * kPi / 180.0);
    e.specular_samples = env_samples;
    e.seed = seed;
    return e;
  }

  int run(const Common& c) {
    const LightCondition cond = light(c.seed);
    const HeadAsset a = material.apply(load_asset(asset));
    RenderOptions opts;
    opts.brute_force = brute_force;
    write_frame(render(a, cam.camera(), cond, opts), c.path(name));
    std::cout << "wrote " << c.path(name) << ".png/.pfm\n";
    return kOk;
  }
};

struct Sweep {
  std::string asset, env, env_preset;
  CameraOptions cam;
  MaterialOptions material;
  int frames = 8, env_samples = service::kEnvSpecularSamples;
  std::string name = "sweep";

  void add(CLI::App* app) {
    app->add_option("--asset", asset, "Asset file")->required();
    cam.add(app);
    material.add(app);
    app->add_option("--env", env, "Environment map (PFM or PNG)");
    app->add_option("--env-preset", env_preset, "Built-in environment: uniform, studio, sunset");
    app->add_option("--frames", frames, "Frames over one full turn")->check(CLI::Range(1, 100000));
    app->add_option("--env-samples", env_samples, "Specular samples drawn from the environment")->check(CLI::Range(1, 100000));
    app->add_option("--name", name, "Output stem; writes <name>_NNN.png/.pfm");
  }

  int run(const Common& c) {
    if (env.empty() == env_preset.empty()) throw UsageError("exactly one of --env, --env-preset is required");
    const EnvMap map = load_env(env, env_preset);
    const HeadAsset a = material.apply(load_asset(asset));
    const Camera camera = cam.camera();
    for (int f = 0; f < frames; ++f) {
      EnvLight e;
      e.map = rotate_envmap(map, 2.0 * kPi * f / frames);
      e.specular_samples = env_samples;
      e.seed = c.seed;
      char stem[64];
      std::snprintf(stem, sizeof stem, "%s_%03d", name.c_str(), f);
      write_frame(render(a, camera, e), c.path(stem));
    }
    std::cout << "wrote " << frames << " frames to " << c.out << "\n";
    return kOk;
  }
};

struct Olat {
  std::string asset, mode = "uniform";
  CameraOptions cam;
  int conditions = 16;
  std::string name = "olat";

  void add(CLI::App* app) {
    app->add_option("--asset", asset, "Asset file")->required();
    cam.add(app);
    app->add_option("--mode", mode, "uniform, direction, random10, random20")
        ->check(CLI::IsMember({"uniform", "direction", "random10", "random20"}));
    app->add_option("--conditions", conditions, "Conditions of a random protocol")->check(CLI::Range(1, 100000));
    app->add_option("--name", name, "Output prefix; the manifest is <name>_manifest.json");
  }

  int run(const Common& c) {
    const OlatMode m = parse_olat_mode(mode);
    const auto set = olat_protocol(m, kRigLightCount, c.seed, conditions);
    const HeadAsset a = load_asset(asset);
    const Camera camera = cam.camera();
    json conds = json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
      char stem[96];
      std::snprintf(stem, sizeof stem, "%s_%s_%03zu", name.c_str(), mode.c_str(), i);
      write_frame(render(a, camera, set[i]), c.path(stem));
      conds.push_back({{"index", i},
                       {"lights", lights_json(set[i])},
                       {"png", std::string(stem) + ".png"},
                       {"pfm", std::string(stem) + ".pfm"}});
    }
    const json manifest = {{"schema_version", 1},     {"kind", "olat"},
                           {"asset", asset},          {"mode", mode},
                           {"seed", c.seed},          {"rig_lights", kRigLightCount},
                           {"camera", camera_json(camera)}, {"conditions", conds}};
    const std::string path = c.path(name + "_manifest.json");
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
    out << manifest.dump(2) << "\n";
    std::cout << "wrote " << set.size() << " conditions and " << path << "\n";
    return kOk;
  }
};

std::vector<Observation> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  json m;
  try {
    m = json::parse(in);
    if (m.at("schema_version") != 1 || m.at("kind") != "olat") throw Error(ErrorCode::kSchema, "not an OLAT manifest: " + path);
    const Camera camera = camera_from(m.at("camera"));
    const fs::path dir = fs::path(path).parent_path();
    std::vector<Observation> obs;
    for (const auto& cnd : m.at("conditions")) {
      Observation o{camera, lights_from(cnd.at("lights")), read_pfm((dir / cnd.at("pfm").get<std::string>()).string())};
      obs.push_back(std::move(o));
    }
    return obs;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "malformed manifest " + path + ": " + e.what());
  }
}

struct Fit {
  std::string asset, mesh;
  std::vector<std::string> manifests;
  FitConfig cfg;
  LossWeights w;
  std::string output = "fitted.gsr", loss_csv = "loss.csv";
  int log_every = 100;

  void add(CLI::App* app) {
    app->add_option("--asset", asset, "Initial asset; its geometry stays frozen")->required();
    app->add_option("--manifest", manifests, "OLAT manifest (repeatable)")->required();
    app->add_option("--mesh", mesh, "Proxy surface OBJ for normal distillation");
    app->add_option("--iterations", cfg.iterations, "Adam iterations")->check(CLI::Range(1, 10000000));
    app->add_option("--lr", cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    app->add_option("--w-image", w.image, "Weight of the L1 image loss")->check(CLI::NonNegativeNumber);
    app->add_option("--w-perceptual", w.perceptual, "Weight of the multi-scale image loss")->check(CLI::NonNegativeNumber);
    app->add_option("--w-tv-image", w.tv_image, "Weight of the image TV")->check(CLI::NonNegativeNumber);
    app->add_option("--w-prt", w.prt, "Weight of the transport prior")->check(CLI::NonNegativeNumber);
    app->add_option("--w-normal-distill", w.normal_distill, "Weight of normal distillation")->check(CLI::NonNegativeNumber);
    app->add_option("--w-normal-tv", w.normal_tv, "Weight of the normal-map TV")->check(CLI::NonNegativeNumber);
    app->add_flag("--free-albedo", cfg.free.albedo, "Also optimize albedo");
    app->add_option("--output", output, "Fitted asset file name");
    app->add_option("--loss-csv", loss_csv, "Loss trace file name");
    app->add_option("--log-every", log_every, "Progress interval (0: silent)")->check(CLI::NonNegativeNumber);
  }

  int run(const Common& c) {
    const HeadAsset init = load_asset(asset);
    std::vector<Observation> obs;
    for (const auto& m : manifests)
      for (auto& o : load_manifest(m)) obs.push_back(std::move(o));
    std::optional<MeshNormalField> field;
    if (!mesh.empty()) {
      field.emplace(load_obj(mesh));
    } else if (w.normal_distill > 0.0) {
      log("no --mesh given; normal distillation weight set to 0");
      w.normal_distill = 0.0;
    }
    const Stage2Problem problem(init, std::move(obs), w, field ? &*field : nullptr);
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit(init, problem, cfg, [&](int it, const LossTerms& t) {
      if (log_every > 0 && it % log_every == 0) log("iteration " + std::to_string(it) + " loss " + std::to_string(t.total));
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_asset(r.asset, c.path(output));
    write_loss_trace_csv(r.trace, c.path(loss_csv));
    std::cout << "fitted " << init.size() << " splats on " << problem.observation_count() << " observations, "
              << cfg.iterations << " iterations in " << secs << " s; final loss " << r.trace.back().total << "\n";
    return kOk;
  }
};

struct CheckGradients {
  std::string asset, mesh;
  int splats = 50, views = 4, lights = 6, resolution = 24;
  double tolerance = 1e-3, step = 1e-6;

  void add(CLI::App* app) {
    app->add_option("--asset", asset, "Asset to check at (default: generated sphere)");
    app->add_option("--mesh", mesh, "Proxy surface OBJ (default: icosphere for the generated sphere)");
    app->add_option("--splats", splats, "Generated sphere size")->check(CLI::Range(16, 100000));
    app->add_option("--views", views, "Synthetic views")->check(CLI::Range(1, 1000));
    app->add_option("--lights", lights, "Rig lights per view")->check(CLI::Range(1, kRigLightCount));
    app->add_option("--resolution", resolution, "Synthetic image size")->check(CLI::Range(4, 1024));
    app->add_option("--tolerance", tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
    app->add_option("--step", step, "Central-difference step")->check(CLI::PositiveNumber);
  }

  int run(const Common& c) {
    const bool generated = asset.empty();
    const HeadAsset truth = generated ? generate_sphere_asset(splats, 1.0, Vec3(0.7, 0.6, 0.5), 0.4, c.seed) : load_asset(asset);
    std::optional<MeshNormalField> field;
    if (!mesh.empty()) field.emplace(load_obj(mesh));
    else if (generated) field.emplace(make_icosphere(1.0, 3));
    LossWeights w;
    if (!field) w.normal_distill = 0.0;
    const Stage2Problem problem(truth, surround_olat(truth, views, lights, resolution, c.seed), w, field ? &*field : nullptr);
    const HeadAsset at = perturb_relight_attributes(truth, 15.0, 0.2, c.seed + 1);
    const GradientReport r = check_gradients(problem, RelightParams(at), FitConfig{}.free, step);
    const bool pass = r.checked > 0 && r.max_relative_error < tolerance;
    const json report = {{"max_relative_error", r.max_relative_error},
                         {"tolerance", tolerance},
                         {"checked", r.checked},
                         {"skipped_kinks", r.skipped_kinks},
                         {"worst_index", r.worst_index},
                         {"worst_analytic", r.worst_analytic},
                         {"worst_numeric", r.worst_numeric},
                         {"pass", pass}};
    std::ofstream(c.path("gradient_report.json")) << report.dump(2) << "\n";
    std::cout << (pass ? "PASS" : "FAIL") << " max relative error " << r.max_relative_error << " over " << r.checked
              << " entries (" << r.skipped_kinks << " skipped at kinks)\n";
    if (!pass) throw ValidationFailure("gradient check above tolerance");
    return kOk;
  }
};

struct Metrics {
  std::vector<std::vector<std::string>> pairs;
  std::string csv = "metrics.csv";

  void add(CLI::App* app) {
    app->add_option("--pair", pairs, "PRED TARGET image pair (repeatable)")->expected(2)->required();
    app->add_option("--csv", csv, "Table file name");
  }

  int run(const Common& c) {
    std::ofstream out(c.path(csv));
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + c.path(csv) + " for writing");
    out.precision(10);
    out << "pred,target,psnr_db,ssim\n";
    std::printf("%-32s %-32s %10s %8s\n", "pred", "target", "psnr_db", "ssim");
    for (const auto& p : pairs) {
      const ImageBuffer a = read_image(p[0]), b = read_image(p[1]);
      const double ps = psnr(a, b), ss = ssim(a, b);
      out << p[0] << "," << p[1] << "," << ps << "," << ss << "\n";
      std::printf("%-32s %-32s %10.4f %8.5f\n", p[0].c_str(), p[1].c_str(), ps, ss);
    }
    return kOk;
  }
};

struct Bench {
  std::vector<int> resolutions{256, 512};
  std::vector<int> splats{10000, 50000};
  int frames = 10, lights = 2;
  std::string csv = "bench.csv";

  void add(CLI::App* app) {
    app->add_option("--resolutions", resolutions, "Square image sizes")->check(CLI::Range(16, 8192));
    app->add_option("--splats", splats, "Splat counts")->check(CLI::Range(16, 10000000));
    app->add_option("--frames", frames, "Timed frames per cell")->check(CLI::Range(1, 100000));
    app->add_option("--lights", lights, "Point lights per frame")->check(CLI::Range(1, kRigLightCount));
    app->add_option("--csv", csv, "Table file name");
  }

  int run(const Common& c) {
    std::ofstream out(c.path(csv));
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + c.path(csv) + " for writing");
    out << "resolution,splats,threads,ms_per_frame,fps\n";
    std::printf("%10s %10s %8s %14s %8s\n", "resolution", "splats", "threads", "ms_per_frame", "fps");
    PointSet light;
    const auto rig = hemisphere_candidates(kRigLightCount);
    for (int i = 0; i < lights; ++i) light.push_back({rig[i * (kRigLightCount / lights)], Vec3::Constant(3.0 / lights)});
    for (int n : splats) {
      const HeadAsset a = generate_sphere_asset(n, 1.0, Vec3(0.7, 0.6, 0.5), 0.4, c.seed);
      for (int res : resolutions) {
        const Camera cam = Camera::orbit(20.0, 10.0, 4.5, res, res);
        render(a, cam, light);  // warm-up
        const auto t0 = std::chrono::steady_clock::now();
        for (int f = 0; f < frames; ++f) render(a, cam, light);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / frames;
        out << res << "," << n << "," << worker_count() << "," << ms << "," << 1000.0 / ms << "\n";
        std::printf("%10d %10d %8u %14.2f %8.2f\n", res, n, worker_count(), ms, 1000.0 / ms);
      }
    }
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gsr: relightable Gaussian splat renderer and Stage-2 fitter"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "Output directory; every output path is relative to it");
  app.add_option("--seed", common.seed, "Seed for every random choice");

  GenAsset gen;
  Render rend;
  Sweep sweep;
  Olat olat;
  Fit fitc;
  CheckGradients grad;
  Metrics metrics;
  Bench bench;
  std::vector<std::pair<CLI::App*, std::function<int()>>> subs;
  auto sub = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* s = app.add_subcommand(name, help);
    cmd.add(s);
    subs.emplace_back(s, [&cmd, &common] { return cmd.run(common); });
  };
  sub("gen-asset", "Generate a synthetic asset", gen);
  sub("render", "Render one image pair (PNG + PFM)", rend);
  sub("sweep", "Render frames rotating an environment map about +y", sweep);
  sub("olat", "Render an OLAT protocol stack and its manifest", olat);
  sub("fit", "Stage-2 fit of normals, roughness and transport", fitc);
  sub("check-gradients", "Analytic vs central-difference gradients", grad);
  sub("metrics", "PSNR/SSIM table for image pairs", metrics);
  sub("bench", "Frames per second per resolution and splat count", bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    for (auto& [s, run] : subs)
      if (s->parsed()) return run();
  } catch (const UsageError& e) {
    log(std::string("usage: ") + e.what());
    return kUsage;
  } catch (const ValidationFailure& e) {
    log(e.what());
    return kValidation;
  } catch (const Error& e) {
    log(e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log(std::string("unexpected: ") + e.what());
    return kUnexpected;
  }
  return kUsage;
}
