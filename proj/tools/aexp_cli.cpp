// aexp: score images, sweep grids, run the exposure controller, dump metric
// surfaces, and evaluate the noise estimator.
//
// Exit codes: 0 success, 2 input or parse error, 3 runtime or camera error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aexp/aexp.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

/// Input-side failure; maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Camera or runtime failure; maps to exit code 3.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricOverrides {
  std::optional<double> gamma, lambda, p, tau_l, tau_h, k_g, k_e, alpha, beta, s_floor, sigma_max;
  std::optional<int> n_cells;

  void apply(aexp::MetricConfig& m) const {
    if (gamma) m.gamma = *gamma;
    if (lambda) m.lambda = *lambda;
    if (n_cells) m.n_cells = *n_cells;
    if (p) m.p = *p;
    if (tau_l) m.tau_l = *tau_l;
    if (tau_h) m.tau_h = *tau_h;
    if (k_g) m.k_g = *k_g;
    if (k_e) m.k_e = *k_e;
    if (alpha) m.alpha = *alpha;
    if (beta) m.beta = *beta;
    if (s_floor) m.s_floor = *s_floor;
    if (sigma_max) m.sigma_max = *sigma_max;
  }
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  MetricOverrides metric;
};

aexp::RunConfig resolve_config(const Globals& g) {
  aexp::RunConfig cfg;
  if (!g.config_path.empty()) cfg = aexp::load_run_config(g.config_path);
  g.metric.apply(cfg.metric);
  if (g.seed) {
    cfg.seed = *g.seed;
    if (cfg.camera) cfg.camera->model.rng_seed = *g.seed;
  }
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
}

aexp::SweepManifest load_manifest(const fs::path& path) {
  try {
    return aexp::SweepManifest::load(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

aexp::MetricSurface surface_from(const aexp::SweepManifest& manifest, const aexp::MetricConfig& m) {
  try {
    return aexp::build_surface(manifest, m);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

int cmd_score(const Globals& g, const std::string& image_path, bool write_csv) {
  const auto cfg = resolve_config(g);
  aexp::Image img;
  try {
    img = aexp::read_pnm(image_path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  const auto q = aexp::evaluate(img, cfg.metric);
  std::cout << "l_gradient " << aexp::format_number(q.l_gradient) << '\n'
            << "l_entropy " << aexp::format_number(q.l_entropy) << '\n'
            << "sigma_noise " << aexp::format_number(q.sigma_noise) << '\n'
            << "noise_estimable " << (q.noise_estimable ? "yes" : "no") << '\n'
            << "fused " << aexp::format_number(q.fused) << '\n';
  if (write_csv) {
    std::string text = aexp::csv::row(
        {"image", "l_gradient", "l_entropy", "sigma_noise", "noise_estimable", "fused"});
    text += aexp::csv::row({fs::path(image_path).filename().string(),
                            aexp::format_number(q.l_gradient), aexp::format_number(q.l_entropy),
                            aexp::format_number(q.sigma_noise), q.noise_estimable ? "1" : "0",
                            aexp::format_number(q.fused)});
    write_file(fs::path(g.out_dir) / "score.csv", text);
  }
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& manifest_path) {
  const auto cfg = resolve_config(g);
  const auto manifest = load_manifest(manifest_path);
  const auto surface = surface_from(manifest, cfg.metric);
  const auto& grid = surface.grid;

  struct Row {
    aexp::ExposureParams params;
    aexp::QualityBreakdown q;
  };
  std::vector<Row> rows;
  for (std::size_t ei = 0; ei < grid.exposures.size(); ++ei) {
    for (std::size_t gi = 0; gi < grid.gains.size(); ++gi) {
      rows.push_back({grid.at(ei, gi), surface.raw[grid.index(ei, gi)]});
    }
  }
  // Rows start in (exposure, gain) ascending order, so the stable sort keeps
  // that order among equal scores.
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.q.fused > b.q.fused; });

  std::string text = aexp::csv::row(
      {"exposure_ms", "gain_db", "l_gradient", "l_entropy", "sigma_noise", "fused"});
  for (const auto& r : rows) {
    text += aexp::csv::row({aexp::format_number(r.params.exposure_ms),
                            aexp::format_number(r.params.gain_db),
                            aexp::format_number(r.q.l_gradient),
                            aexp::format_number(r.q.l_entropy),
                            aexp::format_number(r.q.sigma_noise), aexp::format_number(r.q.fused)});
  }
  write_file(fs::path(g.out_dir) / "sweep.csv", text);
  const auto& best = rows.front();
  std::cout << "best exposure_ms=" << aexp::format_number(best.params.exposure_ms)
            << " gain_db=" << aexp::format_number(best.params.gain_db)
            << " fused=" << aexp::format_number(best.q.fused) << '\n';
  return 0;
}

template <typename Observer>
int finish_control(const Globals& g, const aexp::RunConfig& cfg, Observer& observer,
                   const aexp::ParamBounds& bounds) {
  const auto result = aexp::run(observer, cfg.start(bounds), bounds, cfg.controller);
  write_file(fs::path(g.out_dir) / "trace.csv", result.trace.to_csv());
  if (result.failure) throw RuntimeFailure("camera failure: " + *result.failure);
  std::cout << "exposure_ms " << aexp::format_number(result.params.exposure_ms) << '\n'
            << "gain_db " << aexp::format_number(result.params.gain_db) << '\n'
            << "fused " << aexp::format_number(result.score) << '\n'
            << "iterations " << result.trace.iterations() << '\n';
  return 0;
}

int cmd_control(const Globals& g) {
  const auto cfg = resolve_config(g);
  if (!cfg.camera) throw InputError("control: config has no camera section");
  const auto& cam = *cfg.camera;
  try {
    switch (cam.kind) {
      case aexp::CameraKind::Synthetic: {
        aexp::SyntheticCamera camera(
            aexp::Scene::from_image(aexp::read_pnm(cam.scene), cam.scene_scale), cam.model);
        aexp::FrameObserver observer(camera, cfg.metric);
        const auto bounds = cfg.bounds();
        bounds.validate();
        return finish_control(g, cfg, observer, bounds);
      }
      case aexp::CameraKind::Replay: {
        aexp::ReplayCamera camera(aexp::SweepManifest::load(cam.manifest));
        aexp::FrameObserver observer(camera, cfg.metric);
        const auto bounds = cfg.bounds(camera.manifest().grid().hull());
        bounds.validate();
        return finish_control(g, cfg, observer, bounds);
      }
      case aexp::CameraKind::Surface: {
        auto surface = aexp::build_surface(aexp::SweepManifest::load(cam.manifest), cfg.metric);
        surface.quantum = cam.surface_quantum;
        const auto bounds = cfg.bounds(surface.grid.hull());
        bounds.validate();
        aexp::SurfaceCamera camera(std::move(surface));
        return finish_control(g, cfg, camera, bounds);
      }
    }
  } catch (const RuntimeFailure&) {
    throw;
  } catch (const aexp::ConfigError& e) {
    throw InputError(e.what());
  } catch (const std::exception& e) {
    throw RuntimeFailure(std::string("camera initialization failed: ") + e.what());
  }
  return kExitRuntime;
}

int cmd_surface(const Globals& g, const std::string& manifest_path,
                const std::vector<std::string>& term_names) {
  const auto cfg = resolve_config(g);
  std::vector<aexp::SurfaceTerm> terms;
  for (const auto& name : term_names) {
    const auto t = aexp::parse_surface_term(name);
    if (!t) throw InputError("unknown surface term '" + name + "'");
    if (std::find(terms.begin(), terms.end(), *t) == terms.end()) terms.push_back(*t);
  }
  const auto manifest = load_manifest(manifest_path);
  const auto surface = surface_from(manifest, cfg.metric);
  const auto& grid = surface.grid;
  const int me = cfg.exposure_subdivisions;
  const int mg = cfg.gain_subdivisions;
  const double se = grid.exposure_step();
  const double sg = grid.gain_step();

  for (const auto term : terms) {
    const auto values = surface.values(term);
    std::string raw = aexp::csv::row({"exposure_ms", "gain_db", "value"});
    for (std::size_t gi = 0; gi < grid.gains.size(); ++gi) {
      for (std::size_t ei = 0; ei < grid.exposures.size(); ++ei) {
        raw += aexp::csv::row({aexp::format_number(grid.exposures[ei]),
                               aexp::format_number(grid.gains[gi]),
                               aexp::format_number(values[grid.index(ei, gi)])});
      }
    }
    std::string dense = aexp::csv::row({"exposure_ms", "gain_db", "value"});
    const std::size_t ne = grid.exposures.size();
    const std::size_t ng = grid.gains.size();
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const int gsub = gi + 1 < ng ? mg : 1;
      for (int gj = 0; gj < gsub; ++gj) {
        const double tg = static_cast<double>(gj) / mg;
        const std::size_t gcell = gi + 1 < ng ? gi : gi - 1;
        const double tgc = gi + 1 < ng ? tg : 1.0;
        const double gain = gj == 0 ? grid.gains[gi] : grid.gains[gi] + tg * sg;
        for (std::size_t ei = 0; ei < ne; ++ei) {
          const int esub = ei + 1 < ne ? me : 1;
          for (int ej = 0; ej < esub; ++ej) {
            const double te = static_cast<double>(ej) / me;
            const std::size_t ecell = ei + 1 < ne ? ei : ei - 1;
            const double tec = ei + 1 < ne ? te : 1.0;
            const double exposure = ej == 0 ? grid.exposures[ei] : grid.exposures[ei] + te * se;
            const double v = (ej == 0 && gj == 0)
                                 ? values[grid.index(ei, gi)]
                                 : aexp::interpolate_cell(grid, values, ecell, tec, gcell, tgc);
            dense += aexp::csv::row({aexp::format_number(exposure), aexp::format_number(gain),
                                     aexp::format_number(v)});
          }
        }
      }
    }
    const std::string stem = std::string("surface_") + aexp::to_string(term);
    write_file(fs::path(g.out_dir) / (stem + "_raw.csv"), raw);
    write_file(fs::path(g.out_dir) / (stem + "_interp.csv"), dense);
    const auto [bi, bg] = surface.argmax(term);
    std::cout << aexp::to_string(term) << " argmax exposure_ms="
              << aexp::format_number(grid.exposures[bi])
              << " gain_db=" << aexp::format_number(grid.gains[bg])
              << " value=" << aexp::format_number(surface.raw_value(bi, bg, term)) << '\n';
  }
  return 0;
}

int cmd_noise_eval(const Globals& g, const std::string& image_dir,
                   const std::vector<double>& sigmas, int trials) {
  const auto cfg = resolve_config(g);
  if (trials < 2) throw InputError("noise-eval: --trials must be >= 2");
  if (sigmas.empty()) throw InputError("noise-eval: --sigmas must not be empty");
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(image_dir, ec)) throw InputError("not a directory: '" + image_dir + "'");
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no PNM images in '" + image_dir + "'");
  std::vector<aexp::Image> images;
  for (const auto& f : files) {
    try {
      images.push_back(aexp::read_pnm(f));
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
  }
  std::vector<aexp::NoiseEvalRow> rows;
  try {
    rows = aexp::noise_eval(images, sigmas, trials, cfg.seed, cfg.metric);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const std::string text = aexp::noise_eval_csv(rows);
  write_file(fs::path(g.out_dir) / "noise_eval.csv", text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-aware auto-exposure toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "key=value run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for noise generation");
  app.add_option("--out", g.out_dir, "output directory for CSV files");
  auto& m = g.metric;
  app.add_option("--gamma", m.gamma, "gradient activation threshold");
  app.add_option("--lambda", m.lambda, "gradient mapping steepness");
  app.add_option("--n-cells", m.n_cells, "grid cell count (perfect square)");
  app.add_option("--p", m.p, "homogeneous-pixel quantile");
  app.add_option("--tau-l", m.tau_l, "lower unsaturated bound");
  app.add_option("--tau-h", m.tau_h, "upper unsaturated bound");
  app.add_option("--k-g", m.k_g, "gradient normalizer");
  app.add_option("--k-e", m.k_e, "entropy normalizer");
  app.add_option("--alpha", m.alpha, "gradient/entropy weight");
  app.add_option("--beta", m.beta, "noise weight");
  app.add_option("--s-floor", m.s_floor, "dispersion floor");
  app.add_option("--sigma-max", m.sigma_max, "noise level used when unestimable");

  std::string image_path;
  bool score_csv = false;
  auto* score = app.add_subcommand("score", "print the quality breakdown of one image");
  score->add_option("image", image_path, "PGM/PPM image")->required();
  score->add_flag("--csv", score_csv, "also write score.csv to the output directory");

  std::string manifest_path;
  auto* sweep = app.add_subcommand("sweep", "score every frame of a sweep and rank them");
  sweep->add_option("manifest", manifest_path, "sweep manifest CSV")->required();

  auto* control = app.add_subcommand("control", "run the exposure controller on a camera");

  std::vector<std::string> terms{"fused"};
  auto* surface = app.add_subcommand("surface", "raw and interpolated metric surfaces");
  surface->add_option("manifest", manifest_path, "sweep manifest CSV")->required();
  surface->add_option("--terms", terms, "gradient, entropy, noise, fused")->delimiter(',');

  std::string image_dir;
  std::vector<double> sigmas{1, 5, 10};
  int trials = 20;
  auto* noise = app.add_subcommand("noise-eval", "bias/spread/MSE of the noise estimator");
  noise->add_option("image_dir", image_dir, "directory of PGM/PPM images")->required();
  noise->add_option("--sigmas", sigmas, "injected noise levels")->delimiter(',');
  noise->add_option("--trials", trials, "noisy copies per image and level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*score) return cmd_score(g, image_path, score_csv);
    if (*sweep) return cmd_sweep(g, manifest_path);
    if (*control) return cmd_control(g);
    if (*surface) return cmd_surface(g, manifest_path, terms);
    if (*noise) return cmd_noise_eval(g, image_dir, sigmas, trials);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const aexp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
