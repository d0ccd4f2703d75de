// cardiostrain: command-line front end for the tracking / regularization / strain pipeline.

#include "cardiostrain/experiment.hpp"
#include "cardiostrain/field_io.hpp"
#include "cardiostrain/lagrangian.hpp"
#include "cardiostrain/parallel.hpp"
#include "cardiostrain/regularize.hpp"
#include "cardiostrain/stats.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cardiostrain;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  bool seed_set = false;
  int threads = 0;
  std::string config;
  fs::path out = ".";
};

json load_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  std::ifstream is(g.config);
  if (!is) throw ConfigError("cannot open config " + g.config);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + g.config + ": " + e.what());
  }
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return g.out / name;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::optional<VoxelMask> maybe_mask(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return io::load_mask(path);
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

ExperimentSpec experiment_spec(const Globals& g, const json& cfg) {
  ExperimentSpec s = cfg.get<ExperimentSpec>();
  if (g.seed_set) s.seed = g.seed;
  return s;
}

// ---- subcommands ----

struct PhantomArgs {
  std::string name = "normal";
  std::vector<int> dims{48, 48, 40};
  int frames = 16;
  bool speckle = false;
};

void cmd_phantom(const Globals& g, const PhantomArgs& a) {
  const json cfg = load_config(g);
  PhantomConfig pc = named_case(a.name, Grid3{{a.dims[0], a.dims[1], a.dims[2]}, {1, 1, 1}, {0, 0, 0}}, a.frames);
  if (cfg.contains("phantom")) {
    json merged = pc;
    merged.merge_patch(cfg.at("phantom"));
    pc = merged.get<PhantomConfig>();
  }
  if (g.seed_set) pc.seed = g.seed;
  const GeneratedCase gc = generate_case(pc);
  io::save_field(out_path(g, "gt.dsp4"), gc.ground_truth);
  io::save_mask(out_path(g, "mask.msk3"), gc.phantom.mask);
  std::ofstream csv(out_path(g, "sparse.csv"), std::ios::binary);
  write_trajectories_csv(csv, gc.sparse);
  write_json(out_path(g, "phantom.json"), json(pc));
  if (a.speckle)
    for (int t = 0; t < pc.frames; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%02d.vol3", t);
      io::save_volume(out_path(g, name), render_speckle(gc.phantom, t));
    }
  log("phantom '" + pc.name + "': " + std::to_string(gc.phantom.mask.count()) + " myocardial voxels, " +
      std::to_string(gc.sparse.size()) + " trajectories");
}

struct CorruptArgs {
  std::string input;
  std::optional<double> sigma, outliers, drift;
  std::string profile = "uniform";
  std::string phantom_json;
  double low = 0.15;
};

void cmd_corrupt(const Globals& g, const CorruptArgs& a) {
  const json cfg = load_config(g);
  NoiseSpec n = ExperimentSpec{}.noise;
  if (cfg.contains("noise")) from_json(cfg.at("noise"), n);
  if (a.sigma) n.gaussian_sigma = *a.sigma;
  if (a.outliers) n.outlier_fraction = *a.outliers;
  if (a.drift) n.drift_per_frame = *a.drift;
  if (g.seed_set) n.seed = g.seed;
  const DisplacementField4D gt = io::load_field(a.input);
  DisplacementField4D noisy;
  if (a.profile == "uniform") {
    noisy = corrupt(gt, n);
  } else {
    if (a.phantom_json.empty()) throw ConfigError("--profile boundary|interior needs --phantom <phantom.json>");
    std::ifstream is(a.phantom_json);
    if (!is) throw ConfigError("cannot open " + a.phantom_json);
    const GeneratedCase gc = generate_case(json::parse(is).get<PhantomConfig>());
    WallProfile p;
    if (a.profile == "boundary") p = WallProfile::Boundary;
    else if (a.profile == "interior") p = WallProfile::Interior;
    else throw ConfigError("unknown noise profile: " + a.profile + " (uniform | boundary | interior)");
    const auto scale = wall_noise_profile(gc.phantom, p, 1.0, a.low);
    noisy = corrupt(gt, n, &scale);
  }
  io::save_field(out_path(g, "corrupted.dsp4"), noisy);
}

struct TrackArgs {
  std::vector<std::string> volumes;
  std::string mask;
};

void cmd_track(const Globals& g, const TrackArgs& a) {
  const json cfg = load_config(g);
  ExperimentSpec defaults;
  if (cfg.contains("blockmatch")) defaults = experiment_spec(g, json{{"blockmatch", cfg.at("blockmatch")}});
  std::vector<ScalarVolume> vols;
  for (const auto& p : a.volumes) vols.push_back(io::load_volume(p));
  const auto mask = maybe_mask(a.mask);
  const SequenceTrack track = track_sequence(vols, mask ? &*mask : nullptr, defaults.blockmatch);
  const LagrangianResult lag = eulerian_to_lagrangian(track.field);
  io::save_field(out_path(g, "eulerian.dsp4"), track.field);
  io::save_field(out_path(g, "lagrangian.dsp4"), lag.field);
  log("tracked " + std::to_string(vols.size()) + " frames; clamped trajectories: " +
      std::to_string(100.0 * lag.flagged_fraction) + "%");
}

struct DensifyArgs {
  std::string sparse;
  std::string like;
  std::string kernel;
  std::optional<double> l1, div;
};

void cmd_densify(const Globals& g, const DensifyArgs& a) {
  const json cfg = load_config(g);
  ExperimentSpec defaults;
  if (cfg.contains("densify")) defaults = experiment_spec(g, json{{"densify", cfg.at("densify")}});
  DensifyOptions o = defaults.densify;
  if (!a.kernel.empty()) o.kernel = parse_rbf_kernel(a.kernel);
  if (a.l1) o.lambda1 = *a.l1;
  if (a.div) o.lambda2 = *a.div;
  std::ifstream is(a.sparse);
  if (!is) throw ConfigError("cannot open " + a.sparse);
  const auto sparse = read_trajectories_csv(is);
  const Grid3 grid = io::load_mask(a.like).grid;
  const DensifyResult r = densify_ground_truth(sparse, grid, o);
  io::save_field(out_path(g, "dense.dsp4"), r.lagrangian);
  if (!r.converged) log("warning: proximal solver hit the iteration cap on at least one frame");
}

void cmd_train(const Globals& g) {
  ExperimentSpec s = experiment_spec(g, load_config(g));
  if (s.regularizer == RegularizerKind::None) throw ConfigError("train-reg needs a regularizer other than 'none'");
  s.correlation_study = false;
  s.output_dir = g.out;
  const MetricsReport r = run_experiment(s);
  log("trained on " + std::to_string(r.train_cases.size()) + " cases; final loss " +
      std::to_string(r.loss_history.empty() ? 0.0 : r.loss_history.back().total) + "; model: " +
      (g.out / "model.mlpc").string());
}

struct RegularizeArgs {
  std::string model, input, input_b, mask;
  std::vector<int> stride{1, 1, 1};
};

void cmd_regularize(const Globals& g, const RegularizeArgs& a, bool fuse) {
  const MlpModel model = load_checkpoint(a.model);
  const auto mask = maybe_mask(a.mask);
  const VoxelMask* m = mask ? &*mask : nullptr;
  const DisplacementField4D in = io::load_field(a.input);
  const Index3 stride{a.stride[0], a.stride[1], a.stride[2]};
  if (fuse) {
    io::save_field(out_path(g, "fused.dsp4"), fuse_multiview(model, in, io::load_field(a.input_b), stride, m));
  } else {
    io::save_field(out_path(g, "regularized.dsp4"), regularize_field(model, in, stride, m));
  }
}

struct StrainArgs {
  std::string input, mask;
};

void cmd_strain(const Globals& g, const StrainArgs& a) {
  const DisplacementField4D f = io::load_field(a.input);
  io::save_field(out_path(g, "strain_tensor.dsp4"), green_lagrange_field(f));
  const auto mask = maybe_mask(a.mask);
  if (!mask) return;
  const DisplacementField4D p = projected_strain_field(f, LvFrameField(*mask, Vec3::UnitZ()));
  io::save_field(out_path(g, "strain_projected.dsp4"), p);
  std::ofstream os(out_path(g, "strain_curves.csv"), std::ios::binary);
  os.precision(10);
  os << "frame,radial_median,circumferential_median,longitudinal_median\n";
  for (int t = 0; t < p.frames(); ++t) {
    std::array<std::vector<double>, 3> c;
    for (std::size_t v = 0; v < mask->data.size(); ++v)
      if (mask->at(v))
        for (int d = 0; d < 3; ++d) c[static_cast<std::size_t>(d)].push_back(p.vec(t, v)[d]);
    os << t << ',' << median(c[0]) << ',' << median(c[1]) << ',' << median(c[2]) << '\n';
  }
}

struct EvalArgs {
  std::string est, gt, mask;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
  const DisplacementField4D est = io::load_field(a.est), gt = io::load_field(a.gt);
  const auto mask = maybe_mask(a.mask);
  const TrackingError te = tracking_error(est, gt, mask ? &*mask : nullptr);
  json j{{"tracking_error_mm", {{"per_frame_median", te.median}, {"per_frame_iqr", te.iqr},
                                {"median", te.summary}, {"iqr", te.summary_iqr}}}};
  if (mask) {
    const StrainError se = strain_error(est, gt, LvFrameField(*mask, Vec3::UnitZ()), &*mask);
    j["strain_error_pct"] = {{"median", {{"radial", se.median[0]}, {"circumferential", se.median[1]}, {"longitudinal", se.median[2]}}},
                             {"iqr", {{"radial", se.iqr[0]}, {"circumferential", se.iqr[1]}, {"longitudinal", se.iqr[2]}}}};
  }
  write_json(out_path(g, "eval.json"), j);
  std::ofstream os(out_path(g, "tracking_error.csv"), std::ios::binary);
  os.precision(10);
  os << "frame,median_mm,iqr_mm\n";
  for (std::size_t t = 0; t < te.median.size(); ++t) os << t << ',' << te.median[t] << ',' << te.iqr[t] << '\n';
  std::cout << "median tracking error " << te.summary << " mm (IQR " << te.summary_iqr << ")\n";
}

void cmd_report(const Globals& g) {
  ExperimentSpec s = experiment_spec(g, load_config(g));
  s.output_dir = g.out;
  const MetricsReport r = run_experiment(s);
  std::cout << "held-out " << r.test_case << ": tracking error " << r.input_error.summary << " -> "
            << r.output_error.summary << " mm; radial strain error " << r.input_strain_error.median[0] << " -> "
            << r.output_strain_error.median[0] << " %\n";
  if (r.mixing_score) std::cout << "mixing score " << *r.mixing_score << '\n';
  if (r.correlation_output)
    std::cout << "peak principal strain r (crystals vs image): " << r.correlation_output->r_principal << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardiac displacement tracking, learned regularization and strain analysis"};
  app.require_subcommand(1);
  Globals g;
  std::string out = ".";
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; },
                                         "Master seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads (0: hardware default)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "JSON configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory");

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate a phantom case: ground truth, mask, sparse trajectories");
  phantom->add_option("--case", pa.name, "Named case");
  phantom->add_option("--grid", pa.dims, "Grid dimensions nx ny nz")->expected(3);
  phantom->add_option("--frames", pa.frames, "Frame count");
  phantom->add_flag("--speckle", pa.speckle, "Also write speckle volumes frame_XX.vol3");

  CorruptArgs ca;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Corrupt a Lagrangian field with noise, outliers and drift");
  corrupt_cmd->add_option("input", ca.input, "Input .dsp4")->required()->check(CLI::ExistingFile);
  corrupt_cmd->add_option("--sigma", ca.sigma, "Gaussian sigma (mm)");
  corrupt_cmd->add_option("--outliers", ca.outliers, "Outlier trajectory fraction");
  corrupt_cmd->add_option("--drift", ca.drift, "Drift per frame (mm)");
  corrupt_cmd->add_option("--profile", ca.profile, "uniform | boundary | interior");
  corrupt_cmd->add_option("--phantom", ca.phantom_json, "phantom.json for wall profiles");
  corrupt_cmd->add_option("--low", ca.low, "Noise multiplier outside the favoured band");

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Block-matching tracking of a volume sequence");
  track->add_option("volumes", ta.volumes, "Volumes .vol3 in frame order")->required()->check(CLI::ExistingFile);
  track->add_option("--mask", ta.mask, "Tracking mask .msk3")->check(CLI::ExistingFile);

  DensifyArgs da;
  auto* densify = app.add_subcommand("densify", "RBF densification of sparse trajectories");
  densify->add_option("sparse", da.sparse, "Trajectories CSV")->required()->check(CLI::ExistingFile);
  densify->add_option("--like", da.like, "Mask .msk3 defining the output grid")->required()->check(CLI::ExistingFile);
  densify->add_option("--kernel", da.kernel, "gaussian:<sigma> | wendland:<support>");
  densify->add_option("--l1", da.l1, "L1 weight on the RBF coefficients");
  densify->add_option("--div", da.div, "Divergence penalty weight");

  auto* train_cmd = app.add_subcommand("train-reg", "Train a regularizer (leave-one-out, from --config)");

  RegularizeArgs ra;
  auto* reg = app.add_subcommand("regularize", "Apply a trained regularizer to a field");
  reg->add_option("--model", ra.model, "Checkpoint .mlpc")->required()->check(CLI::ExistingFile);
  reg->add_option("input", ra.input, "Input .dsp4")->required()->check(CLI::ExistingFile);
  reg->add_option("--mask", ra.mask, "Patch-centre mask .msk3")->check(CLI::ExistingFile);
  reg->add_option("--stride", ra.stride, "Patch stride sx sy sz")->expected(3);

  RegularizeArgs fa;
  auto* fuse = app.add_subcommand("fuse", "Fuse two views with a multi-view regularizer");
  fuse->add_option("--model", fa.model, "Checkpoint .mlpc")->required()->check(CLI::ExistingFile);
  fuse->add_option("view_a", fa.input, "View A .dsp4")->required()->check(CLI::ExistingFile);
  fuse->add_option("view_b", fa.input_b, "View B .dsp4")->required()->check(CLI::ExistingFile);
  fuse->add_option("--mask", fa.mask, "Patch-centre mask .msk3")->check(CLI::ExistingFile);
  fuse->add_option("--stride", fa.stride, "Patch stride sx sy sz")->expected(3);

  StrainArgs sa;
  auto* strain = app.add_subcommand("strain", "Green-Lagrange strain and radial/circumferential/longitudinal projections");
  strain->add_option("input", sa.input, "Lagrangian .dsp4")->required()->check(CLI::ExistingFile);
  strain->add_option("--mask", sa.mask, "Myocardium mask .msk3 (enables projections)")->check(CLI::ExistingFile);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Tracking and strain error of an estimate against ground truth");
  eval->add_option("estimate", ea.est, "Estimate .dsp4")->required()->check(CLI::ExistingFile);
  eval->add_option("truth", ea.gt, "Ground truth .dsp4")->required()->check(CLI::ExistingFile);
  eval->add_option("--mask", ea.mask, "Mask .msk3")->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Full leave-one-out experiment with report, CSVs and plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g.out = out;
  if (g.threads > 0) set_thread_count(g.threads);

  try {
    if (*phantom) cmd_phantom(g, pa);
    else if (*corrupt_cmd) cmd_corrupt(g, ca);
    else if (*track) cmd_track(g, ta);
    else if (*densify) cmd_densify(g, da);
    else if (*train_cmd) cmd_train(g);
    else if (*reg) cmd_regularize(g, ra, false);
    else if (*fuse) cmd_regularize(g, fa, true);
    else if (*strain) cmd_strain(g, sa);
    else if (*eval) cmd_eval(g, ea);
    else if (*report) cmd_report(g);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
