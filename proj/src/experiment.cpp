#include "cardiostrain/experiment.hpp"

#include "cardiostrain/field_io.hpp"
#include "cardiostrain/lagrangian.hpp"
#include "cardiostrain/regularize.hpp"
#include "cardiostrain/stats.hpp"
#include "cardiostrain/svg.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace cardiostrain {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCrystalJitter = 0.02;  // mm, scaled to the desk-size cube

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  const auto tag = [name](const char* what) { return std::string(name) + ": " + what; };
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const DimensionError& e) {
    throw DimensionError(tag(e.what()));
  } catch (const NumericalError& e) {
    throw NumericalError(tag(e.what()));
  } catch (const FormatError& e) {
    throw FormatError(tag(e.what()));
  }
}

const std::vector<std::string>& all_case_names() {
  static const std::vector<std::string> names{"normal", "lad-distal", "lad-proximal", "lcx",
                                              "rca",    "sync",       "lbbb",         "lbbb-small"};
  return names;
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

Index3 index3(const nlohmann::json& j) { return j.get<Index3>(); }
Vec3 vec3(const nlohmann::json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }
nlohmann::json arr(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::string kernel_string(const RbfKernel& k) {
  std::ostringstream os;
  os << (k.type == RbfKernelType::Gaussian ? "gaussian:" : "wendland:") << k.scale;
  return os.str();
}

VoxelMask dilate(const VoxelMask& m, int r) {
  VoxelMask out(m.grid);
  const auto& d = m.grid.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        for (int dk = -r; dk <= r; ++dk)
          for (int dj = -r; dj <= r; ++dj)
            for (int di = -r; di <= r; ++di)
              if (m.grid.contains(i + di, j + dj, k + dk)) out.data[m.grid.index(i + di, j + dj, k + dk)] = 1;
      }
  return out;
}

// Evenly spaced subset of columns.
Eigen::MatrixXd spread_columns(const Eigen::MatrixXd& m, int n) {
  const Eigen::Index take = std::min<Eigen::Index>(n, m.cols());
  Eigen::MatrixXd out(m.rows(), take);
  for (Eigen::Index i = 0; i < take; ++i) out.col(i) = m.col(i * m.cols() / take);
  return out;
}

Eigen::MatrixXd hcat(const std::vector<Eigen::MatrixXd>& blocks) {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  Eigen::MatrixXd out(blocks.empty() ? 0 : blocks.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

Mat3 cube_triad(double phi) {
  Mat3 T;
  T.col(0) = Vec3(std::cos(phi), std::sin(phi), 0.0);
  T.col(1) = Vec3(-std::sin(phi), std::cos(phi), 0.0);
  T.col(2) = Vec3::UnitZ();
  return T;
}

struct CubeGeometry {
  Vec3 centre;
  Mat3 triad;
  double half = 1.0;
};

CubeGeometry cube_geometry(const PhantomCase& ph, Zone zone) {
  const auto& m = ph.config.motion;
  const double phi = zone_angle(ph, zone);
  const double rc = 0.5 * (m.inner_radius + m.outer_radius);
  CubeGeometry c;
  c.triad = cube_triad(phi);
  c.centre = Vec3(m.axis_center.x(), m.axis_center.y(), 0.5 * (m.z_base + m.z_apex)) + rc * c.triad.col(0);
  c.half = 0.35 * (m.outer_radius - m.inner_radius);
  return c;
}

Vec3 corner(int i) { return Vec3((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0); }

struct PeakSet {
  Vec3 projected = Vec3::Zero();
  double principal = 0.0;
};

PeakSet peaks_of(const std::vector<Mat3>& series, const Mat3& triad) {
  std::array<std::vector<double>, 3> dir;
  std::vector<double> principal;
  for (const Mat3& E : series) {
    const Vec3 p = project_strain(E, triad);
    for (int a = 0; a < 3; ++a) dir[static_cast<std::size_t>(a)].push_back(p[a]);
    principal.push_back(principal_strain(E).values[0]);
  }
  PeakSet out;
  for (int a = 0; a < 3; ++a) out.projected[a] = peak_strain(dir[static_cast<std::size_t>(a)]).value;
  out.principal = peak_strain(principal).value;
  return out;
}

nlohmann::json tracking_json(const TrackingError& e) {
  return {{"per_frame_median", e.median}, {"per_frame_iqr", e.iqr}, {"median", e.summary}, {"iqr", e.summary_iqr}};
}

nlohmann::json strain_json(const StrainError& e) {
  return {{"median", {{"radial", e.median[0]}, {"circumferential", e.median[1]}, {"longitudinal", e.median[2]}}},
          {"iqr", {{"radial", e.iqr[0]}, {"circumferential", e.iqr[1]}, {"longitudinal", e.iqr[2]}}}};
}

nlohmann::json correlation_json(const CorrelationStudy& s) {
  return {{"n", s.samples.size()},
          {"r", {{"radial", s.r[0]}, {"circumferential", s.r[1]}, {"longitudinal", s.r[2]}, {"principal", s.r_principal}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

struct Condition {
  const char* name;
  double factor;
};

// Stress conditions: healthy myocardium augments its motion, the weakened sector keeps its
// absolute amplitude.
constexpr Condition kConditions[] = {{"rest", 1.0}, {"low-dose", 1.25}, {"peak-dose", 1.5}};

PhantomConfig stressed(PhantomConfig c, double f) {
  auto& m = c.motion;
  m.radial_contraction *= f;
  m.torsion *= f;
  m.longitudinal_shortening *= f;
  if (m.weak_sector_strength > 0.0) m.weak_sector_strength = 1.0 - (1.0 - m.weak_sector_strength) / f;
  return c;
}

}  // namespace

InputSource parse_input_source(const std::string& s) {
  if (s == "corrupt-gt") return InputSource::CorruptGt;
  if (s == "densify") return InputSource::Densify;
  if (s == "blockmatch") return InputSource::BlockMatch;
  throw ConfigError("unknown input source: " + s + " (corrupt-gt | densify | blockmatch)");
}

const char* to_string(InputSource s) {
  switch (s) {
    case InputSource::CorruptGt: return "corrupt-gt";
    case InputSource::Densify: return "densify";
    case InputSource::BlockMatch: return "blockmatch";
  }
  return "corrupt-gt";
}

RegularizerKind parse_regularizer(const std::string& s) {
  if (s == "none") return RegularizerKind::None;
  if (s == "supervised") return RegularizerKind::Supervised;
  if (s == "autoencoder") return RegularizerKind::Autoencoder;
  if (s == "semisupervised" || s == "semi-supervised") return RegularizerKind::SemiSupervised;
  if (s == "multiview") return RegularizerKind::MultiView;
  throw ConfigError("unknown regularizer: " + s + " (none | supervised | autoencoder | semisupervised | multiview)");
}

const char* to_string(RegularizerKind r) {
  switch (r) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::Supervised: return "supervised";
    case RegularizerKind::Autoencoder: return "autoencoder";
    case RegularizerKind::SemiSupervised: return "semisupervised";
    case RegularizerKind::MultiView: return "multiview";
  }
  return "none";
}

std::vector<std::string> ExperimentSpec::case_names() const { return cases.empty() ? all_case_names() : cases; }

void ExperimentSpec::validate() const {
  const auto names = case_names();
  grid.validate();
  if (frames < 2) throw ConfigError("experiment needs at least two frames");
  if (test_index < 0 || test_index >= static_cast<int>(names.size()))
    throw ConfigError("test index " + std::to_string(test_index) + " outside the case list");
  for (const auto& n : names)
    if (std::find(all_case_names().begin(), all_case_names().end(), n) == all_case_names().end())
      throw ConfigError("unknown phantom case: " + n);
  noise.validate();
  if (target_noise) target_noise->validate();
  if (view < 0 || view > 2) throw ConfigError("view must be 0, 1 or 2");
  if (!(view_noise_low >= 0.0)) throw ConfigError("view_noise_low must be non-negative");
  if (!(sparse_noise >= 0.0)) throw ConfigError("sparse_noise must be non-negative");
  if (regularizer == RegularizerKind::None) return;
  if (names.size() < 2) throw ConfigError("training needs at least one case besides the held-out one");
  if (patch.frames != frames) throw ConfigError("patch frame count must equal the phantom frame count");
  if (patch.sx > grid.dims[0] || patch.sy > grid.dims[1] || patch.sz > grid.dims[2])
    throw ConfigError("patch does not fit in the grid");
  for (int a = 0; a < 3; ++a)
    if (train_stride[a] < 1 || infer_stride[a] < 1) throw ConfigError("patch strides must be >= 1");
  if (hidden_width < 1 || hidden_layers < 1) throw ConfigError("model needs at least one hidden layer");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (regularizer == RegularizerKind::MultiView && source != InputSource::CorruptGt)
    throw ConfigError("multiview runs corrupt the ground truth with two noise profiles");
  if (mixing_rows < 10) throw ConfigError("mixing_rows must be >= 10");
  loss.validate();
  train.validate();
}

void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  j = nlohmann::json{
      {"cases", s.case_names()},
      {"test_index", s.test_index},
      {"grid", {{"dims", s.grid.dims}, {"spacing", arr(s.grid.spacing)}, {"origin", arr(s.grid.origin)}}},
      {"frames", s.frames},
      {"source", to_string(s.source)},
      {"regularizer", to_string(s.regularizer)},
      {"view", s.view},
      {"noise", s.noise},
      {"view_noise_low", s.view_noise_low},
      {"blockmatch",
       {{"block", s.blockmatch.block},
        {"search", s.blockmatch.search},
        {"window", s.blockmatch.window == BlockWindow::Uniform ? "uniform" : "triangular"},
        {"smooth", s.blockmatch.ncc_smooth_sigma},
        {"subvoxel", s.blockmatch.subvoxel}}},
      {"densify",
       {{"kernel", kernel_string(s.densify.kernel)},
        {"l1", s.densify.lambda1},
        {"div", s.densify.lambda2},
        {"div_stride", s.densify.div_stride},
        {"max_iterations", s.densify.max_iterations}}},
      {"sparse_noise", s.sparse_noise},
      {"patch", {s.patch.sx, s.patch.sy, s.patch.sz, s.patch.frames}},
      {"train_stride", s.train_stride},
      {"infer_stride", s.infer_stride},
      {"model", {{"hidden_width", s.hidden_width}, {"hidden_layers", s.hidden_layers}, {"dropout", s.dropout}}},
      {"loss",
       {{"lambda_recon", s.loss.lambda_recon},
        {"lambda_super", s.loss.lambda_super},
        {"lambda_div", s.loss.lambda_div},
        {"lambda_loop", s.loss.lambda_loop},
        {"loop_mode", to_string(s.loss.loop_mode)},
        {"supervised_loss", to_string(s.loss.supervised_loss)}}},
      {"train",
       {{"epochs", s.train.epochs},
        {"batch_size", s.train.batch_size},
        {"learning_rate", s.train.learning_rate},
        {"lr_decay", s.train.lr_decay},
        {"supervised_fraction", s.train.supervised_fraction},
        {"identity_fraction", s.train.identity_fraction},
        {"normalize_inputs", s.train.normalize_inputs}}},
      {"correlation_study", s.correlation_study},
      {"mixing_rows", s.mixing_rows},
      {"seed", s.seed},
      {"save_fields", s.save_fields}};
  if (s.target_noise) j["target_noise"] = *s.target_noise;
}

void from_json(const nlohmann::json& j, ExperimentSpec& s) {
  s.cases = j.value("cases", s.cases);
  s.test_index = j.value("test_index", s.test_index);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("dims")) s.grid.dims = index3(g.at("dims"));
    if (g.contains("spacing")) s.grid.spacing = vec3(g.at("spacing"));
    if (g.contains("origin")) s.grid.origin = vec3(g.at("origin"));
  }
  s.frames = j.value("frames", s.frames);
  if (j.contains("source")) s.source = parse_input_source(j.at("source").get<std::string>());
  if (j.contains("regularizer")) {
    s.regularizer = parse_regularizer(j.at("regularizer").get<std::string>());
    // The objective follows the regularizer unless the loss block says otherwise.
    switch (s.regularizer) {
      case RegularizerKind::Autoencoder: s.loss = LossConfig::autoencoder(); break;
      case RegularizerKind::SemiSupervised: s.loss = LossConfig::semi_supervised(); break;
      default: s.loss = LossConfig::supervised(); break;
    }
  }
  s.view = j.value("view", s.view);
  // Partial noise blocks override the defaults field by field; target noise starts from `noise`.
  if (j.contains("noise")) from_json(j.at("noise"), s.noise);
  if (j.contains("target_noise")) {
    NoiseSpec t = s.target_noise.value_or(s.noise);
    from_json(j.at("target_noise"), t);
    s.target_noise = t;
  }
  s.view_noise_low = j.value("view_noise_low", s.view_noise_low);
  if (j.contains("blockmatch")) {
    const auto& b = j.at("blockmatch");
    if (b.contains("block")) s.blockmatch.block = index3(b.at("block"));
    if (b.contains("search")) s.blockmatch.search = index3(b.at("search"));
    if (b.contains("window")) s.blockmatch.window = parse_block_window(b.at("window").get<std::string>());
    s.blockmatch.ncc_smooth_sigma = b.value("smooth", s.blockmatch.ncc_smooth_sigma);
    s.blockmatch.subvoxel = b.value("subvoxel", s.blockmatch.subvoxel);
  }
  if (j.contains("densify")) {
    const auto& d = j.at("densify");
    if (d.contains("kernel")) s.densify.kernel = parse_rbf_kernel(d.at("kernel").get<std::string>());
    s.densify.lambda1 = d.value("l1", s.densify.lambda1);
    s.densify.lambda2 = d.value("div", s.densify.lambda2);
    s.densify.div_stride = d.value("div_stride", s.densify.div_stride);
    s.densify.max_iterations = d.value("max_iterations", s.densify.max_iterations);
  }
  s.sparse_noise = j.value("sparse_noise", s.sparse_noise);
  if (j.contains("patch")) {
    const auto p = j.at("patch").get<std::array<int, 4>>();
    s.patch = PatchDims{p[0], p[1], p[2], p[3]};
  }
  if (j.contains("train_stride")) s.train_stride = index3(j.at("train_stride"));
  if (j.contains("infer_stride")) s.infer_stride = index3(j.at("infer_stride"));
  if (j.contains("model")) {
    const auto& m = j.at("model");
    s.hidden_width = m.value("hidden_width", s.hidden_width);
    s.hidden_layers = m.value("hidden_layers", s.hidden_layers);
    s.dropout = m.value("dropout", s.dropout);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    if (l.contains("preset")) {
      const auto p = l.at("preset").get<std::string>();
      if (p == "supervised") s.loss = LossConfig::supervised();
      else if (p == "autoencoder") s.loss = LossConfig::autoencoder();
      else if (p == "semisupervised" || p == "semi-supervised") s.loss = LossConfig::semi_supervised();
      else throw ConfigError("unknown loss preset: " + p);
    }
    s.loss.lambda_recon = l.value("lambda_recon", s.loss.lambda_recon);
    s.loss.lambda_super = l.value("lambda_super", s.loss.lambda_super);
    s.loss.lambda_div = l.value("lambda_div", s.loss.lambda_div);
    s.loss.lambda_loop = l.value("lambda_loop", s.loss.lambda_loop);
    if (l.contains("loop_mode")) s.loss.loop_mode = parse_loop_mode(l.at("loop_mode").get<std::string>());
    if (l.contains("supervised_loss"))
      s.loss.supervised_loss = parse_supervised_loss(l.at("supervised_loss").get<std::string>());
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    s.train.epochs = t.value("epochs", s.train.epochs);
    s.train.batch_size = t.value("batch_size", s.train.batch_size);
    s.train.learning_rate = t.value("learning_rate", s.train.learning_rate);
    s.train.lr_decay = t.value("lr_decay", s.train.lr_decay);
    s.train.supervised_fraction = t.value("supervised_fraction", s.train.supervised_fraction);
    s.train.identity_fraction = t.value("identity_fraction", s.train.identity_fraction);
    s.train.normalize_inputs = t.value("normalize_inputs", s.train.normalize_inputs);
  }
  s.correlation_study = j.value("correlation_study", s.correlation_study);
  s.mixing_rows = j.value("mixing_rows", s.mixing_rows);
  s.seed = j.value("seed", s.seed);
  if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
  s.save_fields = j.value("save_fields", s.save_fields);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["train_cases"] = train_cases;
  j["test_case"] = test_case;
  j["tracking_error_mm"] = {{"input", tracking_json(input_error)}, {"output", tracking_json(output_error)}};
  if (input_error_b) j["tracking_error_mm"]["input_b"] = tracking_json(*input_error_b);
  j["strain_error_pct"] = {{"input", strain_json(input_strain_error)}, {"output", strain_json(output_strain_error)}};
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t e = 0; e < loss_history.size(); ++e) {
    const auto& l = loss_history[e];
    hist.push_back({{"epoch", e}, {"total", l.total}, {"recon", l.recon}, {"super", l.super}, {"div", l.div}, {"loop", l.loop}});
  }
  j["loss_history"] = hist;
  j["mixing_score"] = mixing_score ? nlohmann::json(*mixing_score) : nlohmann::json(nullptr);
  nlohmann::json corr = nlohmann::json::object();
  if (correlation_input) corr["input"] = correlation_json(*correlation_input);
  if (correlation_output) corr["output"] = correlation_json(*correlation_output);
  j["correlation"] = corr;
  return j;
}

double zone_angle(const PhantomCase& phantom, Zone zone) {
  const auto& m = phantom.config.motion;
  switch (zone) {
    case Zone::Infarct: return wrap_angle(m.weak_sector_angle);
    case Zone::Border: return wrap_angle(m.weak_sector_angle + 0.9 * m.weak_sector_width);
    case Zone::Remote: return wrap_angle(m.weak_sector_angle + kPi);
  }
  return 0.0;
}

std::vector<std::pair<Zone, VoxelMask>> phantom_zones(const PhantomCase& phantom) {
  const Grid3& g = phantom.config.grid;
  const auto& m = phantom.config.motion;
  std::vector<std::pair<Zone, VoxelMask>> zones{
      {Zone::Infarct, VoxelMask(g)}, {Zone::Border, VoxelMask(g)}, {Zone::Remote, VoxelMask(g)}};
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!phantom.mask.at(v)) continue;
    const double d = std::abs(wrap_angle(phantom.cylindrical(g.position(g.unravel(v))).second - m.weak_sector_angle));
    const std::size_t z = d <= 0.5 * m.weak_sector_width ? 0 : d <= 1.2 * m.weak_sector_width ? 1 : 2;
    zones[z].second.data[v] = 1;
  }
  return zones;
}

DisplacementField4D make_input(const ExperimentSpec& spec, const GeneratedCase& gc, int view, std::uint64_t seed) {
  const PhantomCase& ph = gc.phantom;
  switch (spec.source) {
    case InputSource::CorruptGt: {
      NoiseSpec n = spec.noise;
      n.seed = mix_seed(seed, static_cast<std::uint64_t>(view));
      if (view == 0) return corrupt(gc.ground_truth, n);
      const auto profile = wall_noise_profile(ph, view == 1 ? WallProfile::Boundary : WallProfile::Interior, 1.0,
                                              spec.view_noise_low);
      return corrupt(gc.ground_truth, n, &profile);
    }
    case InputSource::Densify: {
      auto sparse = gc.sparse;
      std::mt19937_64 rng(mix_seed(seed, 0xD5));
      std::normal_distribution<double> n(0.0, spec.sparse_noise);
      for (auto& tr : sparse)
        for (std::size_t t = 1; t < tr.position.size(); ++t) tr.position[t] += Vec3(n(rng), n(rng), n(rng));
      return densify_ground_truth(sparse, ph.config.grid, spec.densify).lagrangian;
    }
    case InputSource::BlockMatch: {
      std::vector<ScalarVolume> volumes;
      for (int t = 0; t < ph.config.frames; ++t) volumes.push_back(render_speckle(ph, t));
      const VoxelMask roi = dilate(ph.mask, *std::max_element(spec.blockmatch.search.begin(), spec.blockmatch.search.end()) + 1);
      const SequenceTrack track = track_sequence(volumes, &roi, spec.blockmatch);
      return eulerian_to_lagrangian(track.field).field;
    }
  }
  throw ConfigError("unhandled input source");
}

CrystalCube zone_crystals(const PhantomCase& phantom, Zone zone, std::uint64_t seed) {
  const CubeGeometry geo = cube_geometry(phantom, zone);
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(zone)));
  std::normal_distribution<double> n(0.0, kCrystalJitter);
  std::array<Vec3, 8> ref;
  for (int i = 0; i < 8; ++i) ref[static_cast<std::size_t>(i)] = geo.centre + geo.half * (geo.triad * corner(i));
  CrystalCube cube;
  cube.zone = zone;
  for (int t = 0; t < phantom.config.frames; ++t) {
    std::array<Vec3, 8> f;
    for (int i = 0; i < 8; ++i) {
      const Vec3& X = ref[static_cast<std::size_t>(i)];
      f[static_cast<std::size_t>(i)] = X + phantom.displacement(X, t) + Vec3(n(rng), n(rng), n(rng));
    }
    cube.frames.push_back(f);
  }
  return cube;
}

std::vector<CorrelationSample> compare_crystals(const GeneratedCase& gc, const DisplacementField4D& field,
                                                const std::string& condition, std::uint64_t seed) {
  const PhantomCase& ph = gc.phantom;
  const Grid3& g = ph.config.grid;
  std::vector<CorrelationSample> out;
  for (Zone zone : {Zone::Infarct, Zone::Border, Zone::Remote}) {
    const CubeGeometry geo = cube_geometry(ph, zone);
    const CrystalCube cube = zone_crystals(ph, zone, seed);

    // Image-side crystals: the unjittered reference positions carried by the estimated field.
    CrystalCube virtual_cube;
    virtual_cube.zone = zone;
    for (int t = 0; t < field.frames(); ++t) {
      std::array<Vec3, 8> f;
      for (int i = 0; i < 8; ++i) {
        const Vec3 X = geo.centre + geo.half * (geo.triad * corner(i));
        const Vec3 voxel = (X - g.origin).cwiseQuotient(g.spacing);
        f[static_cast<std::size_t>(i)] = X + sample_trilinear(field, t, voxel);
      }
      virtual_cube.frames.push_back(f);
    }

    std::vector<Mat3> crystal_series, image_series;
    for (int t = 0; t < field.frames(); ++t) {
      crystal_series.push_back(cube_strain(cube, t));
      image_series.push_back(cube_strain(virtual_cube, t));
    }
    const PeakSet cp = peaks_of(crystal_series, geo.triad), ip = peaks_of(image_series, geo.triad);
    CorrelationSample s;
    s.case_name = ph.config.name;
    s.condition = condition;
    s.zone = zone;
    s.crystal_peak = cp.projected;
    s.image_peak = ip.projected;
    s.crystal_principal = cp.principal;
    s.image_principal = ip.principal;
    out.push_back(s);
  }
  return out;
}

CorrelationStudy summarize_correlation(std::vector<CorrelationSample> samples) {
  CorrelationStudy s;
  s.samples = std::move(samples);
  std::array<std::vector<double>, 4> xs, ys;
  for (const auto& c : s.samples) {
    for (int a = 0; a < 3; ++a) {
      xs[static_cast<std::size_t>(a)].push_back(c.crystal_peak[a]);
      ys[static_cast<std::size_t>(a)].push_back(c.image_peak[a]);
    }
    xs[3].push_back(c.crystal_principal);
    ys[3].push_back(c.image_principal);
  }
  for (int a = 0; a < 3; ++a) s.r[a] = pearson(xs[static_cast<std::size_t>(a)], ys[static_cast<std::size_t>(a)]);
  s.r_principal = pearson(xs[3], ys[3]);
  return s;
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  stage("config", [&] { spec.validate(); });
  const auto names = spec.case_names();
  const auto test = static_cast<std::size_t>(spec.test_index);
  const bool multiview = spec.regularizer == RegularizerKind::MultiView;
  const bool trained = spec.regularizer != RegularizerKind::None;
  const int view_a = multiview ? 1 : spec.view;

  MetricsReport report;
  report.test_case = names[test];
  for (std::size_t i = 0; i < names.size(); ++i)
    if (i != test) report.train_cases.push_back(names[i]);

  const auto case_config = [&](const std::string& name) {
    PhantomConfig c = named_case(name, spec.grid, spec.frames);
    if (spec.source != InputSource::Densify) c.sparse_count = 16;
    return c;
  };
  const auto case_seed = [&](std::size_t i) { return mix_seed(spec.noise.seed, i); };

  // Only the held-out case is needed without training.
  std::vector<GeneratedCase> cases(names.size());
  std::vector<DisplacementField4D> input_a(names.size()), input_b(names.size());
  stage("generate", [&] {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (trained || i == test) cases[i] = generate_case(case_config(names[i]));
  });
  stage("source", [&] {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!trained && i != test) continue;
      input_a[i] = make_input(spec, cases[i], view_a, case_seed(i));
      if (multiview) input_b[i] = make_input(spec, cases[i], 2, case_seed(i));
    }
    if (spec.target_noise && spec.source == InputSource::CorruptGt && !multiview) {
      ExperimentSpec alt = spec;
      alt.noise = *spec.target_noise;
      input_a[test] = make_input(alt, cases[test], view_a, case_seed(test));
    }
  });

  const GeneratedCase& held = cases[test];
  const VoxelMask& mask = held.phantom.mask;
  std::optional<MlpModel> model;
  Eigen::MatrixXd train_inputs;

  if (trained) {
    stage("train", [&] {
      TrainingSet data;
      std::vector<Eigen::MatrixXd> sup_inputs;
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (i == test) continue;
        const PatchSet clean = extract_patches(cases[i].ground_truth, spec.patch, spec.train_stride, &cases[i].phantom.mask);
        const PatchSet a = extract_patches_at(input_a[i], clean);
        if (multiview) {
          const PatchSet b = extract_patches_at(input_b[i], clean);
          data.append(stack_views({&a, &b}), clean.patches, true, a.patches);
          sup_inputs.push_back(stack_views({&a, &b}));
        } else if (spec.regularizer == RegularizerKind::Autoencoder) {
          data.append(a.patches, Eigen::MatrixXd(), false);
          sup_inputs.push_back(a.patches);
        } else {
          data.append(a.patches, clean.patches, true);
          sup_inputs.push_back(a.patches);
        }
      }
      if (spec.regularizer == RegularizerKind::SemiSupervised) {
        const PatchSet target = extract_patches(input_a[test], spec.patch, spec.train_stride, &mask);
        data.append(target.patches, Eigen::MatrixXd(), false);
      }
      train_inputs = hcat(sup_inputs);

      MlpArchitecture arch;
      arch.patch_dims = spec.patch;
      arch.spacing = spec.grid.spacing;
      arch.views = multiview ? 2 : 1;
      arch.hidden_width = spec.hidden_width;
      arch.hidden_layers = spec.hidden_layers;
      arch.dropout_p = spec.dropout;
      TrainOptions opts = spec.train;
      opts.seed = mix_seed(spec.seed, 2);
      TrainResult r = train(make_mlp(arch, mix_seed(spec.seed, 1)), data, spec.loss, opts);
      report.loss_history = std::move(r.history);
      model = std::move(r.model);
    });
  }

  const auto regularize = [&](const DisplacementField4D& a, const DisplacementField4D& b, const VoxelMask& m) {
    if (!model) return a;
    if (multiview) return fuse_multiview(*model, a, b, spec.infer_stride, &m);
    return regularize_field(*model, a, spec.infer_stride, &m);
  };
  DisplacementField4D output = stage("regularize", [&] { return regularize(input_a[test], input_b[test], mask); });

  stage("metrics", [&] {
    report.input_error = tracking_error(input_a[test], held.ground_truth, &mask);
    report.output_error = tracking_error(output, held.ground_truth, &mask);
    if (multiview) report.input_error_b = tracking_error(input_b[test], held.ground_truth, &mask);
    const LvFrameField lv(mask, Vec3::UnitZ());
    report.input_strain_error = strain_error(input_a[test], held.ground_truth, lv, &mask);
    report.output_strain_error = strain_error(output, held.ground_truth, lv, &mask);

    const DisplacementField4D pt = projected_strain_field(held.ground_truth, lv);
    const DisplacementField4D pi = projected_strain_field(input_a[test], lv);
    const DisplacementField4D po = projected_strain_field(output, lv);
    for (const auto& [zone, zm] : phantom_zones(held.phantom)) {
      ZoneCurve c;
      c.zone = zone;
      for (int t = 0; t < spec.frames; ++t) {
        std::vector<double> a, b, d;
        for (std::size_t v = 0; v < zm.data.size(); ++v)
          if (zm.at(v)) {
            a.push_back(pt.vec(t, v)[0]);
            b.push_back(pi.vec(t, v)[0]);
            d.push_back(po.vec(t, v)[0]);
          }
        if (a.empty()) break;
        c.truth.push_back(median(a));
        c.input.push_back(median(b));
        c.output.push_back(median(d));
      }
      report.zone_curves.push_back(std::move(c));
    }
  });

  if (model) {
    stage("mixing", [&] {
      const PatchSet a = extract_patches(input_a[test], spec.patch, spec.train_stride, &mask);
      Eigen::MatrixXd target = a.patches;
      if (multiview) {
        const PatchSet b = extract_patches_at(input_b[test], a);
        target = stack_views({&a, &b});
      }
      const auto act = export_hidden_activations(
          *model, {spread_columns(train_inputs, spec.mixing_rows), spread_columns(target, spec.mixing_rows)},
          {"synthetic", "target"}, model->hidden_layers() - 1);
      const Eigen::Index na = std::min<Eigen::Index>(spec.mixing_rows, train_inputs.cols());
      MixingResult mix = mixing_diagnostic(act.activations.topRows(na), act.activations.bottomRows(act.activations.rows() - na));
      report.mixing_score = mix.score;
      report.mixing = std::move(mix);
    });
  }

  if (spec.correlation_study) {
    stage("correlation", [&] {
      // Four cases with a weakened sector (others fill in if the list has fewer).
      std::vector<std::string> study;
      for (const auto& n : names)
        if (named_case(n, spec.grid, spec.frames).motion.weak_sector_strength > 0.0 && study.size() < 4) study.push_back(n);
      for (const auto& n : names)
        if (study.size() < 4 && std::find(study.begin(), study.end(), n) == study.end()) study.push_back(n);
      std::vector<CorrelationSample> in, out;
      std::uint64_t k = 0;
      for (const auto& name : study)
        for (const Condition& cond : kConditions) {
          const GeneratedCase gc = generate_case(stressed(case_config(name), cond.factor));
          const std::uint64_t seed = mix_seed(spec.seed, 1000 + k++);
          const DisplacementField4D a = make_input(spec, gc, view_a, seed);
          const DisplacementField4D b = multiview ? make_input(spec, gc, 2, seed) : DisplacementField4D();
          const DisplacementField4D o = regularize(a, b, gc.phantom.mask);
          const auto si = compare_crystals(gc, a, cond.name, seed);
          const auto so = compare_crystals(gc, o, cond.name, seed);
          in.insert(in.end(), si.begin(), si.end());
          out.insert(out.end(), so.begin(), so.end());
        }
      report.correlation_input = summarize_correlation(std::move(in));
      report.correlation_output = summarize_correlation(std::move(out));
    });
  }

  if (!spec.output_dir.empty()) {
    stage("artifacts", [&] {
      const auto& dir = spec.output_dir;
      std::filesystem::create_directories(dir);
      write_text(dir / "report.json", report.to_json().dump(2) + "\n");
      write_text(dir / "spec.json", nlohmann::json(spec).dump(2) + "\n");

      std::ostringstream te;
      te.precision(10);
      te << "frame,input_median,input_iqr,output_median,output_iqr\n";
      for (std::size_t t = 0; t < report.input_error.median.size(); ++t)
        te << t << ',' << report.input_error.median[t] << ',' << report.input_error.iqr[t] << ','
           << report.output_error.median[t] << ',' << report.output_error.iqr[t] << '\n';
      write_text(dir / "tracking_error.csv", te.str());

      std::ostringstream se;
      se.precision(10);
      se << "field,direction,median_pct,iqr_pct\n";
      const char* dirs[] = {"radial", "circumferential", "longitudinal"};
      for (const auto& [label, e] : {std::pair{"input", report.input_strain_error}, std::pair{"output", report.output_strain_error}})
        for (int a = 0; a < 3; ++a) se << label << ',' << dirs[a] << ',' << e.median[a] << ',' << e.iqr[a] << '\n';
      write_text(dir / "strain_error.csv", se.str());

      std::ostringstream lh;
      lh.precision(10);
      lh << "epoch,total,recon,super,div,loop\n";
      for (std::size_t e = 0; e < report.loss_history.size(); ++e) {
        const auto& l = report.loss_history[e];
        lh << e << ',' << l.total << ',' << l.recon << ',' << l.super << ',' << l.div << ',' << l.loop << '\n';
      }
      write_text(dir / "loss_history.csv", lh.str());

      std::ostringstream zc;
      zc.precision(10);
      zc << "zone,frame,truth,input,output\n";
      std::vector<svg::Series> curves;
      for (const auto& c : report.zone_curves) {
        svg::Series truth{std::string(to_string(c.zone)) + " truth", {}, c.truth};
        svg::Series est{std::string(to_string(c.zone)) + " regularized", {}, c.output};
        for (std::size_t t = 0; t < c.truth.size(); ++t) {
          zc << to_string(c.zone) << ',' << t << ',' << c.truth[t] << ',' << c.input[t] << ',' << c.output[t] << '\n';
          truth.x.push_back(static_cast<double>(t));
          est.x.push_back(static_cast<double>(t));
        }
        for (auto& v : truth.y) v *= 100.0;
        for (auto& v : est.y) v *= 100.0;
        curves.push_back(std::move(truth));
        curves.push_back(std::move(est));
      }
      write_text(dir / "zone_curves.csv", zc.str());
      std::ostringstream curve_svg;
      svg::line_plot(curve_svg, curves, {"Radial strain per zone, held-out case", "frame", "radial strain (%)"});
      write_text(dir / "strain_curves.svg", curve_svg.str());

      if (report.correlation_output) {
        std::ostringstream cc;
        cc.precision(10);
        cc << "field,case,condition,zone,crystal_radial,crystal_circumferential,crystal_longitudinal,crystal_principal,"
              "image_radial,image_circumferential,image_longitudinal,image_principal\n";
        for (const auto& [label, st] : {std::pair{"input", &*report.correlation_input}, std::pair{"output", &*report.correlation_output}})
          for (const auto& s : st->samples)
            cc << label << ',' << s.case_name << ',' << s.condition << ',' << to_string(s.zone) << ','
               << s.crystal_peak[0] << ',' << s.crystal_peak[1] << ',' << s.crystal_peak[2] << ',' << s.crystal_principal
               << ',' << s.image_peak[0] << ',' << s.image_peak[1] << ',' << s.image_peak[2] << ',' << s.image_principal
               << '\n';
        write_text(dir / "correlation.csv", cc.str());
        std::vector<svg::Series> pts;
        for (Zone z : {Zone::Infarct, Zone::Border, Zone::Remote}) {
          svg::Series s{to_string(z), {}, {}};
          for (const auto& c : report.correlation_output->samples)
            if (c.zone == z) {
              s.x.push_back(100.0 * c.crystal_principal);
              s.y.push_back(100.0 * c.image_principal);
            }
          pts.push_back(std::move(s));
        }
        svg::PlotStyle st{"Peak principal strain: crystals vs regularized image", "crystal cube (%)", "image (%)"};
        st.identity_line = true;
        std::ostringstream sc;
        svg::scatter_plot(sc, pts, st);
        write_text(dir / "peak_scatter.svg", sc.str());
      }

      if (report.mixing) {
        const MixingResult& mix = *report.mixing;
        std::ostringstream mc;
        mc.precision(10);
        mc << "row,domain,pc1,pc2\n";
        svg::Series a{"synthetic", {}, {}}, b{"target", {}, {}};
        for (Eigen::Index r = 0; r < mix.embedding.rows(); ++r) {
          const int d = mix.domain[static_cast<std::size_t>(r)];
          mc << r << ',' << (d == 0 ? "synthetic" : "target") << ',' << mix.embedding(r, 0) << ',' << mix.embedding(r, 1) << '\n';
          (d == 0 ? a : b).x.push_back(mix.embedding(r, 0));
          (d == 0 ? a : b).y.push_back(mix.embedding(r, 1));
        }
        write_text(dir / "mixing.csv", mc.str());
        std::ostringstream ms;
        svg::scatter_plot(ms, {a, b}, {"Hidden activations, first two principal components", "PC1", "PC2"});
        write_text(dir / "mixing.svg", ms.str());
      }

      if (model) save_checkpoint(dir / "model.mlpc", *model);
      if (spec.save_fields) {
        io::save_field(dir / "truth.dsp4", held.ground_truth);
        io::save_field(dir / "input.dsp4", input_a[test]);
        io::save_field(dir / "output.dsp4", output);
        io::save_mask(dir / "mask.msk3", mask);
      }
    });
  }
  return report;
}

}  // namespace cardiostrain
