#include "cardiostrain/phantom.hpp"

#include "cardiostrain/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace cardiostrain {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void MotionParams::validate() const {
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius))
    throw ConfigError("need 0 < inner radius < outer radius");
  if (!(z_apex > z_base)) throw ConfigError("need z_base < z_apex");
  if (radial_contraction < 0.0 || radial_contraction > 0.6)
    throw ConfigError("radial contraction must lie in [0, 0.6]");
  if (longitudinal_shortening < 0.0 || longitudinal_shortening >= 0.5)
    throw ConfigError("longitudinal shortening must lie in [0, 0.5)");
  if (std::abs(torsion) > 1.0) throw ConfigError("|torsion| must be <= 1 rad");
  if (dyssynchrony < 0.0 || dyssynchrony > 2.0) throw ConfigError("dyssynchrony must lie in [0, 2]");
  if (weak_sector_strength < 0.0 || weak_sector_strength >= 1.0)
    throw ConfigError("weak sector strength must lie in [0, 1)");
  if (!(weak_sector_width > 0.0)) throw ConfigError("weak sector width must be positive");
  const double bound = radial_contraction * inner_radius +
                       0.5 * longitudinal_shortening * outer_radius +
                       longitudinal_shortening * (z_apex - z_base) +
                       std::abs(torsion) * outer_radius + translation.norm();
  if (!(bound < outer_radius)) throw ConfigError("motion amplitudes exceed the outer radius");
}

void PhantomConfig::validate() const {
  grid.validate();
  if (frames < 2) throw ConfigError("phantom needs at least two frames");
  if (sparse_count < 1) throw ConfigError("sparse trajectory count must be >= 1");
  motion.validate();
}

std::pair<double, double> PhantomCase::cylindrical(const Vec3& X) const {
  const double dx = X.x() - config.motion.axis_center.x();
  const double dy = X.y() - config.motion.axis_center.y();
  return {std::hypot(dx, dy), std::atan2(dy, dx)};
}

double PhantomCase::global_phase(int t) const {
  const int T = config.frames;
  if (t <= 0 || t >= T - 1) return 0.0;
  const double s = static_cast<double>(t) / (T - 1);
  const double v = std::sin(kPi * s);
  return v * v;
}

double PhantomCase::phase(int t, double phi) const {
  const int T = config.frames;
  if (t <= 0 || t >= T - 1) return 0.0;
  const auto& m = config.motion;
  const double s = static_cast<double>(t) / (T - 1);
  const double gamma = std::exp(m.dyssynchrony * std::cos(phi - m.dyssynchrony_angle));
  const double v = std::sin(kPi * std::pow(s, gamma));
  const double d = wrap_angle(phi - m.weak_sector_angle) / m.weak_sector_width;
  const double scale = 1.0 - m.weak_sector_strength * std::exp(-0.5 * d * d);
  return scale * v * v;
}

Vec3 PhantomCase::displacement(const Vec3& X, int t) const {
  const auto& m = config.motion;
  const auto [R, phi] = cylindrical(X);
  const double p = phase(t, phi);
  const double pg = global_phase(t);
  if (p == 0.0 && pg == 0.0) return Vec3::Zero();

  // Radial: -a Ri^2 / R outside the core, linear continuation inside R0 = Ri / 2.
  const double r0 = 0.5 * m.inner_radius;
  const double shape = R >= r0 ? 1.0 / R : R / (r0 * r0);
  const double ur = p * (-m.radial_contraction * m.inner_radius * m.inner_radius * shape +
                         0.5 * m.longitudinal_shortening * R);
  const double c = std::cos(phi), s = std::sin(phi);
  const Eigen::Vector2d after_radial((R + ur) * c, (R + ur) * s);

  const double zmid = 0.5 * (m.z_base + m.z_apex);
  const double theta = m.torsion * pg * (X.z() - zmid) / (m.z_apex - m.z_base);
  const double ct = std::cos(theta), st = std::sin(theta);
  const Eigen::Vector2d twist((ct - 1.0) * after_radial.x() - st * after_radial.y(),
                              st * after_radial.x() + (ct - 1.0) * after_radial.y());

  Vec3 u(ur * c + twist.x(), ur * s + twist.y(),
         -m.longitudinal_shortening * p * (X.z() - m.z_base));
  return u + pg * m.translation;
}

Vec3 PhantomCase::reference_of(const Vec3& x, int t) const {
  Vec3 X = x;
  for (int it = 0; it < 100; ++it) {
    const Vec3 next = x - displacement(X, t);
    const double step = (next - X).norm();
    X = next;
    if (step < 1e-12) break;
  }
  return X;
}

GeneratedCase generate_case(const PhantomConfig& config) {
  config.validate();
  GeneratedCase out{PhantomCase{config, VoxelMask(config.grid)},
                    DisplacementField4D(config.grid, config.frames, FrameKind::Lagrangian),
                    {}};
  const PhantomCase& ph = out.phantom;
  const Grid3& g = config.grid;
  const auto& m = config.motion;

  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    const Vec3 X = g.position(g.unravel(v));
    const auto [R, phi] = ph.cylindrical(X);
    out.phantom.mask.data[v] = (R >= m.inner_radius && R <= m.outer_radius &&
                                X.z() >= m.z_base && X.z() <= m.z_apex) ? 1 : 0;
  }

  parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) {
      const Vec3 X = g.position(g.unravel(v));
      for (int t = 0; t < config.frames; ++t) out.ground_truth.vec(t, v) = ph.displacement(X, t);
    }
  });

  std::mt19937_64 rng(mix_seed(config.seed, 0xA11CE));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double ri2 = m.inner_radius * m.inner_radius, ro2 = m.outer_radius * m.outer_radius;
  out.sparse.reserve(static_cast<std::size_t>(config.sparse_count));
  for (int n = 0; n < config.sparse_count; ++n) {
    const double R = std::sqrt(ri2 + (ro2 - ri2) * u01(rng));
    const double phi = 2.0 * kPi * u01(rng);
    const double z = m.z_base + (m.z_apex - m.z_base) * u01(rng);
    SparseTrajectory tr;
    tr.reference = Vec3(m.axis_center.x() + R * std::cos(phi), m.axis_center.y() + R * std::sin(phi), z);
    for (int t = 0; t < config.frames; ++t) tr.position.push_back(tr.reference + ph.displacement(tr.reference, t));
    out.sparse.push_back(std::move(tr));
  }
  return out;
}

std::vector<PhantomConfig> named_cases(const Grid3& grid, int frames) {
  std::vector<PhantomConfig> cases;
  for (const char* name : {"normal", "lad-distal", "lad-proximal", "lcx", "rca", "sync", "lbbb",
                           "lbbb-small"})
    cases.push_back(named_case(name, grid, frames));
  return cases;
}

PhantomConfig named_case(const std::string& name, const Grid3& grid, int frames) {
  PhantomConfig c;
  c.name = name;
  c.grid = grid;
  c.frames = frames;
  auto& m = c.motion;
  const Vec3 extent = grid.spacing.cwiseProduct(Vec3(grid.dims[0] - 1, grid.dims[1] - 1, grid.dims[2] - 1));
  const Vec3 centre = grid.origin + 0.5 * extent;
  const double half = 0.5 * std::min(extent.x(), extent.y());
  m.axis_center = Vec3(centre.x(), centre.y(), 0.0);
  m.inner_radius = 0.42 * half;
  m.outer_radius = 0.76 * half;
  m.z_base = grid.origin.z() + 0.15 * extent.z();
  m.z_apex = grid.origin.z() + 0.85 * extent.z();

  const bool dilated = name == "sync" || name == "lbbb" || name == "lbbb-small";
  if (dilated) {
    m.inner_radius = 0.48 * half;
    m.outer_radius = 0.80 * half;
    m.radial_contraction = 0.14;
    m.longitudinal_shortening = 0.07;
    m.torsion = 0.10;
  }

  static const std::vector<std::string> order{"normal", "lad-distal", "lad-proximal", "lcx",
                                              "rca", "sync", "lbbb", "lbbb-small"};
  const auto it = std::find(order.begin(), order.end(), name);
  if (it == order.end()) throw ConfigError("unknown phantom case: " + name);
  c.seed = 101 + static_cast<std::uint64_t>(it - order.begin());

  if (name == "lad-distal") {
    m.weak_sector_strength = 0.45;
    m.weak_sector_angle = 0.5 * kPi;
  } else if (name == "lad-proximal") {
    m.weak_sector_strength = 0.7;
    m.weak_sector_angle = 0.5 * kPi;
    m.weak_sector_width = 1.2;
  } else if (name == "lcx") {
    m.weak_sector_strength = 0.6;
    m.weak_sector_angle = kPi;
  } else if (name == "rca") {
    m.weak_sector_strength = 0.6;
    m.weak_sector_angle = -0.5 * kPi;
  } else if (name == "lbbb") {
    m.dyssynchrony = 0.6;
    m.dyssynchrony_angle = 0.0;
  } else if (name == "lbbb-small") {
    m.dyssynchrony = 0.3;
    m.dyssynchrony_angle = 0.25 * kPi;
  }
  return c;
}

void write_trajectories_csv(std::ostream& os, const std::vector<SparseTrajectory>& sparse) {
  os << "id,frame,x,y,z,ux,uy,uz\n";
  os.precision(17);
  for (std::size_t id = 0; id < sparse.size(); ++id) {
    const auto& tr = sparse[id];
    for (std::size_t t = 0; t < tr.position.size(); ++t) {
      const Vec3& x = tr.position[t];
      const Vec3 u = x - tr.reference;
      os << id << ',' << t << ',' << x.x() << ',' << x.y() << ',' << x.z() << ',' << u.x() << ','
         << u.y() << ',' << u.z() << '\n';
    }
  }
}

std::vector<SparseTrajectory> read_trajectories_csv(std::istream& is) {
  std::vector<SparseTrajectory> out;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty trajectory CSV");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t id = 0, frame = 0;
    double v[6];
    char comma;
    ss >> id >> comma >> frame;
    for (double& x : v) ss >> comma >> x;
    if (!ss) throw FormatError("malformed trajectory row: " + line);
    if (id >= out.size()) out.resize(id + 1);
    auto& tr = out[id];
    if (frame != tr.position.size()) throw FormatError("trajectory frames must be consecutive");
    const Vec3 x(v[0], v[1], v[2]), u(v[3], v[4], v[5]);
    if (frame == 0) tr.reference = x - u;
    tr.position.push_back(x);
  }
  return out;
}

void NoiseSpec::validate() const {
  if (gaussian_sigma < 0.0 || outlier_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  if (outlier_fraction < 0.0 || outlier_fraction > 1.0)
    throw ConfigError("outlier fraction must lie in [0, 1]");
  if (drift_per_frame != 0.0 && !(drift_direction.norm() > 0.0))
    throw ConfigError("drift direction must be non-zero");
}

DisplacementField4D corrupt(const DisplacementField4D& field, const NoiseSpec& spec,
                            const std::vector<double>* voxel_scale) {
  spec.validate();
  const Grid3& g = field.grid();
  if (voxel_scale && voxel_scale->size() != g.voxel_count())
    throw DimensionError("noise scale map size differs from grid");
  DisplacementField4D out = field;
  const Vec3 drift = spec.drift_per_frame == 0.0
                         ? Vec3::Zero()
                         : Vec3(spec.drift_per_frame * spec.drift_direction.normalized());

  parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t v = b; v < e; ++v) {
      std::mt19937_64 rng(mix_seed(spec.seed, v));
      const bool outlier = u01(rng) < spec.outlier_fraction;
      const double scale = voxel_scale ? (*voxel_scale)[v] : 1.0;
      const double sigma = (outlier ? spec.outlier_sigma : spec.gaussian_sigma) * scale;
      for (int t = 1; t < field.frames(); ++t) {
        Vec3 n;
        for (int c = 0; c < 3; ++c) n[c] = normal(rng);
        out.vec(t, v) += sigma * n + static_cast<double>(t) * drift;
      }
    }
  });
  return out;
}

std::vector<double> wall_noise_profile(const PhantomCase& phantom, WallProfile profile,
                                       double high, double low) {
  const Grid3& g = phantom.config.grid;
  const auto& m = phantom.config.motion;
  const double band = 0.25 * (m.outer_radius - m.inner_radius);
  std::vector<double> scale(g.voxel_count(), 1.0);
  if (profile == WallProfile::Uniform) return scale;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    const auto [R, phi] = phantom.cylindrical(g.position(g.unravel(v)));
    const bool near_surface = std::abs(R - m.inner_radius) < band || std::abs(R - m.outer_radius) < band;
    const bool mid_wall = !near_surface && R > m.inner_radius && R < m.outer_radius;
    const bool favoured = profile == WallProfile::Boundary ? near_surface : mid_wall;
    scale[v] = favoured ? high : low;
  }
  return scale;
}

ScalarVolume render_speckle(const PhantomCase& phantom, int t) {
  const Grid3& g = phantom.config.grid;
  ScalarVolume white(g), coarse(g);
  std::mt19937_64 rng(mix_seed(phantom.config.seed, 0x5BEC));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : white.data) x = normal(rng);
  for (auto& x : coarse.data) x = normal(rng);
  const ScalarVolume texture = gaussian_smooth(white, 1.0);
  const ScalarVolume background = gaussian_smooth(coarse, 3.0);

  double sum = 0.0, sum2 = 0.0, n = 0.0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!phantom.mask.at(v)) continue;
    sum += texture.data[v];
    sum2 += texture.data[v] * texture.data[v];
    n += 1.0;
  }
  const double mean = n > 0 ? sum / n : 0.0;
  const double sd = n > 1 ? std::sqrt(std::max(1e-30, sum2 / n - mean * mean)) : 1.0;

  ScalarVolume base(g);
  for (std::size_t v = 0; v < g.voxel_count(); ++v)
    base.data[v] = phantom.mask.at(v) ? (texture.data[v] - mean) / sd : 0.25 * background.data[v];
  if (t == 0) return base;

  ScalarVolume out(g);
  parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) {
      const Vec3 X = phantom.reference_of(g.position(g.unravel(v)), t);
      out.data[v] = sample_trilinear(base, g.to_voxel(X));
    }
  });
  return out;
}

void to_json(nlohmann::json& j, const PhantomConfig& c) {
  const auto& m = c.motion;
  auto v3 = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  j = nlohmann::json{
      {"name", c.name},
      {"grid", {{"dims", c.grid.dims}, {"spacing", v3(c.grid.spacing)}, {"origin", v3(c.grid.origin)}}},
      {"frames", c.frames},
      {"sparse_count", c.sparse_count},
      {"seed", c.seed},
      {"motion",
       {{"inner_radius", m.inner_radius},
        {"outer_radius", m.outer_radius},
        {"z_base", m.z_base},
        {"z_apex", m.z_apex},
        {"axis_center", v3(m.axis_center)},
        {"radial_contraction", m.radial_contraction},
        {"torsion", m.torsion},
        {"longitudinal_shortening", m.longitudinal_shortening},
        {"dyssynchrony", m.dyssynchrony},
        {"dyssynchrony_angle", m.dyssynchrony_angle},
        {"weak_sector_strength", m.weak_sector_strength},
        {"weak_sector_angle", m.weak_sector_angle},
        {"weak_sector_width", m.weak_sector_width},
        {"translation", v3(m.translation)}}}};
}

void from_json(const nlohmann::json& j, PhantomConfig& c) {
  auto v3 = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 3) throw ConfigError("expected a 3-vector");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  // Named cases provide defaults that explicit fields override.
  if (j.contains("case")) {
    Grid3 grid = c.grid;
    if (j.contains("grid")) {
      const auto& gj = j.at("grid");
      if (gj.contains("dims")) grid.dims = gj.at("dims").get<Index3>();
      if (gj.contains("spacing")) grid.spacing = v3(gj.at("spacing"));
      if (gj.contains("origin")) grid.origin = v3(gj.at("origin"));
    }
    c = named_case(j.at("case").get<std::string>(), grid, j.value("frames", c.frames));
  }
  c.name = j.value("name", c.name);
  if (j.contains("grid")) {
    const auto& gj = j.at("grid");
    if (gj.contains("dims")) c.grid.dims = gj.at("dims").get<Index3>();
    if (gj.contains("spacing")) c.grid.spacing = v3(gj.at("spacing"));
    if (gj.contains("origin")) c.grid.origin = v3(gj.at("origin"));
  }
  c.frames = j.value("frames", c.frames);
  c.sparse_count = j.value("sparse_count", c.sparse_count);
  c.seed = j.value("seed", c.seed);
  if (j.contains("motion")) {
    const auto& mj = j.at("motion");
    auto& m = c.motion;
    m.inner_radius = mj.value("inner_radius", m.inner_radius);
    m.outer_radius = mj.value("outer_radius", m.outer_radius);
    m.z_base = mj.value("z_base", m.z_base);
    m.z_apex = mj.value("z_apex", m.z_apex);
    if (mj.contains("axis_center")) m.axis_center = v3(mj.at("axis_center"));
    m.radial_contraction = mj.value("radial_contraction", m.radial_contraction);
    m.torsion = mj.value("torsion", m.torsion);
    m.longitudinal_shortening = mj.value("longitudinal_shortening", m.longitudinal_shortening);
    m.dyssynchrony = mj.value("dyssynchrony", m.dyssynchrony);
    m.dyssynchrony_angle = mj.value("dyssynchrony_angle", m.dyssynchrony_angle);
    m.weak_sector_strength = mj.value("weak_sector_strength", m.weak_sector_strength);
    m.weak_sector_angle = mj.value("weak_sector_angle", m.weak_sector_angle);
    m.weak_sector_width = mj.value("weak_sector_width", m.weak_sector_width);
    if (mj.contains("translation")) m.translation = v3(mj.at("translation"));
  }
}

void to_json(nlohmann::json& j, const NoiseSpec& n) {
  j = nlohmann::json{{"gaussian_sigma", n.gaussian_sigma},
                     {"outlier_fraction", n.outlier_fraction},
                     {"outlier_sigma", n.outlier_sigma},
                     {"drift_per_frame", n.drift_per_frame},
                     {"drift_direction", {n.drift_direction.x(), n.drift_direction.y(), n.drift_direction.z()}},
                     {"seed", n.seed}};
}

void from_json(const nlohmann::json& j, NoiseSpec& n) {
  n.gaussian_sigma = j.value("gaussian_sigma", n.gaussian_sigma);
  n.outlier_fraction = j.value("outlier_fraction", n.outlier_fraction);
  n.outlier_sigma = j.value("outlier_sigma", n.outlier_sigma);
  n.drift_per_frame = j.value("drift_per_frame", n.drift_per_frame);
  if (j.contains("drift_direction")) {
    const auto& a = j.at("drift_direction");
    n.drift_direction = Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
  }
  n.seed = j.value("seed", n.seed);
}

}  // namespace cardiostrain
