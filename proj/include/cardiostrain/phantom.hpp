#pragma once

#include "cardiostrain/field.hpp"

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace cardiostrain {

/// Analytic motion of a thick-walled cylindrical shell ("myocardium") about the z axis.
///
/// The reference configuration is frame 0. Radial contraction u_r = -a Ri^2 / R is
/// divergence free and moves the inner wall more than the outer wall; longitudinal
/// shortening u_z = -s (z - z_base) is paired with radial thickening s R / 2 so the two
/// together stay divergence free. Torsion rotates each slice by an angle linear in z. All
/// components follow a periodic phase profile p(t) = sin^2(pi (t / (T-1))^gamma), where a
/// regional exponent gamma(phi) models dyssynchrony.
struct MotionParams {
  double inner_radius = 10.0;        // mm, reference
  double outer_radius = 18.0;        // mm, reference
  double z_base = 6.0;               // mm, lower end of the shell (fixed plane)
  double z_apex = 33.0;              // mm, upper end of the shell
  Vec3 axis_center{23.5, 23.5, 0.0}; // mm, (x, y) of the long axis
  double radial_contraction = 0.20;  // inner-wall radial displacement / inner radius at peak
  double torsion = 0.15;             // rad, twist between base and apex at peak
  double longitudinal_shortening = 0.10;  // fraction of shell length at peak
  double dyssynchrony = 0.0;         // amplitude of the regional phase warp
  double dyssynchrony_angle = 0.0;   // rad, latest-activating direction
  double weak_sector_strength = 0.0; // [0, 1): amplitude loss in the weakened sector
  double weak_sector_angle = 0.0;    // rad, centre of the weakened sector
  double weak_sector_width = 0.8;    // rad, Gaussian width of the weakened sector
  Vec3 translation{0.0, 0.0, 0.0};   // mm, rigid translation at peak phase

  void validate() const;
};

struct PhantomConfig {
  std::string name = "normal";
  Grid3 grid{{48, 48, 40}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
  int frames = 16;
  MotionParams motion;
  int sparse_count = 2250;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const PhantomConfig& c);
void from_json(const nlohmann::json& j, PhantomConfig& c);

/// Material point sampled through the cycle.
struct SparseTrajectory {
  Vec3 reference;              // mm, frame-0 position
  std::vector<Vec3> position;  // mm, per frame
};

struct PhantomCase {
  PhantomConfig config;
  VoxelMask mask;  // myocardium at frame 0

  /// Lagrangian displacement (mm) of the material point at reference position X.
  Vec3 displacement(const Vec3& X, int t) const;
  /// Phase profile p(t) in [0, 1] at azimuth phi (includes the weakened-sector scaling).
  double phase(int t, double phi) const;
  /// Global phase profile used by torsion and translation.
  double global_phase(int t) const;
  /// Frame-t position of a point observed at spatial position x (inverse motion).
  Vec3 reference_of(const Vec3& x, int t) const;
  /// Radius (mm) from the long axis and azimuth of a point.
  std::pair<double, double> cylindrical(const Vec3& X) const;
};

struct GeneratedCase {
  PhantomCase phantom;
  DisplacementField4D ground_truth;  // Lagrangian
  std::vector<SparseTrajectory> sparse;
};

GeneratedCase generate_case(const PhantomConfig& config);

/// The eight named configurations used for leave-one-out experiments.
std::vector<PhantomConfig> named_cases(const Grid3& grid, int frames);
PhantomConfig named_case(const std::string& name, const Grid3& grid, int frames);

/// Writes sparse trajectories as CSV rows (id, frame, x, y, z, ux, uy, uz).
void write_trajectories_csv(std::ostream& os, const std::vector<SparseTrajectory>& sparse);
std::vector<SparseTrajectory> read_trajectories_csv(std::istream& is);

struct NoiseSpec {
  double gaussian_sigma = 0.0;   // mm
  double outlier_fraction = 0.0; // of voxel trajectories
  double outlier_sigma = 4.0;    // mm
  double drift_per_frame = 0.0;  // mm / frame along drift_direction
  Vec3 drift_direction{1.0, 0.0, 0.0};
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const NoiseSpec& n);
void from_json(const nlohmann::json& j, NoiseSpec& n);

/// Corrupts a Lagrangian field: per-voxel noise scaled by `voxel_scale` (if given), outlier
/// trajectories, and linear drift. Frame 0 stays zero; output depends only on the seed.
DisplacementField4D corrupt(const DisplacementField4D& field, const NoiseSpec& spec,
                            const std::vector<double>* voxel_scale = nullptr);

enum class WallProfile { Uniform, Boundary, Interior };

/// Per-voxel noise multipliers concentrating noise near the endo/epicardial surfaces
/// (Boundary) or in the mid-wall (Interior). Multipliers are `high` in the favoured band and
/// `low` elsewhere.
std::vector<double> wall_noise_profile(const PhantomCase& phantom, WallProfile profile,
                                       double high = 1.0, double low = 0.15);

/// Seeded speckle-like texture warped by the ground-truth motion to frame t.
ScalarVolume render_speckle(const PhantomCase& phantom, int t);

/// Deterministic per-index seed derivation (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace cardiostrain
