#pragma once

#include "cardiostrain/blockmatch.hpp"
#include "cardiostrain/crystals.hpp"
#include "cardiostrain/metrics.hpp"
#include "cardiostrain/mixing.hpp"
#include "cardiostrain/rbf.hpp"
#include "cardiostrain/train.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace cardiostrain {

/// Where the noisy displacement estimate of a case comes from.
enum class InputSource { CorruptGt, Densify, BlockMatch };
enum class RegularizerKind { None, Supervised, Autoencoder, SemiSupervised, MultiView };

InputSource parse_input_source(const std::string& s);
const char* to_string(InputSource s);
RegularizerKind parse_regularizer(const std::string& s);
const char* to_string(RegularizerKind r);

struct ExperimentSpec {
  std::vector<std::string> cases;  // named phantom cases; empty selects all eight
  int test_index = 7;              // held-out case (leave-one-out)
  Grid3 grid{{32, 32, 24}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
  int frames = 16;

  InputSource source = InputSource::CorruptGt;
  RegularizerKind regularizer = RegularizerKind::Supervised;
  int view = 0;  // single-view noise profile: 0 uniform, 1 boundary-heavy, 2 interior-heavy

  NoiseSpec noise{1.0, 0.05, 4.0, 0.0, {1.0, 0.0, 0.0}, 7};
  /// Noise of the unlabelled held-out domain in semi-supervised runs; defaults to `noise`.
  std::optional<NoiseSpec> target_noise;
  /// Multi-view: view A concentrates noise at the walls, view B mid-wall.
  double view_noise_low = 0.15;

  BlockMatchConfig blockmatch;
  DensifyOptions densify{RbfKernel{RbfKernelType::Gaussian, 4.0}, 0.0, 0.0, 2, 10000};
  double sparse_noise = 0.5;  // mm, densify source only

  PatchDims patch{5, 5, 5, 16};
  Index3 train_stride{2, 2, 2};
  Index3 infer_stride{1, 1, 1};
  int hidden_width = 256;
  int hidden_layers = 3;
  double dropout = 0.0;
  LossConfig loss = LossConfig::supervised();
  TrainOptions train{8, 64, 1e-3};

  bool correlation_study = true;
  int mixing_rows = 300;  // per domain
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;  // empty: no artifacts
  bool save_fields = false;

  /// Case names in run order.
  std::vector<std::string> case_names() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentSpec& s);
void from_json(const nlohmann::json& j, ExperimentSpec& s);

/// One crystal-cube vs image comparison (one case x condition x zone).
struct CorrelationSample {
  std::string case_name, condition;
  Zone zone = Zone::Remote;
  Vec3 crystal_peak = Vec3::Zero();  // radial, circumferential, longitudinal peak strain
  Vec3 image_peak = Vec3::Zero();
  double crystal_principal = 0.0;
  double image_principal = 0.0;
};

struct CorrelationStudy {
  std::vector<CorrelationSample> samples;
  Vec3 r = Vec3::Zero();   // Pearson r per direction
  double r_principal = 0.0;
};

struct ZoneCurve {
  Zone zone = Zone::Remote;
  std::vector<double> truth, input, output;  // median radial strain per frame
};

struct MetricsReport {
  std::vector<std::string> train_cases;
  std::string test_case;
  TrackingError input_error, output_error;
  std::optional<TrackingError> input_error_b;  // multi-view: the interior-heavy view
  StrainError input_strain_error, output_strain_error;
  std::vector<LossTerms> loss_history;
  std::optional<double> mixing_score;
  std::optional<MixingResult> mixing;
  std::vector<ZoneCurve> zone_curves;
  std::optional<CorrelationStudy> correlation_input, correlation_output;

  /// Stable report document (no timings) for byte-identical reruns.
  nlohmann::json to_json() const;
};

/// Zone masks of a phantom: infarct around the weakened-sector centre, a border ring next to
/// it and remote myocardium elsewhere, all inside the myocardium mask.
std::vector<std::pair<Zone, VoxelMask>> phantom_zones(const PhantomCase& phantom);

/// Azimuth of the centre of a zone.
double zone_angle(const PhantomCase& phantom, Zone zone);

/// Noisy estimate of a case from the configured source. `view` selects the multi-view noise
/// profile (0: single view, 1: boundary-heavy, 2: interior-heavy).
DisplacementField4D make_input(const ExperimentSpec& spec, const GeneratedCase& gc, int view,
                               std::uint64_t seed);

/// Crystal cube in the mid-wall of a zone, moved by the analytic motion with 0.02 mm jitter.
CrystalCube zone_crystals(const PhantomCase& phantom, Zone zone, std::uint64_t seed);

/// Crystal-based vs image-based peak strains for the zones of one case. The image side
/// tracks the unjittered crystal positions through `field`; principal = largest eigenvalue.
std::vector<CorrelationSample> compare_crystals(const GeneratedCase& gc, const DisplacementField4D& field,
                                                const std::string& condition, std::uint64_t seed);

/// Pearson summary of a sample list.
CorrelationStudy summarize_correlation(std::vector<CorrelationSample> samples);

/// Full pipeline: generate -> source -> (train) -> regularize -> strain -> metrics, and
/// artifacts under spec.output_dir. Failures are rethrown with the stage name prefixed.
MetricsReport run_experiment(const ExperimentSpec& spec);

}  // namespace cardiostrain
