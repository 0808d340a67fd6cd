#pragma once

#include "l2mreg/ghm_solver.hpp"
#include "l2mreg/io.hpp"
#include "l2mreg/plane_extraction.hpp"
#include "l2mreg/wall_association.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace l2mreg {

struct PipelineConfig {
  std::filesystem::path cloud_path;
  std::filesystem::path walls_path;
  std::filesystem::path dtm_path;
  /// Planar ground surfaces in the wall-model schema; replaces the DTM.
  std::filesystem::path ground_model_path;
  std::filesystem::path output_path;
  std::filesystem::path dump_dir;

  double thickness = kDefaultBufferThickness;
  double vertical_margin = kDefaultVerticalMargin;
  double ground_band = kDefaultGroundBand;
  double end_margin = kDefaultEndMargin;
  double t_dis = 0.02;
  double t_alpha = 10.0;
  double radius = 0.5;
  std::size_t min_pairs = 10;
  std::size_t denoise_k = 8;
  double sigma_mult = 2.0;
  std::size_t refit_batch = 64;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int max_iter = 50;
  double tol = 1e-10;
  bool pseudo_plane = true;
  bool skip_vertical = false;
  /// Naive variant: extract planes from the whole wall neighborhood.
  bool skip_localization = false;
  bool metrics = true;
  /// Cap on points per ground correspondence in the coupled solve.
  std::size_t ground_sample_cap = 20000;

  /// Throws InvalidArgument for non-positive thresholds or t_alpha outside
  /// (0, 90).
  void validate() const;
};

struct WallStage {
  std::string wall_id;
  std::vector<std::size_t> neighborhood;
  std::vector<std::size_t> subspace;
  std::optional<PlaneSegment> segment;
  WallDiagnostics diagnostics;
};

struct PipelineResult {
  RegistrationReport report;
  AssociationResult association;
  std::vector<WallStage> walls;
  std::vector<Correspondence> correspondences;
  SolverReport solver;
};

AssociationOptions association_options(const PipelineConfig& config);

/// Association, localization and extraction for every wall (parallel over
/// walls). Per-wall failures are recorded in the diagnostics.
std::vector<WallStage> extract_wall_planes(const PointCloud& cloud, const WallModel& model,
                                           const AssociationResult& association,
                                           const PipelineConfig& config);

/// Ground patches split by nearest wall, each paired with a plane fitted to
/// the DTM surface under its points.
std::vector<Correspondence> build_ground_correspondences(
    const PointCloud& cloud, const WallModel& model, std::span<const std::size_t> ground,
    const DtmGrid& dtm, std::size_t sample_cap);

/// The full registration. `dtm` may be null when the vertical stage is
/// skipped or the pseudo-plane is off without ground data.
PipelineResult run_pipeline(const PointCloud& cloud, const WallModel& model,
                            const DtmGrid* dtm, const PipelineConfig& config);

/// Loads the inputs named in the config, runs the pipeline, writes the
/// report (and stage dumps when requested).
PipelineResult run_pipeline_files(const PipelineConfig& config);

/// Writes per-stage intermediate outputs to `dir`.
void dump_stages(const std::filesystem::path& dir, const PointCloud& cloud,
                 const PipelineResult& result);

}  // namespace l2mreg
