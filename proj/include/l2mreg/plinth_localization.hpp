#pragma once

#include "l2mreg/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace l2mreg {

struct CutoffRange {
  double z_min = 0.0;
  double z_max = 0.0;

  bool contains(double z) const { return z >= z_min && z <= z_max; }
};

struct PlaneFit {
  PlaneParams plane;
  /// Indices into the point array the fit was run on.
  std::vector<std::size_t> inliers;
};

struct RansacOptions {
  double t_dis = 0.02;
  std::size_t min_inliers = 50;
  std::size_t hypotheses = 1000;
  /// Hypotheses are scored on a fixed random subset of at most this many
  /// candidates; the winning plane is then evaluated on all of them.
  std::size_t score_sample_cap = 200000;
  std::uint64_t seed = 0;
};

/// Plane with the most inliers among the sampled hypotheses, refit once on
/// its inliers. Inliers are the candidates within t_dis of the refit plane.
/// nullopt when fewer than min_inliers support the best plane.
std::optional<PlaneFit> ransac_largest_plane(std::span<const Vec3> points,
                                             std::span<const std::size_t> candidates,
                                             const RansacOptions& options);
std::optional<PlaneFit> ransac_largest_plane(std::span<const Vec3> points,
                                             const RansacOptions& options);

/// Nearest-rank 10th and 90th percentiles. Requires at least two values.
CutoffRange percentile_band(std::vector<double> z);

/// Nearest-rank percentile (p in (0, 1]) of the values.
double nearest_rank_percentile(std::vector<double>& values, double p);

struct LocalizeParams {
  double t_dis = 0.02;
  double t_alpha = 10.0;
  /// 0 selects max(50, 1% of the neighborhood size).
  std::size_t min_inliers = 0;
  int max_rounds = 20;
  std::size_t hypotheses = 1000;
};

std::size_t default_min_inliers(std::size_t neighborhood_size);

struct LocalizeResult {
  /// Indices of the input neighborhood whose Z lies inside `range`.
  std::vector<std::size_t> subspace;
  CutoffRange range;
  /// Plane of the last valid extraction.
  PlaneParams plane;
  int valid_rounds = 0;
};

/// Iterative cut-off height estimation. Each round extracts the largest
/// plane; a steep one (verticality > t_alpha) marks the round valid and
/// drops its inliers and every point above its 10th-percentile height. The
/// loop ends at the first invalid extraction (none found, or not steep
/// enough) or at max_rounds. The band of the last valid plane selects the
/// subspace. Throws NoValidFacade when the first extraction is already
/// invalid.
LocalizeResult localize_representative_subspace(std::span<const Vec3> points,
                                                std::span<const std::size_t> neighborhood,
                                                const LocalizeParams& params,
                                                std::uint64_t seed);

/// Per-wall RNG seed, independent of scheduling.
std::uint64_t wall_seed(std::uint64_t global_seed, std::string_view wall_id);

}  // namespace l2mreg
