#pragma once

#include "l2mreg/geometry.hpp"
#include "l2mreg/io.hpp"
#include "l2mreg/plinth_localization.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace l2mreg {

struct PlaneSegment {
  std::vector<std::size_t> indices;
  PlaneParams plane;
  std::string wall_id;
};

/// Geometric-consistency thresholds for seed growth. The angular threshold
/// is half the facade threshold.
struct GcParams {
  double t_dis = 0.02;
  double t_theta = 5.0;

  static GcParams from_alpha(double t_dis, double t_alpha) {
    return {t_dis, 0.5 * t_alpha};
  }
};

struct MergedPlane {
  PlaneParams plane;
  std::vector<std::size_t> indices;
};

struct ExtractParams {
  double t_dis = 0.02;
  double t_alpha = 10.0;
  /// 0 selects max(50, 1% of the subspace size).
  std::size_t min_inliers = 0;
  std::size_t hypotheses = 1000;
  std::size_t max_planes = 32;
  /// Accepted points between seed-plane re-estimates; 1 reproduces the
  /// point-by-point update.
  std::size_t refit_batch = 64;
  double max_model_angle = 30.0;
};

/// RANSAC planes extracted one after another (inliers removed between
/// rounds) until none is found; only steep planes (verticality > t_alpha)
/// are kept. Throws NoCandidates when none survives.
std::vector<PlaneFit> extract_candidate_planes(std::span<const Vec3> points,
                                               std::span<const std::size_t> subspace,
                                               double t_dis, double t_alpha,
                                               std::size_t min_inliers,
                                               std::uint64_t seed,
                                               std::size_t hypotheses = 1000,
                                               std::size_t max_planes = 32);

/// Greedy normal clustering in descending inlier count: a candidate joins
/// the first cluster whose representative normal lies within t_theta
/// (folded angle), otherwise it founds a cluster. Each cluster is refit
/// over the union of its members' inliers.
std::vector<MergedPlane> cluster_and_merge(std::span<const Vec3> points,
                                           std::span<const PlaneFit> candidates,
                                           double t_theta);

/// Grows the largest merged plane with points from the other merged planes
/// (ascending index order) that pass the geometric-consistency test, then
/// refits and keeps members within t_dis.
PlaneSegment grow_seed_plane(std::span<const Vec3> points,
                             std::span<const MergedPlane> merged,
                             const GcParams& gc, std::size_t refit_batch = 64);

/// Candidate extraction, clustering and growth for one wall. Rejects the
/// segment when its normal deviates from the wall normal by more than
/// max_model_angle (ModelNormalMismatch).
PlaneSegment extract_wall_segment(std::span<const Vec3> points,
                                  std::span<const std::size_t> subspace,
                                  const WallSurface& wall,
                                  const ExtractParams& params,
                                  std::uint64_t seed);

}  // namespace l2mreg
