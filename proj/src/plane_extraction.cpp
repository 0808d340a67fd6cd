#include "l2mreg/plane_extraction.hpp"

#include "l2mreg/error.hpp"

#include <algorithm>
#include <numeric>

namespace l2mreg {

std::vector<PlaneFit> extract_candidate_planes(std::span<const Vec3> points,
                                               std::span<const std::size_t> subspace,
                                               double t_dis, double t_alpha,
                                               std::size_t min_inliers,
                                               std::uint64_t seed,
                                               std::size_t hypotheses,
                                               std::size_t max_planes) {
  if (subspace.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty subspace");
  }
  RansacOptions ransac;
  ransac.t_dis = t_dis;
  ransac.min_inliers = min_inliers;
  ransac.hypotheses = hypotheses;
  std::vector<std::size_t> remaining(subspace.begin(), subspace.end());
  std::vector<PlaneFit> candidates;
  for (std::size_t round = 0; round < max_planes; ++round) {
    ransac.seed = seed + round * 0xd1b54a32d192ed03ULL;
    auto fit = ransac_largest_plane(points, remaining, ransac);
    if (!fit) break;
    // Inliers are a sorted subsequence of `remaining`.
    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - fit->inliers.size());
    std::set_difference(remaining.begin(), remaining.end(), fit->inliers.begin(),
                        fit->inliers.end(), std::back_inserter(rest));
    remaining = std::move(rest);
    if (verticality_angle(fit->plane) > t_alpha) candidates.push_back(std::move(*fit));
  }
  if (candidates.empty()) {
    throw Error(ErrorKind::kNoCandidates, "no facade-like plane in the subspace");
  }
  return candidates;
}

std::vector<MergedPlane> cluster_and_merge(std::span<const Vec3> points,
                                           std::span<const PlaneFit> candidates,
                                           double t_theta) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].inliers.size() > candidates[b].inliers.size();
  });
  struct Cluster {
    Vec3 representative;
    std::vector<std::size_t> indices;
  };
  std::vector<Cluster> clusters;
  for (std::size_t c : order) {
    const PlaneFit& cand = candidates[c];
    auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& cl) {
      return rotation_angle_between_normals(cl.representative, cand.plane.normal) <= t_theta;
    });
    if (it == clusters.end()) {
      clusters.push_back({cand.plane.normal, cand.inliers});
    } else {
      it->indices.insert(it->indices.end(), cand.inliers.begin(), cand.inliers.end());
    }
  }
  std::vector<MergedPlane> merged;
  for (auto& cl : clusters) {
    std::sort(cl.indices.begin(), cl.indices.end());
    cl.indices.erase(std::unique(cl.indices.begin(), cl.indices.end()), cl.indices.end());
    merged.push_back({fit_plane(points, cl.indices), std::move(cl.indices)});
  }
  return merged;
}

namespace {

double mean_distance(std::span<const Vec3> points, const MergedPlane& m) {
  double sum = 0.0;
  for (std::size_t i : m.indices) sum += point_plane_distance(points[i], m.plane);
  return sum / static_cast<double>(m.indices.size());
}

}  // namespace

PlaneSegment grow_seed_plane(std::span<const Vec3> points,
                             std::span<const MergedPlane> merged,
                             const GcParams& gc, std::size_t refit_batch) {
  if (merged.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no merged planes to grow from");
  }
  refit_batch = std::max<std::size_t>(1, refit_batch);
  std::size_t seed = 0;
  double seed_mean = mean_distance(points, merged[0]);
  for (std::size_t k = 1; k < merged.size(); ++k) {
    const double mean = mean_distance(points, merged[k]);
    const std::size_t n = merged[k].indices.size();
    const std::size_t best_n = merged[seed].indices.size();
    if (n > best_n || (n == best_n && mean < seed_mean)) {
      seed = k;
      seed_mean = mean;
    }
  }

  std::vector<std::size_t> members = merged[seed].indices;
  PlaneMoments moments(points[members.front()]);
  for (std::size_t i : members) moments.add(points[i]);
  PlaneParams reference = merged[seed].plane;

  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < merged.size(); ++k) {
    if (k == seed) continue;
    candidates.insert(candidates.end(), merged[k].indices.begin(), merged[k].indices.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::size_t pending = 0;
  for (std::size_t i : candidates) {
    const Vec3& p = points[i];
    if (!(point_plane_distance(p, reference) < gc.t_dis)) continue;
    PlaneMoments trial = moments;
    trial.add(p);
    const PlaneParams updated = trial.fit();
    if (!(rotation_angle_between_normals(reference.normal, updated.normal) < gc.t_theta)) {
      continue;
    }
    moments = trial;
    members.push_back(i);
    if (++pending == refit_batch) {
      reference = updated;
      pending = 0;
    }
  }

  PlaneSegment segment;
  segment.plane = moments.fit();
  for (std::size_t i : members) {
    if (point_plane_distance(points[i], segment.plane) <= gc.t_dis) {
      segment.indices.push_back(i);
    }
  }
  std::sort(segment.indices.begin(), segment.indices.end());
  return segment;
}

PlaneSegment extract_wall_segment(std::span<const Vec3> points,
                                  std::span<const std::size_t> subspace,
                                  const WallSurface& wall,
                                  const ExtractParams& params,
                                  std::uint64_t seed) {
  std::vector<std::size_t> sorted(subspace.begin(), subspace.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t min_inliers =
      params.min_inliers > 0 ? params.min_inliers : default_min_inliers(sorted.size());
  const auto candidates =
      extract_candidate_planes(points, sorted, params.t_dis, params.t_alpha, min_inliers,
                               seed, params.hypotheses, params.max_planes);
  const GcParams gc = GcParams::from_alpha(params.t_dis, params.t_alpha);
  const auto merged = cluster_and_merge(points, candidates, gc.t_theta);
  PlaneSegment segment = grow_seed_plane(points, merged, gc, params.refit_batch);
  segment.wall_id = wall.id;
  if (rotation_angle_between_normals(segment.plane.normal, wall.plane.normal) >
      params.max_model_angle) {
    throw Error(ErrorKind::kModelNormalMismatch,
                "extracted segment deviates from the model plane by more than " +
                    std::to_string(params.max_model_angle) + " degrees",
                wall.id);
  }
  return segment;
}

}  // namespace l2mreg
