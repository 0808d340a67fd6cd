#include "l2mreg/plinth_localization.hpp"

#include "l2mreg/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <iterator>
#include <cmath>
#include <numeric>
#include <random>

namespace l2mreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Soa {
  std::vector<double> x, y, z;

  void push(const Vec3& p) {
    x.push_back(p.x());
    y.push_back(p.y());
    z.push_back(p.z());
  }
  std::size_t size() const { return x.size(); }
};

std::size_t count_inliers(const Soa& s, const Vec3& n, double d, double t) {
  std::size_t c = 0;
  const std::size_t m = s.size();
  const double* xs = s.x.data();
  const double* ys = s.y.data();
  const double* zs = s.z.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double r = n.x() * xs[i] + n.y() * ys[i] + n.z() * zs[i] + d;
    c += std::abs(r) <= t ? 1 : 0;
  }
  return c;
}

}  // namespace

std::uint64_t wall_seed(std::uint64_t global_seed, std::string_view wall_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : wall_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(global_seed ^ splitmix64(h));
}

std::optional<PlaneFit> ransac_largest_plane(std::span<const Vec3> points,
                                             std::span<const std::size_t> candidates,
                                             const RansacOptions& options) {
  const std::size_t n = candidates.size();
  if (n < 3 || n < options.min_inliers) return std::nullopt;
  std::mt19937_64 rng(splitmix64(options.seed));

  Soa score_set;
  if (options.score_sample_cap > 0 && n > options.score_sample_cap) {
    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    for (std::size_t k = 0; k < options.score_sample_cap; ++k) {
      std::uniform_int_distribution<std::size_t> u(k, n - 1);
      std::swap(pick[k], pick[u(rng)]);
    }
    pick.resize(options.score_sample_cap);
    std::sort(pick.begin(), pick.end());
    for (std::size_t k : pick) score_set.push(points[candidates[k]]);
  } else {
    for (std::size_t i : candidates) score_set.push(points[i]);
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t best_count = 0;
  PlaneParams best;
  for (std::size_t h = 0; h < options.hypotheses; ++h) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    std::size_t c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const Vec3& pa = points[candidates[a]];
    const Vec3 e1 = points[candidates[b]] - pa;
    const Vec3 e2 = points[candidates[c]] - pa;
    const Vec3 cross = e1.cross(e2);
    const double len = cross.norm();
    if (!(len > 1e-12 * e1.norm() * e2.norm()) || len == 0.0) continue;
    const Vec3 normal = cross / len;
    const double offset = -normal.dot(pa);
    const std::size_t count = count_inliers(score_set, normal, offset, options.t_dis);
    if (count > best_count) {
      best_count = count;
      best = {normal, offset};
    }
  }
  if (best_count == 0) return std::nullopt;
  const double scale =
      static_cast<double>(n) / static_cast<double>(score_set.size());
  if (static_cast<double>(best_count) * scale <
      static_cast<double>(options.min_inliers)) {
    return std::nullopt;
  }

  std::vector<std::size_t> inliers;
  for (std::size_t i : candidates) {
    if (point_plane_distance(points[i], best) <= options.t_dis) inliers.push_back(i);
  }
  if (inliers.size() < std::max<std::size_t>(3, options.min_inliers)) {
    return std::nullopt;
  }
  PlaneFit fit;
  try {
    fit.plane = fit_plane(points, inliers);
  } catch (const Error&) {
    return std::nullopt;
  }
  for (std::size_t i : candidates) {
    if (point_plane_distance(points[i], fit.plane) <= options.t_dis) {
      fit.inliers.push_back(i);
    }
  }
  if (fit.inliers.size() < std::max<std::size_t>(3, options.min_inliers)) {
    return std::nullopt;
  }
  return fit;
}

std::optional<PlaneFit> ransac_largest_plane(std::span<const Vec3> points,
                                             const RansacOptions& options) {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return ransac_largest_plane(points, all, options);
}

double nearest_rank_percentile(std::vector<double>& values, double p) {
  const std::size_t n = values.size();
  // Guard against 0.9 * 10 landing a hair above 9.
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  auto it = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), it, values.end());
  return *it;
}

CutoffRange percentile_band(std::vector<double> z) {
  if (z.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "percentile band needs at least 2 values");
  }
  CutoffRange r;
  r.z_min = nearest_rank_percentile(z, 0.1);
  r.z_max = nearest_rank_percentile(z, 0.9);
  return r;
}

std::size_t default_min_inliers(std::size_t neighborhood_size) {
  return std::max<std::size_t>(50, (neighborhood_size + 99) / 100);
}

LocalizeResult localize_representative_subspace(std::span<const Vec3> points,
                                                std::span<const std::size_t> neighborhood,
                                                const LocalizeParams& params,
                                                std::uint64_t seed) {
  if (neighborhood.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty neighborhood");
  }
  if (!(params.t_dis > 0.0) || !(params.t_alpha > 0.0 && params.t_alpha < 90.0)) {
    throw Error(ErrorKind::kInvalidArgument, "t_dis must be > 0 and t_alpha in (0, 90)");
  }
  RansacOptions ransac;
  ransac.t_dis = params.t_dis;
  ransac.hypotheses = params.hypotheses;
  ransac.min_inliers = params.min_inliers > 0
                           ? params.min_inliers
                           : default_min_inliers(neighborhood.size());

  std::vector<std::size_t> current(neighborhood.begin(), neighborhood.end());
  std::sort(current.begin(), current.end());
  std::optional<LocalizeResult> last;
  int valid_rounds = 0;
  for (int round = 0; round < params.max_rounds; ++round) {
    ransac.seed = seed + static_cast<std::uint64_t>(round) * 0x9e3779b97f4a7c15ULL;
    const auto fit = ransac_largest_plane(points, current, ransac);
    if (!fit) break;
    std::vector<double> z;
    z.reserve(fit->inliers.size());
    for (std::size_t i : fit->inliers) z.push_back(points[i].z());
    const CutoffRange band = percentile_band(std::move(z));
    if (!(verticality_angle(fit->plane) > params.t_alpha)) break;
    ++valid_rounds;
    last = LocalizeResult{{}, band, fit->plane, valid_rounds};
    // The inliers below z_min belong to the surface just traversed; left in
    // place they pair with the next structure down into a slanted plane.
    std::vector<std::size_t> kept;
    std::set_difference(current.begin(), current.end(), fit->inliers.begin(),
                        fit->inliers.end(), std::back_inserter(kept));
    std::erase_if(kept, [&](std::size_t i) { return points[i].z() > band.z_min; });
    current = std::move(kept);
  }
  if (!last) {
    throw Error(ErrorKind::kNoValidFacade, "first plane extraction was not facade-like");
  }
  for (std::size_t i : neighborhood) {
    if (last->range.contains(points[i].z())) last->subspace.push_back(i);
  }
  return *last;
}

}  // namespace l2mreg
