#include "l2mreg/wall_association.hpp"

#include "l2mreg/error.hpp"
#include "l2mreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace l2mreg {

bool WallBuffer::contains(const Vec3& p) const {
  if (p.z() < z_min || p.z() > z_max) return false;
  const double u = along.dot(p);
  if (u < u_min || u > u_max) return false;
  return std::abs(sweep(p)) <= half_thickness;
}

std::vector<WallBuffer> build_wall_buffers(std::span<const WallSurface> walls,
                                           double thickness,
                                           double vertical_margin,
                                           double end_margin) {
  if (!(thickness > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "buffer thickness must be > 0");
  }
  if (!(end_margin >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "buffer end margin must be >= 0");
  }
  std::vector<WallBuffer> buffers;
  for (std::size_t i = 0; i < walls.size(); ++i) {
    const WallSurface& wall = walls[i];
    if (verticality_angle(wall.plane) < kMinBufferVerticality) continue;
    WallBuffer b;
    b.wall_index = i;
    b.plane = wall.plane;
    const Vec3 n = wall.plane.normal;
    b.horizontal_normal = Vec3(n.x(), n.y(), 0.0).normalized();
    b.along = Vec3(-b.horizontal_normal.y(), b.horizontal_normal.x(), 0.0);
    b.normal_dot_horizontal = n.dot(b.horizontal_normal);
    b.half_thickness = 0.5 * thickness;
    b.u_min = b.z_min = std::numeric_limits<double>::max();
    b.u_max = b.z_max = std::numeric_limits<double>::lowest();
    for (const auto& v : wall.vertices) {
      const double u = b.along.dot(v);
      b.u_min = std::min(b.u_min, u);
      b.u_max = std::max(b.u_max, u);
      b.z_min = std::min(b.z_min, v.z());
      b.z_max = std::max(b.z_max, v.z());
    }
    const double trim = std::min(end_margin, 0.25 * (b.u_max - b.u_min));
    b.u_min += trim;
    b.u_max -= trim;
    b.z_min -= vertical_margin;
    b.z_max += vertical_margin;
    buffers.push_back(b);
  }
  if (buffers.empty()) {
    throw Error(ErrorKind::kNoVerticalWalls, "no wall is steep enough to buffer");
  }
  return buffers;
}

std::vector<std::int32_t> assign_points_to_walls(
    std::span<const Vec3> points, std::span<const WallBuffer> buffers,
    std::span<const WallSurface> walls, unsigned workers) {
  constexpr double kTieEps = 1e-12;
  std::vector<std::int32_t> out(points.size(), kNoWall);
  const auto ranges = split_range(points.size(), std::max(1u, workers) * 4);
  parallel_for(ranges.size(), workers, [&](std::size_t r) {
    for (std::size_t i = ranges[r].first; i < ranges[r].second; ++i) {
      const Vec3& p = points[i];
      std::int32_t best = kNoWall;
      double best_d = std::numeric_limits<double>::max();
      for (const auto& b : buffers) {
        if (!b.contains(p)) continue;
        const double d = point_plane_distance(p, b.plane);
        const auto w = static_cast<std::int32_t>(b.wall_index);
        if (best == kNoWall || d < best_d - kTieEps ||
            (std::abs(d - best_d) <= kTieEps && walls[w].id < walls[best].id)) {
          best = w;
          best_d = d;
        }
      }
      out[i] = best;
    }
  });
  return out;
}

namespace {

AssociationResult empty_result(std::span<const WallSurface> walls) {
  AssociationResult r;
  for (const auto& w : walls) r.wall_ids.push_back(w.id);
  r.per_wall.resize(walls.size());
  return r;
}

AssociationResult from_labels(const std::vector<std::int32_t>& labels,
                              std::span<const WallSurface> walls) {
  AssociationResult r = empty_result(walls);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoWall) {
      r.discarded_indices.push_back(i);
    } else {
      r.per_wall[labels[i]].push_back(i);
    }
  }
  return r;
}

void strip_ground_layers(const PointCloud& cloud, const DtmGrid* dtm,
                         const AssociationOptions& options, AssociationResult& r) {
  if (!(options.ground_layer_width > 0.0)) return;
  std::vector<std::vector<std::size_t>> layers(r.per_wall.size());
  parallel_for(r.per_wall.size(), options.workers, [&](std::size_t w) {
    layers[w] = ground_layer(cloud.points, r.per_wall[w], dtm, options.ground_layer_width);
  });
  bool moved = false;
  for (std::size_t w = 0; w < layers.size(); ++w) {
    if (layers[w].empty()) continue;
    moved = true;
    std::vector<std::size_t> kept;
    std::set_difference(r.per_wall[w].begin(), r.per_wall[w].end(), layers[w].begin(),
                        layers[w].end(), std::back_inserter(kept));
    r.per_wall[w] = std::move(kept);
    r.ground_indices.insert(r.ground_indices.end(), layers[w].begin(), layers[w].end());
  }
  if (moved) std::sort(r.ground_indices.begin(), r.ground_indices.end());
}

void check_band(double band) {
  if (!(band > 0.0)) throw Error(ErrorKind::kInvalidArgument, "ground band must be > 0");
}

}  // namespace

AssociationResult associate_points(const PointCloud& cloud,
                                   std::span<const WallBuffer> buffers,
                                   std::span<const WallSurface> walls,
                                   unsigned workers) {
  return from_labels(assign_points_to_walls(cloud.points, buffers, walls, workers),
                     walls);
}

std::vector<std::size_t> filter_ground(std::span<const Vec3> points,
                                       const DtmGrid& dtm, double band) {
  check_band(band);
  std::vector<std::size_t> out;
  bool covered = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double g = dtm.sample(points[i].x(), points[i].y());
    if (std::isnan(g)) continue;
    covered = true;
    if (std::abs(points[i].z() - g) <= band) out.push_back(i);
  }
  if (!covered && !points.empty()) {
    throw Error(ErrorKind::kNoCoverage, "every point lies over DTM nodata");
  }
  return out;
}

std::vector<std::size_t> ground_layer(std::span<const Vec3> points,
                                      std::span<const std::size_t> neighborhood,
                                      const DtmGrid* dtm, double half_width) {
  constexpr double kMaxGroundVerticality = 45.0;
  std::vector<std::pair<double, std::size_t>> h;
  h.reserve(neighborhood.size());
  for (std::size_t i : neighborhood) {
    const Vec3& p = points[i];
    const double g = dtm != nullptr ? dtm->sample(p.x(), p.y()) : 0.0;
    if (!std::isnan(g)) h.emplace_back(p.z() - g, i);
  }
  std::sort(h.begin(), h.end());
  std::size_t best_lo = 0, best_n = 0;
  for (std::size_t lo = 0, hi = 0; lo < h.size(); ++lo) {
    while (hi < h.size() && h[hi].first <= h[lo].first + 2.0 * half_width) ++hi;
    if (hi - lo > best_n) {
      best_n = hi - lo;
      best_lo = lo;
    }
  }
  const std::size_t min_points = std::max<std::size_t>(50, neighborhood.size() / 100);
  if (best_n < min_points) return {};
  std::vector<std::size_t> layer;
  std::vector<Vec3> slab;
  for (std::size_t k = best_lo; k < best_lo + best_n; ++k) {
    layer.push_back(h[k].second);
    slab.push_back(points[h[k].second]);
  }
  if (verticality_angle(fit_plane(slab)) >= kMaxGroundVerticality) return {};
  std::sort(layer.begin(), layer.end());
  return layer;
}

AssociationResult associate(const PointCloud& cloud,
                            std::span<const WallSurface> walls,
                            const DtmGrid* dtm,
                            const AssociationOptions& options) {
  const auto buffers =
      build_wall_buffers(walls, options.thickness, options.vertical_margin,
                         options.end_margin);
  // The trimmed ends belong to no wall, but they are not ground either.
  const auto full_buffers =
      build_wall_buffers(walls, options.thickness, options.vertical_margin);
  auto in_trimmed_end = [&](const Vec3& p) {
    return std::any_of(full_buffers.begin(), full_buffers.end(),
                       [&](const WallBuffer& b) { return b.contains(p); });
  };
  const auto labels =
      assign_points_to_walls(cloud.points, buffers, walls, options.workers);
  if (dtm == nullptr) {
    AssociationResult r = from_labels(labels, walls);
    strip_ground_layers(cloud, nullptr, options, r);
    return r;
  }
  check_band(options.ground_band);
  // Vertical distance to the DTM, NaN over nodata.
  std::vector<double> ground_gap(cloud.size());
  const auto ranges = split_range(cloud.size(), std::max(1u, options.workers) * 4);
  parallel_for(ranges.size(), options.workers, [&](std::size_t r) {
    for (std::size_t i = ranges[r].first; i < ranges[r].second; ++i) {
      const Vec3& p = cloud.points[i];
      ground_gap[i] = std::abs(p.z() - dtm->sample(p.x(), p.y()));
    }
  });
  if (!cloud.points.empty() &&
      std::all_of(ground_gap.begin(), ground_gap.end(),
                  [](double g) { return std::isnan(g); })) {
    throw Error(ErrorKind::kNoCoverage, "every point lies over DTM nodata");
  }
  AssociationResult r = empty_result(walls);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double g = ground_gap[i];
    const bool in_band = !std::isnan(g) && g <= options.ground_band;
    const std::int32_t w = labels[i];
    if (w != kNoWall) {
      r.per_wall[w].push_back(i);
    } else if (in_band && !in_trimmed_end(cloud.points[i])) {
      r.ground_indices.push_back(i);
    } else {
      r.discarded_indices.push_back(i);
    }
  }
  strip_ground_layers(cloud, dtm, options, r);
  return r;
}

void apply_wall_labels(PointCloud& cloud, const AssociationResult& result) {
  cloud.wall_label.assign(cloud.size(), kNoWall);
  for (std::size_t w = 0; w < result.per_wall.size(); ++w) {
    for (std::size_t i : result.per_wall[w]) {
      cloud.wall_label[i] = static_cast<std::int32_t>(w);
    }
  }
}

}  // namespace l2mreg
