#include "l2mreg/vertical_alignment.hpp"

#include "l2mreg/error.hpp"
#include "l2mreg/parallel.hpp"
#include "l2mreg/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2mreg {

namespace {

constexpr double kMaxGroundVerticality = 45.0;

bool inside_xy(const std::vector<Vec3>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double xi = poly[i].x(), yi = poly[i].y();
    const double xj = poly[j].x(), yj = poly[j].y();
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

}  // namespace

std::vector<Vec3> dtm_reference_points(const DtmGrid& dtm) {
  std::vector<Vec3> out;
  for (int row = 0; row < dtm.n_rows; ++row) {
    for (int col = 0; col < dtm.n_cols; ++col) {
      if (!std::isnan(dtm.at(col, row))) out.push_back(dtm.cell_center(col, row));
    }
  }
  return out;
}

std::vector<Vec3> surface_reference_points(std::span<const WallSurface> surfaces,
                                           double spacing) {
  if (!(spacing > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "sampling spacing must be > 0");
  }
  std::vector<Vec3> out;
  for (const auto& s : surfaces) {
    if (verticality_angle(s.plane) >= kMaxGroundVerticality) continue;
    double x0 = std::numeric_limits<double>::max(), y0 = x0;
    double x1 = std::numeric_limits<double>::lowest(), y1 = x1;
    for (const auto& v : s.vertices) {
      x0 = std::min(x0, v.x());
      x1 = std::max(x1, v.x());
      y0 = std::min(y0, v.y());
      y1 = std::max(y1, v.y());
    }
    const Vec3& n = s.plane.normal;
    for (double y = y0 + 0.5 * spacing; y < y1; y += spacing) {
      for (double x = x0 + 0.5 * spacing; x < x1; x += spacing) {
        if (!inside_xy(s.vertices, x, y)) continue;
        const double z = -(n.x() * x + n.y() * y + s.plane.offset) / n.z();
        out.emplace_back(x, y, z);
      }
    }
  }
  return out;
}

DtmGrid rasterize_ground_model(std::span<const WallSurface> surfaces, double cell) {
  if (!(cell > 0.0)) throw Error(ErrorKind::kInvalidArgument, "cell size must be > 0");
  std::vector<const WallSurface*> flat;
  double x0 = std::numeric_limits<double>::max(), y0 = x0;
  double x1 = std::numeric_limits<double>::lowest(), y1 = x1;
  for (const auto& s : surfaces) {
    if (verticality_angle(s.plane) >= kMaxGroundVerticality) continue;
    flat.push_back(&s);
    for (const auto& v : s.vertices) {
      x0 = std::min(x0, v.x());
      x1 = std::max(x1, v.x());
      y0 = std::min(y0, v.y());
      y1 = std::max(y1, v.y());
    }
  }
  if (flat.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "ground model has no non-vertical surface");
  }
  DtmGrid dtm;
  dtm.cell_size = cell;
  dtm.origin_x = std::floor(x0 / cell) * cell;
  dtm.origin_y = std::floor(y0 / cell) * cell;
  dtm.n_cols = std::max(1, static_cast<int>(std::ceil((x1 - dtm.origin_x) / cell)));
  dtm.n_rows = std::max(1, static_cast<int>(std::ceil((y1 - dtm.origin_y) / cell)));
  dtm.elevations.assign(static_cast<std::size_t>(dtm.n_cols) * dtm.n_rows,
                        std::numeric_limits<double>::quiet_NaN());
  for (int row = 0; row < dtm.n_rows; ++row) {
    for (int col = 0; col < dtm.n_cols; ++col) {
      const Vec3 c = dtm.cell_center(col, row);
      for (const auto* s : flat) {
        if (!inside_xy(s->vertices, c.x(), c.y())) continue;
        const Vec3& n = s->plane.normal;
        dtm.elevations[static_cast<std::size_t>(row) * dtm.n_cols + col] =
            -(n.x() * c.x() + n.y() * c.y() + s->plane.offset) / n.z();
        break;
      }
    }
  }
  return dtm;
}

VerticalEstimate estimate_tz(std::span<const Vec3> points,
                             std::span<const std::size_t> ground,
                             std::span<const Vec3> reference,
                             const VerticalParams& params) {
  if (!(params.radius > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "search radius must be > 0");
  }
  const GridIndex index(points, ground, params.radius, GridIndex::Mode::kPlanar);
  std::vector<double> delta(reference.size(), std::numeric_limits<double>::quiet_NaN());
  const auto ranges = split_range(reference.size(), std::max(1u, params.workers) * 4);
  parallel_for(ranges.size(), params.workers, [&](std::size_t r) {
    std::vector<std::size_t> hits;
    for (std::size_t i = ranges[r].first; i < ranges[r].second; ++i) {
      hits.clear();
      index.radius_query(reference[i], params.radius, hits);
      if (hits.size() < 3) continue;
      // Sum in index order so the result is independent of bucket layout.
      std::sort(hits.begin(), hits.end());
      double sum = 0.0;
      for (std::size_t h : hits) sum += points[h].z();
      delta[i] = reference[i].z() - sum / static_cast<double>(hits.size());
    }
  });
  VerticalEstimate est;
  double sum = 0.0;
  for (double d : delta) {
    if (std::isnan(d)) continue;
    est.deltas.push_back(d);
    sum += d;
  }
  est.n_pairs = est.deltas.size();
  if (est.n_pairs < std::max<std::size_t>(1, params.min_pairs)) {
    throw Error(ErrorKind::kInsufficientPairs,
                std::to_string(est.n_pairs) + " matched ground-model points, need " +
                    std::to_string(params.min_pairs));
  }
  est.t_z = sum / static_cast<double>(est.n_pairs);
  return est;
}

VerticalEstimate estimate_tz(std::span<const Vec3> points,
                             std::span<const std::size_t> ground,
                             const DtmGrid& dtm, const VerticalParams& params) {
  const auto reference = dtm_reference_points(dtm);
  return estimate_tz(points, ground, reference, params);
}

std::vector<std::size_t> denoise_ground(std::span<const Vec3> points,
                                        std::span<const std::size_t> ground,
                                        std::size_t k, double sigma_mult,
                                        unsigned workers) {
  if (k < 3) throw Error(ErrorKind::kInvalidArgument, "denoise k must be >= 3");
  if (ground.size() <= k) return {ground.begin(), ground.end()};
  const double cell = suggest_planar_cell_size(points, ground, static_cast<double>(k));
  const GridIndex index(points, ground, cell, GridIndex::Mode::kSpatial);
  std::vector<double> stat(ground.size());
  const auto ranges = split_range(ground.size(), std::max(1u, workers) * 4);
  parallel_for(ranges.size(), workers, [&](std::size_t r) {
    for (std::size_t i = ranges[r].first; i < ranges[r].second; ++i) {
      const auto nn = index.knn(points[ground[i]], k, ground[i]);
      double s = 0.0;
      for (const auto& [d, idx] : nn) s += d;
      stat[i] = s / static_cast<double>(nn.size());
    }
  });
  double mean = 0.0;
  for (double s : stat) mean += s;
  mean /= static_cast<double>(stat.size());
  double var = 0.0;
  for (double s : stat) var += (s - mean) * (s - mean);
  const double threshold =
      mean + sigma_mult * std::sqrt(var / static_cast<double>(stat.size()));
  std::vector<std::size_t> out;
  out.reserve(ground.size());
  for (std::size_t i = 0; i < ground.size(); ++i) {
    if (stat[i] <= threshold) out.push_back(ground[i]);
  }
  return out;
}

}  // namespace l2mreg
