#include "l2mreg/metrics.hpp"

#include "l2mreg/error.hpp"
#include "l2mreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2mreg {

namespace {

constexpr double kMinWallVerticality = 45.0;
constexpr double kIndexCell = 0.25;

Vec3 building_center(std::span<const WallSurface> walls) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& w : walls) {
    for (const auto& v : w.vertices) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? Vec3(sum / static_cast<double>(n)) : Vec3(Vec3::Zero());
}

Vec3 dtm_normal(const DtmGrid& dtm, double x, double y) {
  const double h = 0.5 * dtm.cell_size;
  const double gx = (dtm.sample(x + h, y) - dtm.sample(x - h, y)) / (2 * h);
  const double gy = (dtm.sample(x, y + h) - dtm.sample(x, y - h)) / (2 * h);
  return Vec3(-gx, -gy, 1.0).normalized();
}

void require_pair(std::size_t n, const char* which) {
  if (n == 1) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(which) + " check set needs at least two points");
  }
}

}  // namespace

CheckPointSet generate_check_points(std::span<const WallSurface> walls,
                                    const DtmGrid* dtm, const CheckPointParams& params) {
  if (!(params.spacing > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "check point spacing must be > 0");
  }
  const Vec3 center = building_center(walls);
  CheckPointSet set;
  for (const auto& wall : walls) {
    if (verticality_angle(wall.plane) < kMinWallVerticality) continue;
    const Vec3& n = wall.plane.normal;
    Vec3 nh = Vec3(n.x(), n.y(), 0.0).normalized();
    Vec3 wall_center = Vec3::Zero();
    for (const auto& v : wall.vertices) wall_center += v;
    wall_center /= static_cast<double>(wall.vertices.size());
    if (nh.dot(wall_center - center) < 0.0) nh = -nh;
    const Vec3 outward = n.dot(nh) >= 0.0 ? n : Vec3(-n);
    const Vec3 along(-nh.y(), nh.x(), 0.0);
    double u0 = std::numeric_limits<double>::max(), u1 = std::numeric_limits<double>::lowest();
    double z0 = std::numeric_limits<double>::max();
    for (const auto& v : wall.vertices) {
      u0 = std::min(u0, along.dot(v));
      u1 = std::max(u1, along.dot(v));
      z0 = std::min(z0, v.z());
    }
    const double z = z0 + params.base_height;
    for (double u = u0 + params.end_margin; u <= u1 - params.end_margin + 1e-9;
         u += params.spacing) {
      Vec3 q = along * u + Vec3(0.0, 0.0, z);
      q -= wall.plane.signed_distance(q) / n.dot(nh) * nh;
      set.horizontal.push_back({q, outward});
      if (dtm == nullptr) continue;
      const Vec3 g = q + params.ground_offset * nh;
      const double gz = dtm->sample(g.x(), g.y());
      if (std::isnan(gz)) continue;
      const Vec3 gn = dtm_normal(*dtm, g.x(), g.y());
      if (!gn.allFinite()) continue;
      set.vertical.push_back({Vec3(g.x(), g.y(), gz), gn});
    }
  }
  return set;
}

DistanceSummary summarize(std::span<const double> distances) {
  DistanceSummary s;
  const std::size_t n = distances.size();
  if (n == 0) return s;
  double sum = 0.0;
  for (double d : distances) sum += d;
  s.err = sum / static_cast<double>(n);
  if (n < 2) return s;
  double ss = 0.0;
  for (double d : distances) ss += (d - s.err) * (d - s.err);
  s.std_dev = std::sqrt(ss / static_cast<double>(n - 1));
  return s;
}

CloudSampler::CloudSampler(std::span<const Vec3> points, const M3c2Params& params)
    : points_(points), params_(params),
      index_(points, kIndexCell, GridIndex::Mode::kSpatial) {
  if (!(params.cylinder_radius > 0.0) || !(params.max_depth > 0.0) ||
      !(params.normal_radius > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "projection scales must be > 0");
  }
}

double CloudSampler::distance(const CheckPoint& check) const {
  Vec3 axis = check.normal;
  std::vector<std::size_t> hits;
  if (!(axis.norm() > 0.0)) {
    index_.radius_query(check.position, params_.normal_radius, hits);
    if (hits.size() < 3) {
      throw Error(ErrorKind::kNoNeighbors, "fewer than 3 points for normal estimation");
    }
    std::sort(hits.begin(), hits.end());
    axis = fit_plane(points_, hits).normal;
    hits.clear();
  }
  axis.normalize();
  const double reach = std::hypot(params_.cylinder_radius, params_.max_depth);
  index_.radius_query(check.position, reach, hits);
  std::sort(hits.begin(), hits.end());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i : hits) {
    const Vec3 d = points_[i] - check.position;
    const double axial = d.dot(axis);
    if (std::abs(axial) > params_.max_depth) continue;
    if ((d - axial * axis).norm() > params_.cylinder_radius) continue;
    sum += axial;
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::kNoNeighbors, "projection cylinder is empty");
  return sum / static_cast<double>(count);
}

double m3c2_style_distance(const CheckPoint& check, std::span<const Vec3> cloud,
                           const M3c2Params& params) {
  return CloudSampler(cloud, params).distance(check);
}

MetricsReport compute_metrics(const CheckPointSet& check, std::span<const Vec3> cloud,
                              const M3c2Params& params, unsigned workers) {
  require_pair(check.horizontal.size(), "horizontal");
  require_pair(check.vertical.size(), "vertical");
  const CloudSampler sampler(cloud, params);
  auto run = [&](const std::vector<CheckPoint>& set, const char* tag) {
    std::vector<double> out(set.size());
    std::vector<char> failed(set.size(), 0);
    parallel_for(set.size(), workers, [&](std::size_t i) {
      try {
        out[i] = sampler.distance(set[i]);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNoNeighbors) throw;
        failed[i] = 1;
      }
    });
    std::string bad;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (failed[i]) bad += (bad.empty() ? "" : ",") + std::string(tag) + std::to_string(i);
    }
    if (!bad.empty()) {
      throw Error(ErrorKind::kNoNeighbors, "empty projection cylinder at check points", bad);
    }
    return out;
  };
  MetricsReport r;
  r.distances_h = run(check.horizontal, "H");
  r.distances_v = run(check.vertical, "V");
  const auto h = summarize(r.distances_h);
  const auto v = summarize(r.distances_v);
  r.err_h = h.err;
  r.std_h = h.std_dev;
  r.err_v = v.err;
  r.std_v = v.std_dev;
  return r;
}

}  // namespace l2mreg
