#include "l2mreg/spatial_index.hpp"

#include "l2mreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace l2mreg {

GridIndex::GridIndex(std::span<const Vec3> points, double cell_size, Mode mode)
    : points_(points), cell_(cell_size), mode_(mode) {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  build(all);
}

GridIndex::GridIndex(std::span<const Vec3> points,
                     std::span<const std::size_t> subset, double cell_size,
                     Mode mode)
    : points_(points), cell_(cell_size), mode_(mode) {
  build(subset);
}

std::int64_t GridIndex::cell_coord(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_));
}

std::uint64_t GridIndex::pack(std::int64_t ix, std::int64_t iy,
                              std::int64_t iz) {
  constexpr std::int64_t kBias = std::int64_t{1} << 20;
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 21) - 1;
  return ((static_cast<std::uint64_t>(ix + kBias) & kMask) << 42) |
         ((static_cast<std::uint64_t>(iy + kBias) & kMask) << 21) |
         (static_cast<std::uint64_t>(iz + kBias) & kMask);
}

double GridIndex::distance(const Vec3& a, const Vec3& b) const {
  if (mode_ == Mode::kPlanar) return std::hypot(a.x() - b.x(), a.y() - b.y());
  return (a - b).norm();
}

void GridIndex::build(std::span<const std::size_t> subset) {
  if (!(cell_ > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "grid cell size must be > 0");
  }
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(subset.size());
  for (int a = 0; a < 3; ++a) {
    min_cell_[a] = std::numeric_limits<std::int64_t>::max();
    max_cell_[a] = std::numeric_limits<std::int64_t>::min();
  }
  for (std::size_t i : subset) {
    const Vec3& p = points_[i];
    const std::int64_t c[3] = {cell_coord(p.x()), cell_coord(p.y()),
                               mode_ == Mode::kPlanar ? 0 : cell_coord(p.z())};
    for (int a = 0; a < 3; ++a) {
      min_cell_[a] = std::min(min_cell_[a], c[a]);
      max_cell_[a] = std::max(max_cell_[a], c[a]);
    }
    keyed.emplace_back(pack(c[0], c[1], c[2]), i);
  }
  std::sort(keyed.begin(), keyed.end());
  order_.resize(keyed.size());
  cells_.reserve(keyed.size() / 4 + 1);
  for (std::size_t k = 0; k < keyed.size();) {
    std::size_t e = k;
    while (e < keyed.size() && keyed[e].first == keyed[k].first) {
      order_[e] = keyed[e].second;
      ++e;
    }
    cells_.emplace(keyed[k].first, Range{static_cast<std::uint32_t>(k),
                                         static_cast<std::uint32_t>(e)});
    k = e;
  }
}

void GridIndex::radius_query(const Vec3& center, double radius,
                             std::vector<std::size_t>& out) const {
  if (order_.empty()) return;
  const bool planar = mode_ == Mode::kPlanar;
  const std::int64_t lo[3] = {
      std::max(cell_coord(center.x() - radius), min_cell_[0]),
      std::max(cell_coord(center.y() - radius), min_cell_[1]),
      planar ? 0 : std::max(cell_coord(center.z() - radius), min_cell_[2])};
  const std::int64_t hi[3] = {
      std::min(cell_coord(center.x() + radius), max_cell_[0]),
      std::min(cell_coord(center.y() + radius), max_cell_[1]),
      planar ? 0 : std::min(cell_coord(center.z() + radius), max_cell_[2])};
  for (std::int64_t ix = lo[0]; ix <= hi[0]; ++ix) {
    for (std::int64_t iy = lo[1]; iy <= hi[1]; ++iy) {
      for (std::int64_t iz = lo[2]; iz <= hi[2]; ++iz) {
        const auto it = cells_.find(pack(ix, iy, iz));
        if (it == cells_.end()) continue;
        for (std::uint32_t k = it->second.begin; k < it->second.end; ++k) {
          const std::size_t idx = order_[k];
          if (distance(points_[idx], center) <= radius) out.push_back(idx);
        }
      }
    }
  }
}

std::vector<std::pair<double, std::size_t>> GridIndex::knn(
    const Vec3& query, std::size_t k, std::size_t skip) const {
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;  // max-heap on (distance, index)
  if (k == 0 || order_.empty()) return {};
  const bool planar = mode_ == Mode::kPlanar;
  const std::int64_t qc[3] = {cell_coord(query.x()), cell_coord(query.y()),
                              planar ? 0 : cell_coord(query.z())};
  std::int64_t max_ring = 0;
  for (int a = 0; a < (planar ? 2 : 3); ++a) {
    max_ring = std::max({max_ring, std::abs(qc[a] - min_cell_[a]),
                         std::abs(max_cell_[a] - qc[a])});
  }
  auto visit_cell = [&](std::int64_t ix, std::int64_t iy, std::int64_t iz) {
    const auto it = cells_.find(pack(ix, iy, iz));
    if (it == cells_.end()) return;
    for (std::uint32_t j = it->second.begin; j < it->second.end; ++j) {
      const std::size_t idx = order_[j];
      if (idx == skip) continue;
      const Entry e{distance(points_[idx], query), idx};
      if (heap.size() < k) {
        heap.push(e);
      } else if (e < heap.top()) {
        heap.pop();
        heap.push(e);
      }
    }
  };
  for (std::int64_t r = 0; r <= max_ring; ++r) {
    const std::int64_t zr = planar ? 0 : r;
    for (std::int64_t dx = -r; dx <= r; ++dx) {
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        for (std::int64_t dz = -zr; dz <= zr; ++dz) {
          const std::int64_t cheb =
              std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
          if (cheb != r) continue;
          visit_cell(qc[0] + dx, qc[1] + dy, qc[2] + dz);
        }
      }
    }
    // Unvisited cells are at least r cell widths away.
    if (heap.size() == k && heap.top().first <= static_cast<double>(r) * cell_) {
      break;
    }
  }
  std::vector<Entry> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double suggest_planar_cell_size(std::span<const Vec3> points,
                                std::span<const std::size_t> subset,
                                double per_cell) {
  if (subset.empty()) return 1.0;
  double x0 = std::numeric_limits<double>::max(), y0 = x0;
  double x1 = std::numeric_limits<double>::lowest(), y1 = x1;
  for (std::size_t i : subset) {
    x0 = std::min(x0, points[i].x());
    x1 = std::max(x1, points[i].x());
    y0 = std::min(y0, points[i].y());
    y1 = std::max(y1, points[i].y());
  }
  const double area = std::max((x1 - x0) * (y1 - y0), 1e-6);
  const double cell =
      std::sqrt(area * per_cell / static_cast<double>(subset.size()));
  return std::max(cell, 1e-3);
}

}  // namespace l2mreg
