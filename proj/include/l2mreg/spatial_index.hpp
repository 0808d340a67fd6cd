#pragma once

#include "l2mreg/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace l2mreg {

/// Uniform-grid bucket index over a point array (which must outlive the
/// index). In planar mode distances ignore Z.
class GridIndex {
 public:
  enum class Mode { kPlanar, kSpatial };

  GridIndex(std::span<const Vec3> points, double cell_size, Mode mode);
  GridIndex(std::span<const Vec3> points, std::span<const std::size_t> subset,
            double cell_size, Mode mode);

  /// Appends indices (into the original point array) within `radius` of
  /// `center`. Visit order is deterministic.
  void radius_query(const Vec3& center, double radius,
                    std::vector<std::size_t>& out) const;

  /// The k nearest points as (distance, index), ascending by distance then
  /// index. `skip` excludes one index (the query point itself).
  std::vector<std::pair<double, std::size_t>> knn(
      const Vec3& query, std::size_t k,
      std::size_t skip = static_cast<std::size_t>(-1)) const;

  std::size_t size() const { return order_.size(); }
  double cell_size() const { return cell_; }

 private:
  struct Range {
    std::uint32_t begin;
    std::uint32_t end;
  };

  void build(std::span<const std::size_t> subset);
  std::int64_t cell_coord(double v) const;
  static std::uint64_t pack(std::int64_t ix, std::int64_t iy, std::int64_t iz);
  double distance(const Vec3& a, const Vec3& b) const;

  std::span<const Vec3> points_;
  double cell_;
  Mode mode_;
  std::vector<std::size_t> order_;
  std::unordered_map<std::uint64_t, Range> cells_;
  std::int64_t min_cell_[3] = {0, 0, 0};
  std::int64_t max_cell_[3] = {0, 0, 0};
};

/// Cell edge giving roughly `per_cell` points per planar cell.
double suggest_planar_cell_size(std::span<const Vec3> points,
                                std::span<const std::size_t> subset,
                                double per_cell);

}  // namespace l2mreg
