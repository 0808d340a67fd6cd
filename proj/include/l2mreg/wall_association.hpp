#pragma once

#include "l2mreg/geometry.hpp"
#include "l2mreg/io.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace l2mreg {

/// A wall polygon swept along the horizontal projection of its normal.
/// Membership: the sweep parameter |tau| <= half_thickness, the along-wall
/// coordinate within the polygon's extent, and Z within the polygon's Z
/// range widened by the vertical margin.
struct WallBuffer {
  std::size_t wall_index = 0;
  PlaneParams plane;
  Vec3 horizontal_normal;
  Vec3 along;
  double normal_dot_horizontal = 1.0;
  double half_thickness = 0.5;
  double u_min = 0.0, u_max = 0.0;
  double z_min = 0.0, z_max = 0.0;

  /// Signed sweep distance along the horizontal normal back to the plane.
  double sweep(const Vec3& p) const {
    return plane.signed_distance(p) / normal_dot_horizontal;
  }
  bool contains(const Vec3& p) const;
};

inline constexpr double kDefaultBufferThickness = 1.0;
inline constexpr double kDefaultVerticalMargin = 0.2;
inline constexpr double kDefaultGroundBand = 0.3;
inline constexpr double kDefaultEndMargin = 0.5;
/// Walls flatter than this are not buffered.
inline constexpr double kMinBufferVerticality = 45.0;

/// `end_margin` shortens each buffer at both ends along the wall, capped at
/// a quarter of the wall length.
std::vector<WallBuffer> build_wall_buffers(
    std::span<const WallSurface> walls, double thickness,
    double vertical_margin = kDefaultVerticalMargin, double end_margin = 0.0);

struct AssociationResult {
  std::vector<std::string> wall_ids;
  /// Indexed like the wall list; an empty list flags an unmatched wall.
  std::vector<std::vector<std::size_t>> per_wall;
  std::vector<std::size_t> ground_indices;
  std::vector<std::size_t> discarded_indices;

  bool matched(std::size_t wall) const { return !per_wall[wall].empty(); }
};

/// Per-point wall index (kNoWall outside every buffer). A point inside
/// several buffers goes to the perpendicular-nearest wall plane, ties
/// (within 1e-12 m) to the lexicographically smallest id.
std::vector<std::int32_t> assign_points_to_walls(
    std::span<const Vec3> points, std::span<const WallBuffer> buffers,
    std::span<const WallSurface> walls, unsigned workers = 1);

/// Wall assignment only: points outside every buffer are discarded.
AssociationResult associate_points(const PointCloud& cloud,
                                   std::span<const WallBuffer> buffers,
                                   std::span<const WallSurface> walls,
                                   unsigned workers = 1);

/// Indices whose vertical distance to the bilinear DTM surface is within
/// `band`; points over nodata are excluded.
std::vector<std::size_t> filter_ground(std::span<const Vec3> points,
                                       const DtmGrid& dtm, double band);

/// The ground strip a buffer picks up at the wall foot: the densest slab of
/// half-width `half_width` in height above the DTM (raw Z when `dtm` is
/// null), kept only when it holds at least max(50, 1% of the neighborhood)
/// points whose fitted plane is flatter than 45 degrees. Returns the slab's
/// indices in ascending order, or nothing.
std::vector<std::size_t> ground_layer(std::span<const Vec3> points,
                                      std::span<const std::size_t> neighborhood,
                                      const DtmGrid* dtm, double half_width);

struct AssociationOptions {
  double thickness = kDefaultBufferThickness;
  double vertical_margin = kDefaultVerticalMargin;
  double ground_band = kDefaultGroundBand;
  unsigned workers = 1;
  /// Along-wall trim at both ends of every buffer. Near a corner, a residual
  /// rotation moves points of the neighboring wall within t_dis of this
  /// wall's plane; the trim keeps them out of the neighborhood.
  double end_margin = kDefaultEndMargin;
  /// Moves each neighborhood's ground layer (see ground_layer) to the
  /// ground set; 0 disables it.
  double ground_layer_width = 0.02;
};

/// Full preprocessing: wall assignment, then DTM ground filtering of the
/// points outside every untrimmed buffer (a buffered point stays with its
/// wall, and one in a trimmed end is discarded),
/// then removal of the ground layer from each neighborhood. `dtm` may be
/// null, in which case only ground layers are classified as ground.
AssociationResult associate(const PointCloud& cloud,
                            std::span<const WallSurface> walls,
                            const DtmGrid* dtm,
                            const AssociationOptions& options = {});

/// Writes the wall index of each associated point into cloud.wall_label.
void apply_wall_labels(PointCloud& cloud, const AssociationResult& result);

}  // namespace l2mreg
