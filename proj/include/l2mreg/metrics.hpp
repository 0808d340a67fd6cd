#pragma once

#include "l2mreg/geometry.hpp"
#include "l2mreg/io.hpp"
#include "l2mreg/spatial_index.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace l2mreg {

struct M3c2Params {
  double normal_radius = 0.3;
  double cylinder_radius = 0.1;
  double max_depth = 1.0;
};

/// A location on the reference model and the model's unit normal there. A
/// zero normal is estimated from the cloud points within normal_radius.
struct CheckPoint {
  Vec3 position;
  Vec3 normal;
};

struct CheckPointSet {
  std::vector<CheckPoint> horizontal;
  std::vector<CheckPoint> vertical;
};

struct CheckPointParams {
  double spacing = 0.5;
  /// Height of the horizontal check points above the wall's lowest vertex.
  double base_height = 0.25;
  /// Check points keep this distance from the wall ends.
  double end_margin = 1.0;
  /// Horizontal offset of the vertical check points in front of each wall.
  double ground_offset = 1.0;
};

/// Horizontal set: along each wall base. Vertical set: on the DTM surface
/// in front of each wall, with the local DTM normal. `dtm` may be null.
CheckPointSet generate_check_points(std::span<const WallSurface> walls,
                                    const DtmGrid* dtm,
                                    const CheckPointParams& params = {});

struct MetricsReport {
  double err_h = 0.0;
  double err_v = 0.0;
  double std_h = 0.0;
  double std_v = 0.0;
  std::vector<double> distances_h;
  std::vector<double> distances_v;
};

/// Mean and sample standard deviation (divisor n - 1) of the distances.
struct DistanceSummary {
  double err = 0.0;
  double std_dev = 0.0;
};
DistanceSummary summarize(std::span<const double> distances);

/// Points index for repeated distance queries against one cloud.
class CloudSampler {
 public:
  CloudSampler(std::span<const Vec3> points, const M3c2Params& params);

  /// Mean axial offset of the cloud points inside the cylinder of radius
  /// cylinder_radius and half-length max_depth around the axis through
  /// `check.position` along `check.normal`. Throws NoNeighbors when the
  /// cylinder is empty.
  double distance(const CheckPoint& check) const;
  const M3c2Params& params() const { return params_; }

 private:
  std::span<const Vec3> points_;
  M3c2Params params_;
  GridIndex index_;
};

double m3c2_style_distance(const CheckPoint& check, std::span<const Vec3> cloud,
                           const M3c2Params& params = {});

/// Distances for every check point, then Err (mean) and Std (n - 1) per
/// set. Throws NoNeighbors naming the check points with empty cylinders,
/// or InvalidArgument when a non-empty set has fewer than two points.
MetricsReport compute_metrics(const CheckPointSet& check, std::span<const Vec3> cloud,
                              const M3c2Params& params = {}, unsigned workers = 1);

}  // namespace l2mreg
