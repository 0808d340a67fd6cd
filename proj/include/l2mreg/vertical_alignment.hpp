#pragma once

#include "l2mreg/geometry.hpp"
#include "l2mreg/io.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace l2mreg {

struct VerticalParams {
  double radius = 0.5;
  std::size_t min_pairs = 10;
  std::size_t denoise_k = 8;
  double sigma_mult = 2.0;
  unsigned workers = 1;
};

struct VerticalEstimate {
  /// Add to cloud Z to align it with the ground model.
  double t_z = 0.0;
  std::size_t n_pairs = 0;
  /// Per matched reference point, in reference order.
  std::vector<double> deltas;
};

/// Centers of the DTM cells that carry an elevation.
std::vector<Vec3> dtm_reference_points(const DtmGrid& dtm);

/// Grid samples (given spacing) inside the XY projection of every
/// non-vertical polygon, lifted onto its plane. Lets a planar ground model
/// stand in for the DTM.
std::vector<Vec3> surface_reference_points(std::span<const WallSurface> surfaces,
                                           double spacing);

/// Rasterizes the non-vertical polygons onto a grid with the given cell
/// size, so a planar ground model can stand in for a DTM. Cells outside
/// every polygon are nodata; the first covering polygon wins.
DtmGrid rasterize_ground_model(std::span<const WallSurface> surfaces, double cell);

/// For each reference point, the cloud points within `radius` in XY; with
/// at least three of them the pair delta is ref_z - mean(cloud z). t_z is
/// the mean delta. Throws InsufficientPairs below min_pairs matches.
VerticalEstimate estimate_tz(std::span<const Vec3> points,
                             std::span<const std::size_t> ground,
                             std::span<const Vec3> reference,
                             const VerticalParams& params);
VerticalEstimate estimate_tz(std::span<const Vec3> points,
                             std::span<const std::size_t> ground,
                             const DtmGrid& dtm, const VerticalParams& params);

/// Statistical outlier removal: drops points whose mean distance to their
/// k nearest neighbors exceeds mean + sigma_mult * std (population) of that
/// statistic. Inputs with at most k points are returned unchanged.
std::vector<std::size_t> denoise_ground(std::span<const Vec3> points,
                                        std::span<const std::size_t> ground,
                                        std::size_t k, double sigma_mult,
                                        unsigned workers = 1);

}  // namespace l2mreg
