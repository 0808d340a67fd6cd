#pragma once

#include "l2mreg/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace l2mreg {

inline constexpr std::int32_t kNoWall = -1;

/// Parallel arrays; `intensity` and `wall_label` are either empty or the
/// same length as `points`. Labels index into the wall list.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> intensity;
  std::vector<std::int32_t> wall_label;

  std::size_t size() const { return points.size(); }
  bool has_intensity() const { return !intensity.empty(); }
};

struct WallSurface {
  std::string id;
  std::vector<Vec3> vertices;
  PlaneParams plane;
};

/// Wall surfaces with vertices relative to `local_origin`.
struct WallModel {
  Vec3 local_origin = Vec3::Zero();
  std::vector<WallSurface> walls;
};

/// Regular elevation grid. Rows run north to south; cell (col, row) has its
/// center at (origin_x + (col + 0.5) * cell, origin_y + (n_rows - row - 0.5)
/// * cell). NaN marks nodata.
struct DtmGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 1.0;
  int n_cols = 0;
  int n_rows = 0;
  std::vector<double> elevations;

  double at(int col, int row) const {
    return elevations[static_cast<std::size_t>(row) * n_cols + col];
  }
  Vec3 cell_center(int col, int row) const;
  /// Bilinear interpolation between cell centers, clamped to the outermost
  /// centers inside the grid footprint. NaN outside the footprint or when a
  /// contributing cell is nodata.
  double sample(double x, double y) const;
};

inline constexpr double kWallPlanarityTolerance = 1e-3;

/// ASCII "x y z [intensity]" or little-endian binary PLY. `origin` is
/// subtracted from every coordinate.
PointCloud read_point_cloud(const std::filesystem::path& path,
                            const Vec3& origin = Vec3::Zero());
PointCloud parse_point_cloud_ascii(std::istream& in,
                                   const Vec3& origin = Vec3::Zero());
void write_point_cloud_ascii(const std::filesystem::path& path,
                             const PointCloud& cloud,
                             const Vec3& origin = Vec3::Zero());
void write_point_cloud_ply(const std::filesystem::path& path,
                           const PointCloud& cloud,
                           const Vec3& origin = Vec3::Zero());

/// Builds a wall from its vertices: plane by total least squares, then the
/// planarity and vertex-count checks.
WallSurface make_wall(std::string id, std::vector<Vec3> vertices);

WallModel read_wall_model(const std::filesystem::path& path);
WallModel parse_wall_model(const std::string& json_text);
std::string wall_model_to_json(const WallModel& model);
void write_wall_model(const std::filesystem::path& path, const WallModel& model);

/// ESRI ASCII grid. `origin` is subtracted from the georeferencing and the
/// elevations.
DtmGrid read_dtm(const std::filesystem::path& path,
                 const Vec3& origin = Vec3::Zero());
DtmGrid parse_dtm(std::istream& in, const Vec3& origin = Vec3::Zero());
void write_dtm(const std::filesystem::path& path, const DtmGrid& dtm,
               const Vec3& origin = Vec3::Zero());

struct WallDiagnostics {
  std::string id;
  std::string status = "ok";
  std::size_t neighbor_points = 0;
  std::size_t subspace_points = 0;
  std::size_t segment_points = 0;
  double cutoff_z_min = std::numeric_limits<double>::quiet_NaN();
  double cutoff_z_max = std::numeric_limits<double>::quiet_NaN();
  double rms_residual = std::numeric_limits<double>::quiet_NaN();
};

struct VerticalStageSummary {
  std::string status = "skipped";  // "estimated", "skipped" or "coupled"
  double t_z = 0.0;
  std::size_t pairs = 0;
};

struct SolverSummary {
  int iterations = 0;
  bool pseudo_plane = true;
  double variance_factor = 0.0;
  long redundancy = 0;
  double raw_t_z = 0.0;
};

struct MetricsSummary {
  std::string status = "ok";
  double err_h = std::numeric_limits<double>::quiet_NaN();
  double err_v = std::numeric_limits<double>::quiet_NaN();
  double std_h = std::numeric_limits<double>::quiet_NaN();
  double std_v = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_h = 0;
  std::size_t n_v = 0;
};

inline constexpr int kReportVersion = 1;

struct RegistrationReport {
  int version = kReportVersion;
  Vec3 local_origin = Vec3::Zero();
  RigidTransform transform;
  RigidTransform stage1;
  VerticalStageSummary t_z_stage;
  SolverSummary solver;
  std::vector<WallDiagnostics> per_wall;
  std::optional<MetricsSummary> metrics;
};

std::string report_to_json(const RegistrationReport& report);
RegistrationReport report_from_json(const std::string& text);
void write_report(const std::filesystem::path& path,
                  const RegistrationReport& report);
RegistrationReport read_report(const std::filesystem::path& path);

/// Ground-truth transform file written next to synthetic scenes.
std::string transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace l2mreg
