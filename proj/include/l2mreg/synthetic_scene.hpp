#pragma once

#include "l2mreg/geometry.hpp"
#include "l2mreg/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace l2mreg {

/// Rectangular building centered on the origin: width along X, length
/// along Y. Walls W0..W3 run south, east, north, west.
struct SceneSpec {
  double width = 20.0;
  double length = 12.0;
  double height = 6.0;
  double plinth_height = 0.5;
  /// Outward offset of the upper facade from the footprint.
  double facade_offset = 0.10;
  double noise_sigma = 0.005;
  /// Share of points dropped on the second half (along the wall) of each
  /// wall.
  double occlusion_fraction = 0.0;
  /// Points per square meter of wall and ground.
  double density = 50.0;
  /// Width of the ground ring around the footprint.
  double ground_extent = 5.0;
  double ground_z = 0.0;
  /// dz/dx of the ground.
  double ground_slope = 0.0;
  double dtm_cell = 1.0;
  /// Walls (0..3) that receive plinth, facade and clutter points; the
  /// others stay in the model but are never seen.
  std::vector<int> scanned_walls = {0, 1, 2, 3};
  /// Blobs cycle over the scanned walls.
  int clutter_blobs = 3;
  std::size_t clutter_points = 300;
  /// Maps the delivered cloud onto the model.
  RigidTransform gt_transform;
  std::uint64_t seed = 1;

  void validate() const;
};

SceneSpec scene_spec_from_json(const std::string& text);
std::string scene_spec_to_json(const SceneSpec& spec);

enum class SceneLabel : std::uint8_t { kPlinth = 0, kFacade = 1, kGround = 2, kClutter = 3 };

std::string_view to_string(SceneLabel label);

struct SceneBundle {
  PointCloud cloud;
  WallModel walls;
  DtmGrid dtm;
  std::vector<SceneLabel> labels;
  /// Wall index for plinth, facade and clutter points, kNoWall for ground.
  std::vector<std::int32_t> source_wall;
  RigidTransform truth;
};

SceneBundle generate(const SceneSpec& spec);

struct OracleErrors {
  double rotation_deg = 0.0;
  double horizontal_m = 0.0;
  double vertical_m = 0.0;
};

/// Angle of R_est R_truth^T and the XY norm and |Z| of t_est - t_truth.
OracleErrors oracle_metrics(const RigidTransform& truth, const RigidTransform& estimated);
OracleErrors oracle_metrics(const SceneBundle& bundle, const RigidTransform& estimated);

/// cloud.ply, walls.json, dtm.asc and truth.json (transform and labels).
void write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);

struct SceneTruth {
  RigidTransform transform;
  std::vector<SceneLabel> labels;
};
SceneTruth read_truth(const std::filesystem::path& path);

}  // namespace l2mreg
