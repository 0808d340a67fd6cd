#include "l2mreg/synthetic_scene.hpp"

#include "l2mreg/error.hpp"

#include <json.hpp>

#include <array>
#include <algorithm>
#include <cmath>
#include <random>

namespace l2mreg {

namespace {

using ordered_json = nlohmann::ordered_json;

struct WallFrame {
  Vec3 start;    // footprint corner at u = 0
  Vec3 along;    // unit, horizontal
  Vec3 outward;  // unit, horizontal
  double length;
};

std::array<WallFrame, 4> wall_frames(const SceneSpec& s) {
  const double hx = 0.5 * s.width, hy = 0.5 * s.length;
  return {{{{-hx, -hy, 0}, {1, 0, 0}, {0, -1, 0}, s.width},
           {{hx, -hy, 0}, {0, 1, 0}, {1, 0, 0}, s.length},
           {{hx, hy, 0}, {-1, 0, 0}, {0, 1, 0}, s.width},
           {{-hx, hy, 0}, {0, -1, 0}, {-1, 0, 0}, s.length}}};
}

double intensity_of(SceneLabel label) {
  switch (label) {
    case SceneLabel::kPlinth: return 0.25;
    case SceneLabel::kFacade: return 0.5;
    case SceneLabel::kGround: return 0.75;
    case SceneLabel::kClutter: return 1.0;
  }
  return 0.0;
}

std::size_t count_for(double area, double density) {
  return static_cast<std::size_t>(std::llround(area * density));
}

}  // namespace

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidArgument, what);
  };
  if (!(width > 0 && length > 0 && height > 0 && plinth_height > 0 && density > 0)) {
    fail("width, length, height, plinth_height and density must be > 0");
  }
  if (!(plinth_height < height)) fail("plinth_height must be below height");
  if (!(facade_offset >= 0.0 && facade_offset <= 0.5)) fail("facade_offset must be in [0, 0.5]");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0)) {
    fail("occlusion_fraction must be in [0, 1)");
  }
  if (!(ground_extent > 0.0) || !(dtm_cell > 0.0)) fail("ground_extent and dtm_cell must be > 0");
  if (clutter_blobs < 0) fail("clutter_blobs must be >= 0");
  if (scanned_walls.empty()) fail("scanned_walls must not be empty");
  for (std::size_t i = 0; i < scanned_walls.size(); ++i) {
    if (scanned_walls[i] < 0 || scanned_walls[i] > 3) fail("scanned_walls entries must be in 0..3");
    for (std::size_t j = 0; j < i; ++j) {
      if (scanned_walls[i] == scanned_walls[j]) fail("scanned_walls has duplicates");
    }
  }
}

SceneSpec scene_spec_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::kParse, "scene spec must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "width") s.width = value.get<double>();
      else if (key == "length") s.length = value.get<double>();
      else if (key == "height") s.height = value.get<double>();
      else if (key == "plinth_height") s.plinth_height = value.get<double>();
      else if (key == "facade_offset") s.facade_offset = value.get<double>();
      else if (key == "noise_sigma") s.noise_sigma = value.get<double>();
      else if (key == "occlusion_fraction") s.occlusion_fraction = value.get<double>();
      else if (key == "density") s.density = value.get<double>();
      else if (key == "ground_extent") s.ground_extent = value.get<double>();
      else if (key == "ground_z") s.ground_z = value.get<double>();
      else if (key == "ground_slope") s.ground_slope = value.get<double>();
      else if (key == "dtm_cell") s.dtm_cell = value.get<double>();
      else if (key == "scanned_walls") s.scanned_walls = value.get<std::vector<int>>();
      else if (key == "clutter_blobs") s.clutter_blobs = value.get<int>();
      else if (key == "clutter_points") s.clutter_points = value.get<std::size_t>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "truth") {
        RigidTransform t;
        if (value.contains("quaternion")) {
          const auto& q = value.at("quaternion");
          t.rotation = Quaternion{q.at(0).get<double>(), q.at(1).get<double>(),
                                  q.at(2).get<double>(), q.at(3).get<double>()}
                           .normalized();
        } else if (value.contains("angle_deg")) {
          const auto& a = value.contains("axis") ? value.at("axis")
                                                 : nlohmann::json::array({0, 0, 1});
          t.rotation = Quaternion::from_axis_angle(
              Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()),
              value.at("angle_deg").get<double>() / kDegPerRad);
        }
        if (value.contains("translation")) {
          const auto& v = value.at("translation");
          t.translation = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
        }
        s.gt_transform = t;
      } else {
        throw Error(ErrorKind::kParse, "unknown scene spec key", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  s.validate();
  return s;
}

std::string scene_spec_to_json(const SceneSpec& s) {
  ordered_json j;
  j["width"] = s.width;
  j["length"] = s.length;
  j["height"] = s.height;
  j["plinth_height"] = s.plinth_height;
  j["facade_offset"] = s.facade_offset;
  j["noise_sigma"] = s.noise_sigma;
  j["occlusion_fraction"] = s.occlusion_fraction;
  j["density"] = s.density;
  j["ground_extent"] = s.ground_extent;
  j["ground_z"] = s.ground_z;
  j["ground_slope"] = s.ground_slope;
  j["dtm_cell"] = s.dtm_cell;
  j["scanned_walls"] = s.scanned_walls;
  j["clutter_blobs"] = s.clutter_blobs;
  j["clutter_points"] = s.clutter_points;
  j["seed"] = s.seed;
  const Quaternion& q = s.gt_transform.rotation;
  const Vec3& t = s.gt_transform.translation;
  j["truth"] = {{"quaternion", {q.q0, q.q1, q.q2, q.q3}}, {"translation", {t.x(), t.y(), t.z()}}};
  return j.dump(2) + "\n";
}

std::string_view to_string(SceneLabel label) {
  switch (label) {
    case SceneLabel::kPlinth: return "plinth";
    case SceneLabel::kFacade: return "facade";
    case SceneLabel::kGround: return "ground";
    case SceneLabel::kClutter: return "clutter";
  }
  return "unknown";
}

SceneBundle generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };
  auto ground_at = [&](double x) { return spec.ground_z + spec.ground_slope * x; };

  SceneBundle b;
  b.truth = spec.gt_transform;
  std::vector<Vec3> truth_points;
  auto emit = [&](const Vec3& p, SceneLabel label, std::int32_t wall) {
    truth_points.push_back(p);
    b.labels.push_back(label);
    b.source_wall.push_back(wall);
  };

  const auto frames = wall_frames(spec);
  const double z0 = spec.ground_z;
  for (std::size_t w = 0; w < frames.size(); ++w) {
    const WallFrame& f = frames[w];
    const Vec3 end = f.start + f.length * f.along;
    b.walls.walls.push_back(make_wall(
        "W" + std::to_string(w),
        {Vec3(f.start.x(), f.start.y(), z0), Vec3(end.x(), end.y(), z0),
         Vec3(end.x(), end.y(), z0 + spec.height), Vec3(f.start.x(), f.start.y(), z0 + spec.height)}));
    if (std::find(spec.scanned_walls.begin(), spec.scanned_walls.end(), static_cast<int>(w)) ==
        spec.scanned_walls.end()) {
      continue;
    }
    const auto bands = {std::pair{SceneLabel::kPlinth, 0.0},
                        std::pair{SceneLabel::kFacade, spec.facade_offset}};
    for (const auto& [label, offset] : bands) {
      const bool plinth = label == SceneLabel::kPlinth;
      const double lo = z0 + (plinth ? 0.0 : spec.plinth_height);
      const double hi = z0 + (plinth ? spec.plinth_height : spec.height);
      const std::size_t n = count_for(f.length * (hi - lo), spec.density);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform(0.0, f.length);
        const double z = uniform(lo, hi);
        const bool occluded_half = u > 0.5 * f.length;
        // Always draw so the stream does not depend on the occlusion outcome.
        const double drop = unit(rng);
        if (occluded_half && drop < spec.occlusion_fraction) continue;
        const Vec3 p = f.start + u * f.along + offset * f.outward;
        emit(Vec3(p.x(), p.y(), z), label, static_cast<std::int32_t>(w));
      }
    }
  }

  for (int c = 0; c < spec.clutter_blobs; ++c) {
    const auto w = static_cast<std::size_t>(
        spec.scanned_walls[static_cast<std::size_t>(c) % spec.scanned_walls.size()]);
    const WallFrame& f = frames[w];
    const double uc = f.length * uniform(0.2, 0.8);
    const double dc = spec.facade_offset + uniform(0.15, 0.3);
    for (std::size_t i = 0; i < spec.clutter_points; ++i) {
      const Vec3 p = f.start + (uc + uniform(-0.4, 0.4)) * f.along +
                     (dc + uniform(-0.1, 0.1)) * f.outward;
      const double z = ground_at(p.x()) + uniform(0.8, 2.0);
      emit(Vec3(p.x(), p.y(), z), SceneLabel::kClutter, static_cast<std::int32_t>(w));
    }
  }

  const double hx = 0.5 * spec.width, hy = 0.5 * spec.length;
  const double ox = hx + spec.ground_extent, oy = hy + spec.ground_extent;
  const double ring_area = 4.0 * ox * oy - spec.width * spec.length;
  const std::size_t n_ground = count_for(ring_area, spec.density);
  for (std::size_t i = 0; i < n_ground;) {
    const double x = uniform(-ox, ox);
    const double y = uniform(-oy, oy);
    if (std::abs(x) < hx && std::abs(y) < hy) continue;
    emit(Vec3(x, y, ground_at(x)), SceneLabel::kGround, kNoWall);
    ++i;
  }

  // Deliver the cloud in the sensor frame: inverse truth, then noise.
  const RigidTransform inv = spec.gt_transform.inverse();
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  b.cloud.points.reserve(truth_points.size());
  b.cloud.intensity.reserve(truth_points.size());
  for (std::size_t i = 0; i < truth_points.size(); ++i) {
    Vec3 p = inv.apply(truth_points[i]);
    if (spec.noise_sigma > 0.0) p += Vec3(noise(rng), noise(rng), noise(rng));
    b.cloud.points.push_back(p);
    b.cloud.intensity.push_back(intensity_of(b.labels[i]));
  }

  DtmGrid& dtm = b.dtm;
  dtm.cell_size = spec.dtm_cell;
  dtm.n_cols = static_cast<int>(std::ceil(2.0 * ox / spec.dtm_cell - 1e-9));
  dtm.n_rows = static_cast<int>(std::ceil(2.0 * oy / spec.dtm_cell - 1e-9));
  dtm.origin_x = -ox;
  dtm.origin_y = -oy;
  dtm.elevations.resize(static_cast<std::size_t>(dtm.n_cols) * dtm.n_rows);
  for (int row = 0; row < dtm.n_rows; ++row) {
    for (int col = 0; col < dtm.n_cols; ++col) {
      const double x = dtm.origin_x + (col + 0.5) * dtm.cell_size;
      dtm.elevations[static_cast<std::size_t>(row) * dtm.n_cols + col] = ground_at(x);
    }
  }
  return b;
}

OracleErrors oracle_metrics(const RigidTransform& truth, const RigidTransform& estimated) {
  OracleErrors e;
  e.rotation_deg = rotation_angle_between(estimated.rotation, truth.rotation);
  const Vec3 d = estimated.translation - truth.translation;
  e.horizontal_m = std::hypot(d.x(), d.y());
  e.vertical_m = std::abs(d.z());
  return e;
}

OracleErrors oracle_metrics(const SceneBundle& bundle, const RigidTransform& estimated) {
  return oracle_metrics(bundle.truth, estimated);
}

void write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_point_cloud_ply(dir / "cloud.ply", bundle.cloud);
  write_wall_model(dir / "walls.json", bundle.walls);
  write_dtm(dir / "dtm.asc", bundle.dtm);
  auto j = ordered_json::parse(transform_to_json(bundle.truth));
  auto labels = ordered_json::array();
  for (SceneLabel l : bundle.labels) labels.push_back(to_string(l));
  j["labels"] = std::move(labels);
  write_text_file(dir / "truth.json", j.dump(2) + "\n");
}

SceneTruth read_truth(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  SceneTruth t;
  t.transform = transform_from_json(text);
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("labels")) {
      for (const auto& l : j.at("labels")) {
        const auto s = l.get<std::string>();
        if (s == "plinth") t.labels.push_back(SceneLabel::kPlinth);
        else if (s == "facade") t.labels.push_back(SceneLabel::kFacade);
        else if (s == "ground") t.labels.push_back(SceneLabel::kGround);
        else if (s == "clutter") t.labels.push_back(SceneLabel::kClutter);
        else throw Error(ErrorKind::kParse, "unknown label", s);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what(), path.string());
  }
  return t;
}

}  // namespace l2mreg
