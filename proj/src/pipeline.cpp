#include "l2mreg/pipeline.hpp"

#include "l2mreg/error.hpp"
#include "l2mreg/metrics.hpp"
#include "l2mreg/parallel.hpp"
#include "l2mreg/plinth_localization.hpp"
#include "l2mreg/vertical_alignment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2mreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kExtractSeedSalt = 0x6a09e667f3bcc909ULL;

double segment_distance_xy(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Eigen::Vector2d ab(b.x() - a.x(), b.y() - a.y());
  const Eigen::Vector2d ap(p.x() - a.x(), p.y() - a.y());
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp(ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (ap - t * ab).norm();
}

/// Horizontal extent of a wall as its two extreme vertices along the wall.
std::pair<Vec3, Vec3> footprint_segment(const WallSurface& wall) {
  const Vec3& n = wall.plane.normal;
  const Vec3 along = Vec3(-n.y(), n.x(), 0.0).normalized();
  auto [lo, hi] = std::minmax_element(
      wall.vertices.begin(), wall.vertices.end(),
      [&](const Vec3& a, const Vec3& b) { return along.dot(a) < along.dot(b); });
  return {*lo, *hi};
}

std::vector<Vec3> gather(const PointCloud& cloud, std::span<const std::size_t> idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(cloud.points[i]);
  return out;
}

void write_subset(const std::filesystem::path& path, const PointCloud& cloud,
                  std::span<const std::size_t> idx) {
  PointCloud sub;
  sub.points = gather(cloud, idx);
  write_point_cloud_ascii(path, sub);
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidArgument, what);
  };
  if (!(thickness > 0.0)) fail("buffer thickness must be > 0");
  if (!(t_dis > 0.0)) fail("t_dis must be > 0");
  if (!(t_alpha > 0.0 && t_alpha < 90.0)) fail("t_alpha must be in (0, 90)");
  if (!(radius > 0.0)) fail("radius must be > 0");
  if (!(ground_band > 0.0)) fail("ground band must be > 0");
  if (!(vertical_margin >= 0.0)) fail("vertical margin must be >= 0");
  if (!(end_margin >= 0.0)) fail("buffer end margin must be >= 0");
  if (!(tol > 0.0) || max_iter < 1) fail("solver tolerance and max_iter must be positive");
  if (denoise_k < 3) fail("denoise k must be >= 3");
  if (!(sigma_mult > 0.0)) fail("sigma multiplier must be > 0");
  if (refit_batch < 1) fail("refit batch must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
}

AssociationOptions association_options(const PipelineConfig& config) {
  AssociationOptions ao;
  ao.thickness = config.thickness;
  ao.vertical_margin = config.vertical_margin;
  ao.ground_band = config.ground_band;
  ao.end_margin = config.end_margin;
  ao.ground_layer_width = config.t_dis;
  ao.workers = config.workers;
  return ao;
}

std::vector<WallStage> extract_wall_planes(const PointCloud& cloud, const WallModel& model,
                                           const AssociationResult& association,
                                           const PipelineConfig& config) {
  std::vector<WallStage> stages(model.walls.size());
  parallel_for(model.walls.size(), config.workers, [&](std::size_t w) {
    const WallSurface& wall = model.walls[w];
    WallStage& st = stages[w];
    st.wall_id = wall.id;
    st.neighborhood = association.per_wall[w];
    st.diagnostics.id = wall.id;
    st.diagnostics.neighbor_points = st.neighborhood.size();
    if (st.neighborhood.empty()) {
      st.diagnostics.status = "unmatched";
      return;
    }
    try {
      const std::uint64_t seed = wall_seed(config.seed, wall.id);
      if (config.skip_localization) {
        st.subspace = st.neighborhood;
      } else {
        LocalizeParams lp;
        lp.t_dis = config.t_dis;
        lp.t_alpha = config.t_alpha;
        LocalizeResult loc =
            localize_representative_subspace(cloud.points, st.neighborhood, lp, seed);
        st.subspace = std::move(loc.subspace);
        st.diagnostics.cutoff_z_min = loc.range.z_min;
        st.diagnostics.cutoff_z_max = loc.range.z_max;
      }
      st.diagnostics.subspace_points = st.subspace.size();
      ExtractParams ep;
      ep.t_dis = config.t_dis;
      ep.t_alpha = config.t_alpha;
      ep.refit_batch = config.refit_batch;
      PlaneSegment seg = extract_wall_segment(cloud.points, st.subspace, wall, ep,
                                              seed ^ kExtractSeedSalt);
      st.diagnostics.segment_points = seg.indices.size();
      if (seg.indices.size() < 3) {
        st.diagnostics.status = "too_few_points";
        return;
      }
      st.segment = std::move(seg);
    } catch (const Error& e) {
      st.diagnostics.status = std::string(to_string(e.kind()));
    }
  });
  return stages;
}

std::vector<Correspondence> build_ground_correspondences(
    const PointCloud& cloud, const WallModel& model, std::span<const std::size_t> ground,
    const DtmGrid& dtm, std::size_t sample_cap) {
  std::vector<std::pair<Vec3, Vec3>> segments;
  for (const auto& w : model.walls) segments.push_back(footprint_segment(w));
  std::vector<std::vector<std::size_t>> patches(model.walls.size());
  for (std::size_t i : ground) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (std::size_t w = 0; w < segments.size(); ++w) {
      const double d = segment_distance_xy(cloud.points[i], segments[w].first, segments[w].second);
      if (d < best_d) {
        best_d = d;
        best = w;
      }
    }
    if (!segments.empty()) patches[best].push_back(i);
  }
  std::vector<Correspondence> out;
  for (std::size_t w = 0; w < patches.size(); ++w) {
    auto& patch = patches[w];
    if (sample_cap > 0 && patch.size() > sample_cap) {
      std::vector<std::size_t> thinned;
      for (std::size_t k = 0; k < sample_cap; ++k) {
        thinned.push_back(patch[k * patch.size() / sample_cap]);
      }
      patch = std::move(thinned);
    }
    std::vector<Vec3> surface;
    Correspondence c;
    for (std::size_t i : patch) {
      const Vec3& p = cloud.points[i];
      const double z = dtm.sample(p.x(), p.y());
      if (std::isnan(z)) continue;
      surface.emplace_back(p.x(), p.y(), z);
      c.lidar_points.push_back(p);
    }
    if (c.lidar_points.size() < 3) continue;
    try {
      c.model_plane = fit_plane(surface);
    } catch (const Error&) {
      continue;
    }
    c.wall_id = "ground:" + model.walls[w].id;
    c.kind = CorrespondenceKind::kGround;
    out.push_back(std::move(c));
  }
  return out;
}

PipelineResult run_pipeline(const PointCloud& cloud, const WallModel& model,
                            const DtmGrid* dtm, const PipelineConfig& config) {
  config.validate();
  if (cloud.points.empty()) throw Error(ErrorKind::kEmptyCloud, "point cloud is empty");
  PipelineResult result;
  result.association = associate(cloud, model.walls, dtm, association_options(config));
  result.walls = extract_wall_planes(cloud, model, result.association, config);

  for (std::size_t w = 0; w < result.walls.size(); ++w) {
    const WallStage& st = result.walls[w];
    if (!st.segment) continue;
    Correspondence c;
    c.model_plane = model.walls[w].plane;
    c.lidar_points = gather(cloud, st.segment->indices);
    c.wall_id = st.wall_id;
    c.kind = CorrespondenceKind::kFacade;
    result.correspondences.push_back(std::move(c));
  }
  if (!config.pseudo_plane && dtm != nullptr) {
    auto ground = build_ground_correspondences(cloud, model, result.association.ground_indices,
                                               *dtm, config.ground_sample_cap);
    for (auto& g : ground) result.correspondences.push_back(std::move(g));
  }

  SolverOptions so;
  so.max_iter = config.max_iter;
  so.tol = config.tol;
  so.include_pseudo_plane = config.pseudo_plane;
  so.workers = config.workers;
  result.solver = solve(result.correspondences, so);

  RegistrationReport& rep = result.report;
  rep.local_origin = model.local_origin;
  rep.stage1 = result.solver.transform;
  rep.transform = rep.stage1;
  rep.solver.iterations = result.solver.iterations;
  rep.solver.pseudo_plane = config.pseudo_plane;
  rep.solver.variance_factor = result.solver.variance_factor;
  rep.solver.redundancy = result.solver.redundancy;
  rep.solver.raw_t_z = result.solver.raw_t_z;

  if (!config.pseudo_plane) {
    rep.t_z_stage.status = "coupled";
    rep.t_z_stage.t_z = rep.stage1.translation.z();
  } else if (config.skip_vertical) {
    rep.t_z_stage.status = "skipped";
  } else {
    if (dtm == nullptr) {
      throw Error(ErrorKind::kInvalidArgument, "vertical stage needs a DTM or ground model");
    }
    const auto& ground = result.association.ground_indices;
    std::vector<Vec3> moved;
    moved.reserve(ground.size());
    for (std::size_t i : ground) moved.push_back(rep.stage1.apply(cloud.points[i]));
    std::vector<std::size_t> all(moved.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto kept =
        denoise_ground(moved, all, config.denoise_k, config.sigma_mult, config.workers);
    VerticalParams vp;
    vp.radius = config.radius;
    vp.min_pairs = config.min_pairs;
    vp.workers = config.workers;
    const VerticalEstimate est = estimate_tz(moved, kept, *dtm, vp);
    rep.t_z_stage.status = "estimated";
    rep.t_z_stage.t_z = est.t_z;
    rep.t_z_stage.pairs = est.n_pairs;
    rep.transform.translation.z() += est.t_z;
  }

  for (const auto& st : result.walls) rep.per_wall.push_back(st.diagnostics);
  for (std::size_t k = 0; k < result.solver.wall_ids.size(); ++k) {
    for (auto& d : rep.per_wall) {
      if (d.id == result.solver.wall_ids[k]) d.rms_residual = result.solver.rms_residual[k];
    }
  }

  if (config.metrics) {
    MetricsSummary m;
    try {
      const CheckPointSet check = generate_check_points(model.walls, dtm);
      std::vector<Vec3> registered;
      registered.reserve(cloud.size());
      for (const auto& p : cloud.points) registered.push_back(rep.transform.apply(p));
      const MetricsReport mr = compute_metrics(check, registered, {}, config.workers);
      m.n_h = mr.distances_h.size();
      m.n_v = mr.distances_v.size();
      m.err_h = m.n_h > 0 ? mr.err_h : kNaN;
      m.std_h = m.n_h > 1 ? mr.std_h : kNaN;
      m.err_v = m.n_v > 0 ? mr.err_v : kNaN;
      m.std_v = m.n_v > 1 ? mr.std_v : kNaN;
    } catch (const Error& e) {
      m.status = e.what();
    }
    rep.metrics = m;
  }
  return result;
}

PipelineResult run_pipeline_files(const PipelineConfig& config) {
  config.validate();
  const WallModel model = read_wall_model(config.walls_path);
  const PointCloud cloud = read_point_cloud(config.cloud_path, model.local_origin);
  std::optional<DtmGrid> dtm;
  if (!config.dtm_path.empty()) {
    dtm = read_dtm(config.dtm_path, model.local_origin);
  } else if (!config.ground_model_path.empty()) {
    WallModel ground = read_wall_model(config.ground_model_path);
    for (auto& s : ground.walls) {
      for (auto& v : s.vertices) v += ground.local_origin - model.local_origin;
      s = make_wall(s.id, s.vertices);
    }
    dtm = rasterize_ground_model(ground.walls, 1.0);
  }
  PipelineResult result = run_pipeline(cloud, model, dtm ? &*dtm : nullptr, config);
  if (!config.output_path.empty()) write_report(config.output_path, result.report);
  if (!config.dump_dir.empty()) dump_stages(config.dump_dir, cloud, result);
  return result;
}

void dump_stages(const std::filesystem::path& dir, const PointCloud& cloud,
                 const PipelineResult& result) {
  std::filesystem::create_directories(dir);
  for (const auto& st : result.walls) {
    write_subset(dir / ("N_" + st.wall_id + ".xyz"), cloud, st.neighborhood);
    write_subset(dir / ("S_" + st.wall_id + ".xyz"), cloud, st.subspace);
    if (st.segment) write_subset(dir / ("L_" + st.wall_id + ".xyz"), cloud, st.segment->indices);
  }
  write_subset(dir / "ground.xyz", cloud, result.association.ground_indices);
  write_text_file(dir / "stage1.json", transform_to_json(result.report.stage1));
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : result.correspondences) {
    const Vec3& n = c.model_plane.normal;
    j.push_back({{"id", c.wall_id},
                 {"kind", c.kind == CorrespondenceKind::kFacade ? "facade" : "ground"},
                 {"normal", {n.x(), n.y(), n.z()}},
                 {"offset", c.model_plane.offset},
                 {"points", c.lidar_points.size()}});
  }
  write_text_file(dir / "correspondences.json", j.dump(2) + "\n");
}

}  // namespace l2mreg
