#include "l2mreg/error.hpp"
#include "l2mreg/io.hpp"
#include "l2mreg/pipeline.hpp"
#include "l2mreg/synthetic_scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>

namespace {

using l2mreg::ErrorKind;
using l2mreg::PipelineConfig;

constexpr int kExitOther = 1;
constexpr int kExitParse = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNoConvergence = 4;

/// Missing inputs that the command line or the config file must supply.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kInconsistentDimensions:
    case ErrorKind::kNonPlanarPolygon:
    case ErrorKind::kDuplicateId:
      return kExitParse;
    case ErrorKind::kDegenerateGeometry:
    case ErrorKind::kRankDeficient:
      return kExitDegenerate;
    case ErrorKind::kNoConvergence:
      return kExitNoConvergence;
    default:
      return kExitOther;
  }
}

/// Pipeline flags shared by register and extract-planes. Values only count
/// when given on the command line, so a config file can supply the rest.
struct PipelineFlags {
  std::string cloud, walls, dtm, ground_model, output, dump_dir, config;
  double buffer = 0, end_margin = 0, t_dis = 0, t_alpha = 0, radius = 0, tol = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int max_iter = 0;
  std::size_t min_pairs = 0, refit_batch = 0;
  bool skip_vertical = false, no_pseudo_plane = false, skip_localization = false,
       no_metrics = false;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, bool full) {
    opts["cloud"] = app->add_option("--cloud", cloud, "Point cloud (ASCII xyz[i] or PLY)");
    opts["walls"] = app->add_option("--walls", walls, "Wall model JSON");
    opts["dtm"] = app->add_option("--dtm", dtm, "DTM as ESRI ASCII grid");
    opts["ground_model"] =
        app->add_option("--ground-model", ground_model, "Planar ground surfaces (wall schema)");
    opts["output"] = app->add_option("-o,--output", output, "Output JSON");
    opts["dump_stages"] = app->add_option("--dump-stages", dump_dir, "Directory for stage outputs");
    opts["buffer"] = app->add_option("--buffer", buffer, "Buffer thickness in meters [1.0]");
    opts["end_margin"] =
        app->add_option("--end-margin", end_margin, "Buffer trim at wall ends in meters [0.5]");
    opts["t_dis"] = app->add_option("--t-dis", t_dis, "Distance threshold in meters [0.02]");
    opts["t_alpha"] = app->add_option("--t-alpha", t_alpha, "Facade angle threshold in degrees [10]");
    opts["seed"] = app->add_option("--seed", seed, "RNG seed [0]");
    opts["workers"] = app->add_option("--workers", workers, "Worker threads [1]");
    opts["refit_batch"] =
        app->add_option("--refit-batch", refit_batch, "Seed plane refit interval [64]");
    opts["skip_localization"] = app->add_flag(
        "--skip-localization", skip_localization, "Extract from the whole wall neighborhood");
    app->add_option("--config", config, "JSON config; explicit flags take precedence");
    if (!full) return;
    opts["radius"] = app->add_option("--radius", radius, "Vertical search radius in meters [0.5]");
    opts["max_iter"] = app->add_option("--max-iter", max_iter, "Solver iteration limit [50]");
    opts["tol"] = app->add_option("--tol", tol, "Solver step tolerance [1e-10]");
    opts["min_pairs"] = app->add_option("--min-pairs", min_pairs, "Minimum DTM pairs [10]");
    opts["skip_vertical"] = app->add_flag("--skip-vertical", skip_vertical, "Skip the t_z stage");
    opts["no_pseudo_plane"] = app->add_flag(
        "--no-pseudo-plane", no_pseudo_plane, "Coupled 6-DoF solve with ground correspondences");
    opts["no_metrics"] = app->add_flag("--no-metrics", no_metrics, "Skip check-point metrics");
  }

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  PipelineConfig build() const {
    PipelineConfig c;
    if (!config.empty()) apply_file(c, config);
    if (given("cloud")) c.cloud_path = cloud;
    if (given("walls")) c.walls_path = walls;
    if (given("dtm")) c.dtm_path = dtm;
    if (given("ground_model")) c.ground_model_path = ground_model;
    if (given("output")) c.output_path = output;
    if (given("dump_stages")) c.dump_dir = dump_dir;
    if (given("buffer")) c.thickness = buffer;
    if (given("end_margin")) c.end_margin = end_margin;
    if (given("t_dis")) c.t_dis = t_dis;
    if (given("t_alpha")) c.t_alpha = t_alpha;
    if (given("radius")) c.radius = radius;
    if (given("seed")) c.seed = seed;
    if (given("workers")) c.workers = workers;
    if (given("max_iter")) c.max_iter = max_iter;
    if (given("tol")) c.tol = tol;
    if (given("min_pairs")) c.min_pairs = min_pairs;
    if (given("refit_batch")) c.refit_batch = refit_batch;
    if (given("skip_vertical")) c.skip_vertical = skip_vertical;
    if (given("no_pseudo_plane")) c.pseudo_plane = !no_pseudo_plane;
    if (given("skip_localization")) c.skip_localization = skip_localization;
    if (given("no_metrics")) c.metrics = !no_metrics;
    if (c.cloud_path.empty() || c.walls_path.empty()) {
      throw UsageError("--cloud and --walls are required");
    }
    return c;
  }

  static void apply_file(PipelineConfig& c, const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(l2mreg::read_text_file(path));
      for (const auto& [key, v] : j.items()) {
        if (key == "cloud") c.cloud_path = v.get<std::string>();
        else if (key == "walls") c.walls_path = v.get<std::string>();
        else if (key == "dtm") c.dtm_path = v.get<std::string>();
        else if (key == "ground_model") c.ground_model_path = v.get<std::string>();
        else if (key == "output") c.output_path = v.get<std::string>();
        else if (key == "dump_stages") c.dump_dir = v.get<std::string>();
        else if (key == "buffer") c.thickness = v.get<double>();
        else if (key == "end_margin") c.end_margin = v.get<double>();
        else if (key == "t_dis") c.t_dis = v.get<double>();
        else if (key == "t_alpha") c.t_alpha = v.get<double>();
        else if (key == "radius") c.radius = v.get<double>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "workers") c.workers = v.get<unsigned>();
        else if (key == "max_iter") c.max_iter = v.get<int>();
        else if (key == "tol") c.tol = v.get<double>();
        else if (key == "min_pairs") c.min_pairs = v.get<std::size_t>();
        else if (key == "denoise_k") c.denoise_k = v.get<std::size_t>();
        else if (key == "sigma_mult") c.sigma_mult = v.get<double>();
        else if (key == "refit_batch") c.refit_batch = v.get<std::size_t>();
        else if (key == "skip_vertical") c.skip_vertical = v.get<bool>();
        else if (key == "pseudo_plane") c.pseudo_plane = v.get<bool>();
        else if (key == "skip_localization") c.skip_localization = v.get<bool>();
        else if (key == "metrics") c.metrics = v.get<bool>();
        else throw l2mreg::Error(ErrorKind::kParse, "unknown config key", key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw l2mreg::Error(ErrorKind::kParse, e.what(), path);
    }
  }
};

void print_report_summary(const l2mreg::RegistrationReport& r) {
  const auto& q = r.transform.rotation;
  const auto& t = r.transform.translation;
  std::printf("quaternion  %.12f %.12f %.12f %.12f\n", q.q0, q.q1, q.q2, q.q3);
  std::printf("translation %.9f %.9f %.9f\n", t.x(), t.y(), t.z());
  std::printf("t_z stage   %s %.9f (%zu pairs)\n", r.t_z_stage.status.c_str(), r.t_z_stage.t_z,
              r.t_z_stage.pairs);
  for (const auto& w : r.per_wall) {
    std::printf("wall %-10s %-20s N=%zu S=%zu L=%zu\n", w.id.c_str(), w.status.c_str(),
                w.neighbor_points, w.subspace_points, w.segment_points);
  }
  if (r.metrics && r.metrics->status == "ok") {
    std::printf("Err_H %.6f Std_H %.6f Err_V %.6f Std_V %.6f\n", r.metrics->err_h,
                r.metrics->std_h, r.metrics->err_v, r.metrics->std_v);
  }
}

int cmd_register(const PipelineFlags& flags) {
  const PipelineConfig config = flags.build();
  const auto result = l2mreg::run_pipeline_files(config);
  print_report_summary(result.report);
  return 0;
}

int cmd_extract(const PipelineFlags& flags) {
  PipelineConfig config = flags.build();
  const l2mreg::WallModel model = l2mreg::read_wall_model(config.walls_path);
  const l2mreg::PointCloud cloud = l2mreg::read_point_cloud(config.cloud_path, model.local_origin);
  std::optional<l2mreg::DtmGrid> dtm;
  if (!config.dtm_path.empty()) dtm = l2mreg::read_dtm(config.dtm_path, model.local_origin);
  config.validate();
  l2mreg::PipelineResult result;
  result.association = l2mreg::associate(cloud, model.walls, dtm ? &*dtm : nullptr,
                                          l2mreg::association_options(config));
  result.walls = l2mreg::extract_wall_planes(cloud, model, result.association, config);
  nlohmann::ordered_json out;
  out["walls"] = nlohmann::ordered_json::array();
  for (const auto& st : result.walls) {
    const auto& d = st.diagnostics;
    nlohmann::ordered_json jw;
    jw["id"] = d.id;
    jw["status"] = d.status;
    jw["neighbor_points"] = d.neighbor_points;
    jw["subspace_points"] = d.subspace_points;
    jw["segment_points"] = d.segment_points;
    if (!std::isnan(d.cutoff_z_min)) jw["cutoff_range"] = {d.cutoff_z_min, d.cutoff_z_max};
    if (st.segment) {
      const auto& n = st.segment->plane.normal;
      jw["normal"] = {n.x(), n.y(), n.z()};
      jw["offset"] = st.segment->plane.offset;
    }
    out["walls"].push_back(jw);
    std::printf("wall %-10s %-20s N=%zu S=%zu L=%zu\n", d.id.c_str(), d.status.c_str(),
                d.neighbor_points, d.subspace_points, d.segment_points);
  }
  if (!config.output_path.empty()) l2mreg::write_text_file(config.output_path, out.dump(2) + "\n");
  if (!config.dump_dir.empty()) l2mreg::dump_stages(config.dump_dir, cloud, result);
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  l2mreg::SceneSpec spec;
  if (!spec_path.empty()) spec = l2mreg::scene_spec_from_json(l2mreg::read_text_file(spec_path));
  if (seed) spec.seed = *seed;
  const auto bundle = l2mreg::generate(spec);
  l2mreg::write_bundle(bundle, out_dir);
  std::printf("wrote %zu points to %s\n", bundle.cloud.size(), out_dir.c_str());
  return 0;
}

int cmd_eval(const std::vector<std::string>& reports, const std::string& truth_path,
             const std::string& csv_path) {
  const l2mreg::RigidTransform truth =
      l2mreg::transform_from_json(l2mreg::read_text_file(truth_path));
  std::string csv = "report,rotation_deg,horizontal_m,vertical_m\n";
  for (const auto& path : reports) {
    const auto report = l2mreg::read_report(path);
    const auto e = l2mreg::oracle_metrics(truth, report.transform);
    char line[512];
    std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.9g\n", path.c_str(), e.rotation_deg,
                  e.horizontal_m, e.vertical_m);
    csv += line;
    if (reports.size() == 1 && csv_path.empty()) {
      std::printf("rotation error    %.9f deg\n", e.rotation_deg);
      std::printf("horizontal error  %.9f m\n", e.horizontal_m);
      std::printf("vertical error    %.9f m\n", e.vertical_m);
    }
  }
  if (!csv_path.empty()) {
    l2mreg::write_text_file(csv_path, csv);
  } else if (reports.size() > 1) {
    std::fputs(csv.c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine registration of building point clouds to LoD2 wall models"};
  app.require_subcommand(1);

  PipelineFlags reg_flags;
  auto* reg = app.add_subcommand("register", "Run the full registration");
  reg_flags.add(reg, true);

  PipelineFlags ext_flags;
  auto* ext = app.add_subcommand("extract-planes", "Associate, localize and extract planes only");
  ext_flags.add(ext, false);

  std::string spec_path, out_dir;
  std::uint64_t synth_seed = 0;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic scene");
  syn->add_option("--spec", spec_path, "Scene spec JSON (defaults when omitted)");
  syn->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = syn->add_option("--seed", synth_seed, "Override the scene seed");

  std::vector<std::string> reports;
  std::string truth_path, csv_path;
  auto* ev = app.add_subcommand("eval", "Compare reports with a ground-truth transform");
  ev->add_option("--report", reports, "Report JSON (repeatable)")->required();
  ev->add_option("--truth", truth_path, "Truth JSON")->required();
  ev->add_option("--csv", csv_path, "Write one CSV row per report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (reg->parsed()) return cmd_register(reg_flags);
    if (ext->parsed()) return cmd_extract(ext_flags);
    if (syn->parsed()) {
      return cmd_synth(spec_path, out_dir,
                       seed_opt->count() > 0 ? std::optional(synth_seed) : std::nullopt);
    }
    if (ev->parsed()) return cmd_eval(reports, truth_path, csv_path);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  } catch (const l2mreg::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
