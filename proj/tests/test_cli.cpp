#include "l2mreg/io.hpp"
#include "l2mreg/synthetic_scene.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace l2mreg;
using namespace l2mreg::test;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + L2MREG_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

void write_spec(const std::filesystem::path& path, const std::string& json) {
  write_text_file(path, json);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a parseable bundle and is reproducible") {
  const TempDir dir("cli_synth");
  write_spec(dir / "spec.json", R"({"density": 20})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "a") + " --seed 7", dir).code == 0);
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "b") + " --seed 7", dir).code == 0);
  for (const char* f : {"cloud.ply", "walls.json", "dtm.asc", "truth.json"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(dir / "a" / f));
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
  }
  CHECK(read_point_cloud(dir / "a" / "cloud.ply").size() > 1000);
  CHECK(read_wall_model(dir / "a" / "walls.json").walls.size() == 4);
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "c") + " --seed 8", dir).code == 0);
  CHECK(read_text_file(dir / "a" / "cloud.ply") != read_text_file(dir / "c" / "cloud.ply"));
}

TEST_CASE("synth facade offset shows in the delivered cloud") {
  const TempDir dir("cli_delta");
  write_spec(dir / "spec.json", R"({"density": 30, "noise_sigma": 0.0, "facade_offset": 0.07})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "s"), dir).code == 0);
  const PointCloud c = read_point_cloud(dir / "s" / "cloud.ply");
  const SceneTruth t = read_truth(dir / "s" / "truth.json");
  REQUIRE(t.labels.size() == c.size());
  std::size_t facade = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (t.labels[i] != SceneLabel::kFacade) continue;
    // Default footprint: 20 m x 12 m centered on the origin.
    const Vec3 p = t.transform.apply(c.points[i]);
    const double outside = std::max(std::abs(p.x()) - 10.0, std::abs(p.y()) - 6.0);
    CHECK(outside == doctest::Approx(0.07).epsilon(1e-6));
    ++facade;
  }
  CHECK(facade > 100);
}

TEST_CASE("register recovers an offset-facade scene") {
  const TempDir dir("cli_register");
  write_spec(dir / "spec.json",
             R"({"plinth_height": 1.0, "density": 400, "facade_offset": 0.10,)"
             R"( "truth": {"angle_deg": 1.0, "translation": [0.10, -0.05, 0.20]}})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "s"), dir).code == 0);
  const auto s = dir / "s";
  const Run r = cli("register --cloud " + q(s / "cloud.ply") + " --walls " + q(s / "walls.json") +
                        " --dtm " + q(s / "dtm.asc") + " -o " + q(dir / "report.json"),
                    dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const RegistrationReport rep = read_report(dir / "report.json");
  const SceneTruth truth = read_truth(s / "truth.json");
  const OracleErrors e = oracle_metrics(truth.transform, rep.transform);
  MESSAGE("rotation " << e.rotation_deg << " deg, horizontal " << e.horizontal_m << " m");
  CHECK(e.rotation_deg < 0.02);
  CHECK(e.horizontal_m < 0.005);
  CHECK(rep.t_z_stage.status == "estimated");

  // eval against the truth and against the report itself
  const Run ev = cli("eval --report " + q(dir / "report.json") + " --truth " + q(s / "truth.json"), dir);
  CHECK(ev.code == 0);
  CHECK(ev.out.find("rotation error") != std::string::npos);
}

TEST_CASE("register without a DTM when the vertical stage is skipped") {
  const TempDir dir("cli_skip");
  write_spec(dir / "spec.json", R"({"density": 40})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "s"), dir).code == 0);
  const auto s = dir / "s";
  const Run r = cli("register --cloud " + q(s / "cloud.ply") + " --walls " + q(s / "walls.json") +
                        " --skip-vertical -o " + q(dir / "report.json"),
                    dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const RegistrationReport rep = read_report(dir / "report.json");
  CHECK(rep.t_z_stage.status == "skipped");
  CHECK(rep.transform.translation.z() == 0.0);
}

TEST_CASE("a single scanned wall is reported as degenerate") {
  const TempDir dir("cli_degenerate");
  write_spec(dir / "spec.json", R"({"density": 40, "scanned_walls": [0]})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "s"), dir).code == 0);
  const auto s = dir / "s";
  const Run r = cli("register --cloud " + q(s / "cloud.ply") + " --walls " + q(s / "walls.json") +
                        " --dtm " + q(s / "dtm.asc") + " -o " + q(dir / "report.json"),
                    dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("DegenerateGeometry") != std::string::npos);
}

TEST_CASE("bad usage and bad input") {
  const TempDir dir("cli_usage");
  CHECK(cli("register --walls nothing.json", dir).code == 2);
  CHECK(cli("frobnicate", dir).code == 2);
  write_text_file(dir / "bad.xyz", "1 2\n");
  write_spec(dir / "spec.json", R"({"density": 20})");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "s"), dir).code == 0);
  const Run r = cli("register --cloud " + q(dir / "bad.xyz") + " --walls " + q(dir / "s" / "walls.json") +
                        " --dtm " + q(dir / "s" / "dtm.asc"),
                    dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("Parse") != std::string::npos);
}

TEST_CASE("eval reports the difference between report and truth") {
  const TempDir dir("cli_eval");
  RegistrationReport rep;
  rep.transform.rotation = Quaternion::from_axis_angle(Vec3(0.1, 0.2, 1).normalized(), 0.03);
  rep.transform.translation = Vec3(0.4, -0.3, 0.2);
  write_report(dir / "r0.json", rep);
  write_text_file(dir / "same.json", transform_to_json(rep.transform));
  RigidTransform shifted = rep.transform;
  shifted.translation += Vec3(0.003, 0.004, -0.01);
  write_text_file(dir / "shifted.json", transform_to_json(shifted));

  REQUIRE(cli("eval --report " + q(dir / "r0.json") + " --truth " + q(dir / "same.json") + " --csv " +
                  q(dir / "same.csv"),
              dir)
              .code == 0);
  REQUIRE(cli("eval --report " + q(dir / "r0.json") + " --truth " + q(dir / "shifted.json") +
                  " --csv " + q(dir / "shifted.csv"),
              dir)
              .code == 0);
  auto row = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    std::vector<double> v;
    std::istringstream fields(line.substr(line.find(',') + 1));
    std::string f;
    while (std::getline(fields, f, ',')) v.push_back(std::stod(f));
    return v;
  };
  const auto same = row(read_text_file(dir / "same.csv"));
  REQUIRE(same.size() == 3);
  CHECK(same[0] < 1e-6);
  CHECK(same[1] < 1e-12);
  CHECK(same[2] < 1e-12);
  const auto diff = row(read_text_file(dir / "shifted.csv"));
  REQUIRE(diff.size() == 3);
  CHECK(diff[0] < 1e-6);
  CHECK(diff[1] == doctest::Approx(0.005).epsilon(1e-6));
  CHECK(diff[2] == doctest::Approx(0.01).epsilon(1e-6));

  std::string args = "eval --truth " + q(dir / "same.json") + " --csv " + q(dir / "batch.csv");
  for (int i = 0; i < 5; ++i) {
    const auto p = dir / ("b" + std::to_string(i) + ".json");
    write_report(p, rep);
    args += " --report " + q(p);
  }
  REQUIRE(cli(args, dir).code == 0);
  std::istringstream batch(read_text_file(dir / "batch.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(batch, line)) ++lines;
  CHECK(lines == 6);
  CHECK(read_text_file(dir / "batch.csv").rfind("report,rotation_deg,horizontal_m,vertical_m\n", 0) == 0);
}

}  // TEST_SUITE
