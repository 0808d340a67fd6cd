#include "l2mreg/error.hpp"
#include "l2mreg/ghm_solver.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/LU>

using namespace l2mreg;
using namespace l2mreg::test;

namespace {

/// Points on `plane` (near `center`, spread in-plane), pre-mapped by the
/// inverse of `truth` so that truth carries them back onto the plane.
Correspondence observe(const std::string& id, const PlaneParams& plane, const Vec3& center,
                       const RigidTransform& truth, std::size_t n, double sigma,
                       std::mt19937_64& rng,
                       CorrespondenceKind kind = CorrespondenceKind::kFacade) {
  Vec3 u = plane.normal.cross(Vec3::UnitZ());
  if (u.norm() < 1e-6) u = Vec3::UnitX();
  u.normalize();
  const Vec3 v = plane.normal.cross(u).normalized();
  const Vec3 foot = center - plane.signed_distance(center) * plane.normal;
  const RigidTransform inv = truth.inverse();
  Correspondence c;
  c.wall_id = id;
  c.model_plane = plane;
  c.kind = kind;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 on = foot + u * uniform(rng, -3, 3) + v * uniform(rng, -1.5, 1.5);
    const Vec3 noisy = on + Vec3(gaussian(rng, sigma), gaussian(rng, sigma), gaussian(rng, sigma));
    c.lidar_points.push_back(inv.apply(noisy));
  }
  return c;
}

RigidTransform truth_transform(double tz = 0.0) {
  RigidTransform t;
  t.rotation = Quaternion::from_axis_angle(Vec3::UnitZ(), 1.0 / kDegPerRad);
  t.translation = Vec3(0.10, -0.05, tz);
  return t;
}

/// Two perpendicular walls and an oblique third, all vertical.
std::vector<Correspondence> facades(const RigidTransform& truth, std::size_t n, double sigma,
                                    std::mt19937_64& rng) {
  return {observe("W0", {Vec3(0, -1, 0), -6.0}, Vec3(0, -6, 1.5), truth, n, sigma, rng),
          observe("W1", {Vec3(1, 0, 0), -10.0}, Vec3(10, 0, 1.5), truth, n, sigma, rng),
          observe("W2", {Vec3(-1, 1, 0).normalized(), -5.0}, Vec3(-6, 2, 1.5), truth, n, sigma,
                  rng)};
}

double horizontal_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation - b.translation).head<2>().norm();
}

long rank_of(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  return lu.rank();
}

}  // namespace

TEST_SUITE("ghm_solver") {

TEST_CASE("two perpendicular walls with the pseudo-plane: 201 rows, rank 7") {
  std::mt19937_64 rng(201);
  const RigidTransform id;
  const std::vector<Correspondence> c = {
      observe("A", {Vec3(1, 0, 0), -2.0}, Vec3(2, 0, 1), id, 100, 0.0, rng),
      observe("B", {Vec3(0, 1, 0), -3.0}, Vec3(0, 3, 1), id, 100, 0.0, rng)};
  const LinearizedSystem s = assemble_system(c, true, to_params(id));
  CHECK(s.a.rows() == 201);
  CHECK(s.a.cols() == 7);
  CHECK(s.point_rows == 200);
  CHECK(s.pseudo_row);
  Eigen::MatrixXd stacked(202, 7);
  stacked << s.a, s.c;
  CHECK(rank_of(stacked) == 7);
  // Pseudo-plane row: parameter-only, selects t_z.
  Eigen::Matrix<double, 1, 7> e_tz = Eigen::Matrix<double, 1, 7>::Zero();
  e_tz[6] = 1.0;
  CHECK(s.a.row(200) == e_tz);
  CHECK(s.b.row(200).isZero());
  CHECK(s.w[200] == 0.0);
}

TEST_CASE("facade-only system without the pseudo-plane has a zero t_z column") {
  std::mt19937_64 rng(203);
  const RigidTransform id;
  const std::vector<Correspondence> c = {
      observe("A", {Vec3(1, 0, 0), -2.0}, Vec3(2, 0, 1), id, 100, 0.0, rng),
      observe("B", {Vec3(0, 1, 0), -3.0}, Vec3(0, 3, 1), id, 100, 0.0, rng)};
  const LinearizedSystem s = assemble_system(c, false, to_params(id));
  CHECK(s.a.rows() == 200);
  CHECK(s.a.col(6).isZero(0.0));
  Eigen::MatrixXd stacked(201, 7);
  stacked << s.a, s.c;
  CHECK(rank_of(stacked) <= 6);
}

TEST_CASE("a single wall is degenerate") {
  std::mt19937_64 rng(205);
  const std::vector<Correspondence> c = {
      observe("A", {Vec3(1, 0, 0), -2.0}, Vec3(2, 0, 1), {}, 100, 0.0, rng)};
  for (const bool pseudo : {true, false}) {
    try {
      assemble_system(c, pseudo, to_params({}));
      FAIL("one wall accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDegenerateGeometry);
    }
  }
  try {
    solve(c);
    FAIL("one wall solved");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateGeometry);
  }
}

TEST_CASE("parallel walls are degenerate") {
  std::mt19937_64 rng(207);
  const std::vector<Correspondence> c = {
      observe("A", {Vec3(1, 0, 0), -2.0}, Vec3(2, 0, 1), {}, 100, 0.0, rng),
      observe("B", {Vec3(1, 0, 0), 2.0}, Vec3(-2, 0, 1), {}, 100, 0.0, rng)};
  CHECK_THROWS_AS(solve(c), Error);
}

TEST_CASE("noiseless forward construction is recovered") {
  std::mt19937_64 rng(209);
  const RigidTransform truth = truth_transform();
  auto c = facades(truth, 200, 0.0, rng);
  // A horizontal plane makes the three planes mutually perpendicular.
  c.push_back(observe("R", {Vec3(0, 0, 1), -6.0}, Vec3(0, 0, 6), truth, 200, 0.0, rng));
  const SolverReport r = solve(c);
  CHECK(r.converged);
  const Quaternion q = truth.rotation.canonical();
  CHECK(std::abs(r.transform.rotation.q0 - q.q0) < 1e-9);
  CHECK(std::abs(r.transform.rotation.q1 - q.q1) < 1e-9);
  CHECK(std::abs(r.transform.rotation.q2 - q.q2) < 1e-9);
  CHECK(std::abs(r.transform.rotation.q3 - q.q3) < 1e-9);
  CHECK(std::abs(r.transform.translation.x() - 0.10) < 1e-9);
  CHECK(std::abs(r.transform.translation.y() + 0.05) < 1e-9);
  CHECK(r.transform.translation.z() == 0.0);
  CHECK(std::abs(r.raw_t_z) < 1e-9);
}

TEST_CASE("points already on their planes give the identity") {
  std::mt19937_64 rng(211);
  const auto c = facades({}, 100, 0.0, rng);
  const SolverReport r = solve(c);
  CHECK(rotation_angle_between(r.transform.rotation, Quaternion::identity()) < 1e-9);
  CHECK(r.transform.translation.norm() < 1e-12);
  for (const double rms : r.rms_residual) CHECK(rms < 1e-12);
  CHECK(r.wall_ids == std::vector<std::string>{"W0", "W1", "W2"});
}

TEST_CASE("Monte-Carlo noise: bias and a-posteriori sigma") {
  const RigidTransform truth = truth_transform();
  double sum_h = 0.0, sum_rot = 0.0, sum_sigma = 0.0;
  Vec3 signed_h = Vec3::Zero(), signed_rot = Vec3::Zero();
  const int runs = 100;
  for (int seed = 0; seed < runs; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto c = facades(truth, 300, 0.005, rng);
    const SolverReport r = solve(c);
    sum_h += horizontal_error(r.transform, truth);
    sum_rot += rotation_angle_between(r.transform.rotation, truth.rotation);
    signed_h += r.transform.translation - truth.translation;
    const Quaternion rel = r.transform.rotation * truth.rotation.conjugate();
    signed_rot += 2.0 * kDegPerRad * rel.canonical().as_vector().tail<3>();
    sum_sigma += std::sqrt(r.variance_factor);
  }
  MESSAGE("mean horizontal error " << sum_h / runs << " m, rotation " << sum_rot / runs
                                   << " deg, sigma0 " << sum_sigma / runs << " m");
  // Unbiased: the signed errors average out well below their spread.
  CHECK(sum_h / runs < 0.002);
  CHECK(sum_rot / runs < 0.05);
  CHECK(signed_h.head<2>().norm() / runs < 0.001);
  CHECK(signed_rot.norm() / runs < 0.01);
  CHECK(std::abs(sum_sigma / runs - 0.005) < 0.2 * 0.005);
}

TEST_CASE("analytic partials match finite differences") {
  std::mt19937_64 rng(213);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PlaneParams plane{random_unit(rng), uniform(rng, -20, 20)};
    const Vec3 p(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, -5, 10));
    const RigidTransform t = random_transform(rng, 1.0);
    worst = std::max(worst, jacobian_check(plane, p, to_params(t)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("B row is the plane normal at the identity and C is e0") {
  for (const Vec3& n : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, -1, 0)}) {
    const ConditionRow row = condition_row({n, -2.0}, Vec3(0.3, -1.2, 4.0), to_params({}));
    CHECK(row.b == n.transpose());
  }
  std::mt19937_64 rng(215);
  const auto c = facades({}, 20, 0.0, rng);
  const LinearizedSystem s = assemble_system(c, true, to_params({}));
  Eigen::Matrix<double, 1, 7> e0 = Eigen::Matrix<double, 1, 7>::Zero();
  e0[0] = 1.0;
  CHECK(s.c == e0);
  CHECK(s.wc == 0.0);
}

TEST_CASE("pseudo-plane solve equals the solve that omits t_z") {
  std::mt19937_64 rng(217);
  const auto c = facades(truth_transform(0.3), 300, 0.005, rng);
  SolverOptions with;
  SolverOptions omit;
  omit.omit_tz = true;
  const SolverReport a = solve(c, with), b = solve(c, omit);
  CHECK((a.params.head<6>() - b.params.head<6>()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.transform.translation.z() == 0.0);
  CHECK(b.transform.translation.z() == 0.0);
}

TEST_CASE("facade-only input without the pseudo-plane is rank deficient") {
  std::mt19937_64 rng(219);
  const auto c = facades(truth_transform(), 100, 0.0, rng);
  SolverOptions o;
  o.include_pseudo_plane = false;
  try {
    solve(c, o);
    FAIL("unobservable t_z accepted");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::kRankDeficient || e.kind() == ErrorKind::kDegenerateGeometry));
  }
}

TEST_CASE("ground bias: pseudo-plane path decoupled, coupled path shifts") {
  const RigidTransform truth = truth_transform(0.2);
  auto build = [&](double bias) {
    std::mt19937_64 rng(221);
    auto c = facades(truth, 300, 0.002, rng);
    const PlaneParams g0{Vec3(0.05, 0, 1).normalized(), 0.0};
    const PlaneParams g1{Vec3(0, 0.08, 1).normalized(), -0.1};
    c.push_back(observe("G0", g0, Vec3(0, -8, 0), truth, 300, 0.002, rng,
                        CorrespondenceKind::kGround));
    c.push_back(observe("G1", g1, Vec3(12, 0, 0), truth, 300, 0.002, rng,
                        CorrespondenceKind::kGround));
    for (auto& p : c.back().lidar_points) p.z() += bias;
    return c;
  };
  const auto clean = build(0.0), biased = build(0.3);
  for (const double beta : {0.3}) {
    CAPTURE(beta);
    const SolverReport a = solve(clean), b = solve(biased);
    CHECK((a.params.head<6>() - b.params.head<6>()).cwiseAbs().maxCoeff() < 1e-9);
  }
  SolverOptions coupled;
  coupled.include_pseudo_plane = false;
  const SolverReport ca = solve(clean, coupled), cb = solve(biased, coupled);
  CHECK(std::abs(ca.transform.translation.z() - truth.translation.z()) < 0.005);
  const double shift = horizontal_error(ca.transform, cb.transform);
  MESSAGE("coupled horizontal shift " << shift << " m");
  CHECK(shift > 0.001);
}

TEST_CASE("objective is non-increasing on noiseless input") {
  std::mt19937_64 rng(223);
  RigidTransform truth;
  truth.rotation = Quaternion::from_axis_angle(Vec3(0.1, 0.2, 1).normalized(), 3.0 / kDegPerRad);
  truth.translation = Vec3(0.4, -0.3, 0.0);
  const auto c = facades(truth, 200, 0.0, rng);
  const SolverReport r = solve(c);
  REQUIRE(r.objective_history.size() >= 2);
  for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
    CHECK(r.objective_history[i] <= r.objective_history[i - 1] * (1 + 1e-12) + 1e-24);
  }
}

TEST_CASE("negated quaternion is the same rotation and the same report") {
  std::mt19937_64 rng(225);
  const Quaternion q = random_quaternion(rng);
  const Quaternion neg{-q.q0, -q.q1, -q.q2, -q.q3};
  CHECK((q.matrix() - neg.matrix()).cwiseAbs().maxCoeff() == 0.0);
  const auto c = facades(truth_transform(), 200, 0.003, rng);
  ParamVector x0 = to_params({});
  const SolverReport a = solve(c, {}, x0);
  x0.head<4>() = -x0.head<4>();
  const SolverReport b = solve(c, {}, x0);
  CHECK((a.params - b.params).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.transform.rotation.q0 >= 0.0);
}

TEST_CASE("worker count does not change the result") {
  std::mt19937_64 rng(227);
  const auto c = facades(truth_transform(), 5000, 0.004, rng);
  SolverOptions one, eight;
  eight.workers = 8;
  const SolverReport a = solve(c, one), b = solve(c, eight);
  CHECK(a.params == b.params);
  CHECK(a.variance_factor == b.variance_factor);
}

TEST_CASE("iteration cap raises NoConvergence with the last state") {
  std::mt19937_64 rng(229);
  RigidTransform truth;
  truth.rotation = Quaternion::from_axis_angle(Vec3::UnitZ(), 5.0 / kDegPerRad);
  truth.translation = Vec3(0.5, 0.2, 0);
  const auto c = facades(truth, 100, 0.0, rng);
  SolverOptions o;
  o.max_iter = 1;
  try {
    solve(c, o);
    FAIL("converged in one iteration");
  } catch (const NoConvergenceError& e) {
    CHECK(e.kind() == ErrorKind::kNoConvergence);
    CHECK(e.last_state().iterations == 1);
  }
}

TEST_CASE("pseudo-plane pair validation") {
  PseudoPlanePair ok;
  CHECK_NOTHROW(ok.validate());
  PseudoPlanePair bad;
  bad.offset_source = 0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

}  // TEST_SUITE
