#include "l2mreg/error.hpp"
#include "l2mreg/plinth_localization.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace l2mreg;
using namespace l2mreg::test;

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

/// Plinth at x = 0 for z in [0, h_p], facade at x = delta above it. The
/// returned flags mark facade points.
std::vector<Vec3> two_band(std::mt19937_64& rng, double delta, double sigma, double h_p,
                           double height, double density, std::vector<bool>& facade) {
  const double length = 6.0;
  std::vector<Vec3> pts;
  const auto n_plinth = static_cast<std::size_t>(density * length * h_p);
  const auto n_facade = static_cast<std::size_t>(density * length * (height - h_p));
  for (std::size_t i = 0; i < n_plinth; ++i) {
    pts.emplace_back(gaussian(rng, sigma), uniform(rng, 0, length), uniform(rng, 0, h_p));
    facade.push_back(false);
  }
  for (std::size_t i = 0; i < n_facade; ++i) {
    pts.emplace_back(delta + gaussian(rng, sigma), uniform(rng, 0, length),
                     uniform(rng, h_p, height));
    facade.push_back(true);
  }
  return pts;
}

}  // namespace

TEST_SUITE("plinth_localization") {

TEST_CASE("RANSAC recovers a plane among outliers") {
  std::mt19937_64 rng(71);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1000; ++i) pts.emplace_back(uniform(rng, 0, 10), uniform(rng, 0, 10), 0.0);
  for (int i = 0; i < 50; ++i) {
    pts.emplace_back(uniform(rng, 0, 10), uniform(rng, 0, 10), uniform(rng, 0.5, 5));
  }
  RansacOptions o;
  o.t_dis = 0.02;
  o.min_inliers = 50;
  o.seed = 1;
  const auto fit = ransac_largest_plane(pts, o);
  REQUIRE(fit.has_value());
  CHECK(fit->inliers.size() >= 1000);
  CHECK(std::abs(std::abs(fit->plane.normal.z()) - 1.0) < 1e-9);
  std::vector<std::size_t> direct;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (point_plane_distance(pts[i], fit->plane) <= 0.02) direct.push_back(i);
  }
  CHECK(fit->inliers == direct);
}

TEST_CASE("RANSAC reports nothing below min_inliers") {
  std::mt19937_64 rng(73);
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
  RansacOptions o;
  o.min_inliers = 50;
  CHECK_FALSE(ransac_largest_plane(pts, o).has_value());
}

TEST_CASE("RANSAC prefers the larger of two parallel planes") {
  std::mt19937_64 rng(79);
  std::vector<Vec3> pts;
  for (int i = 0; i < 600; ++i) pts.emplace_back(0.0, uniform(rng, 0, 5), uniform(rng, 0, 3));
  for (int i = 0; i < 400; ++i) pts.emplace_back(1.0, uniform(rng, 0, 5), uniform(rng, 0, 3));
  const std::vector<PlaneParams> truth = {{Vec3(1, 0, 0), 0.0}, {Vec3(1, 0, 0), -1.0}};
  std::vector<std::size_t> counts;
  for (const auto& t : truth) {
    counts.push_back(static_cast<std::size_t>(std::count_if(
        pts.begin(), pts.end(), [&](const Vec3& p) { return point_plane_distance(p, t) <= 0.02; })));
  }
  const std::size_t best = counts[0] >= counts[1] ? 0 : 1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RansacOptions o;
    o.seed = seed;
    const auto fit = ransac_largest_plane(pts, o);
    REQUIRE(fit.has_value());
    CHECK(fit->inliers.size() == counts[best]);
    CHECK(point_plane_distance(Vec3(0, 2, 1), fit->plane) < 1e-9);
  }
}

TEST_CASE("nearest-rank percentile band") {
  CutoffRange r = percentile_band({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(r.z_min == 1.0);
  CHECK(r.z_max == 9.0);
  r = percentile_band({5, 5, 5, 5});
  CHECK(r.z_min == 5.0);
  CHECK(r.z_max == 5.0);
  CHECK_THROWS_AS(percentile_band({1.0}), Error);
}

TEST_CASE("percentile band of uniform samples matches the sort oracle") {
  std::mt19937_64 rng(83);
  std::vector<double> z;
  for (int i = 0; i < 1000; ++i) z.push_back(uniform(rng, 0, 1));
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  const CutoffRange r = percentile_band(z);
  CHECK(r.z_min == sorted[99]);   // ceil(0.1 * 1000) = 100th value
  CHECK(r.z_max == sorted[899]);  // ceil(0.9 * 1000) = 900th value
  CHECK(std::abs(r.z_min - 0.1) < 0.02);
  CHECK(std::abs(r.z_max - 0.9) < 0.02);
}

TEST_CASE("single wall: one valid round, band of that plane") {
  std::mt19937_64 rng(89);
  const auto pts = wall_points_x(rng, 3000, 0, 0, 6, 0, 3);
  const auto all = iota_indices(pts.size());
  LocalizeParams params;
  const LocalizeResult r = localize_representative_subspace(pts, all, params, 7);
  CHECK(r.valid_rounds == 1);
  std::vector<double> z;
  for (const auto& p : pts) z.push_back(p.z());
  const CutoffRange expected = percentile_band(z);
  CHECK(r.range.z_min == expected.z_min);
  CHECK(r.range.z_max == expected.z_max);
  for (const auto i : r.subspace) CHECK(r.range.contains(pts[i].z()));
  CHECK(r.subspace.size() ==
        static_cast<std::size_t>(std::count_if(pts.begin(), pts.end(), [&](const Vec3& p) {
          return r.range.contains(p.z());
        })));
}

TEST_CASE("offset facade above a plinth: band inside the plinth") {
  std::mt19937_64 rng(97);
  std::vector<bool> facade;
  const auto pts = two_band(rng, 0.1, 0.0, 0.5, 3.0, 400, facade);
  const auto all = iota_indices(pts.size());
  const LocalizeResult r = localize_representative_subspace(pts, all, LocalizeParams{}, 3);
  CHECK(r.range.z_min >= 0.0);
  CHECK(r.range.z_max <= 0.5);
  REQUIRE_FALSE(r.subspace.empty());
  for (const auto i : r.subspace) CHECK_FALSE(facade[i]);
}

TEST_CASE("ground-only neighborhood has no valid facade") {
  std::mt19937_64 rng(101);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(uniform(rng, 0, 5), uniform(rng, 0, 5), gaussian(rng, 0.003));
  try {
    localize_representative_subspace(pts, iota_indices(pts.size()), LocalizeParams{}, 1);
    FAIL("ground accepted as facade");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoValidFacade);
  }
}

TEST_CASE("postconditions and determinism on noisy two-band scenes") {
  for (const double delta : {0.05, 0.1, 0.2}) {
    for (const double sigma : {0.0, 0.002, 0.005}) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(delta * 1000 + sigma * 1e6));
      std::vector<bool> facade;
      const auto pts = two_band(rng, delta, sigma, 0.5, 4.0, 300, facade);
      // Neighborhood is a strided subset so indices differ from positions.
      std::vector<std::size_t> n_i;
      for (std::size_t i = 0; i < pts.size(); i += 2) n_i.push_back(i);
      const LocalizeResult a = localize_representative_subspace(pts, n_i, LocalizeParams{}, 5);
      const LocalizeResult b = localize_representative_subspace(pts, n_i, LocalizeParams{}, 5);
      CHECK(a.subspace == b.subspace);
      CHECK(a.valid_rounds <= LocalizeParams{}.max_rounds);
      CHECK(std::includes(n_i.begin(), n_i.end(), a.subspace.begin(), a.subspace.end()));
      std::size_t facade_count = 0;
      for (const auto i : a.subspace) {
        CHECK(a.range.contains(pts[i].z()));
        facade_count += facade[i] ? 1 : 0;
      }
      CAPTURE(delta);
      CAPTURE(sigma);
      CHECK(facade_count == 0);
    }
  }
}

TEST_CASE("max_rounds bounds the loop") {
  std::mt19937_64 rng(103);
  std::vector<bool> facade;
  const auto pts = two_band(rng, 0.1, 0.0, 0.5, 3.0, 400, facade);
  LocalizeParams p;
  p.max_rounds = 1;
  const LocalizeResult r = localize_representative_subspace(pts, iota_indices(pts.size()), p, 3);
  CHECK(r.valid_rounds == 1);
  CHECK(r.range.z_min > 0.5);  // stopped on the facade
}

TEST_CASE("default min inliers and wall seeds") {
  CHECK(default_min_inliers(100) == 50);
  CHECK(default_min_inliers(10000) == 100);
  CHECK(default_min_inliers(12345) == 124);
  CHECK(wall_seed(1, "W0") == wall_seed(1, "W0"));
  CHECK(wall_seed(1, "W0") != wall_seed(1, "W1"));
  CHECK(wall_seed(1, "W0") != wall_seed(2, "W0"));
}

}  // TEST_SUITE
