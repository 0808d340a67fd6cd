#include "l2mreg/error.hpp"
#include "l2mreg/vertical_alignment.hpp"
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

DtmGrid sloped_dtm(double slope) {
  DtmGrid d = flat_dtm(-10, -10, 20, 20, 1.0, 0.0);
  for (int row = 0; row < d.n_rows; ++row) {
    for (int col = 0; col < d.n_cols; ++col) {
      d.elevations[static_cast<std::size_t>(row) * d.n_cols + col] =
          100.0 + slope * d.cell_center(col, row).x();
    }
  }
  return d;
}

std::vector<Vec3> ground_cloud(const DtmGrid& d, std::mt19937_64& rng, std::size_t n, double dz,
                               double sigma) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = uniform(rng, -9, 9), y = uniform(rng, -9, 9);
    pts.emplace_back(x, y, d.sample(x, y) + dz + gaussian(rng, sigma));
  }
  return pts;
}

}  // namespace

TEST_SUITE("vertical_alignment") {

TEST_CASE("cloud on the DTM surface needs no shift") {
  const DtmGrid flat = flat_dtm(-10, -10, 20, 20, 1.0, 100.0);
  std::mt19937_64 rng(301);
  const auto pts = ground_cloud(flat, rng, 20000, 0.0, 0.0);
  CHECK(std::abs(estimate_tz(pts, iota_indices(pts.size()), flat, VerticalParams{}).t_z) < 1e-12);
  // On a slope the disk mean differs from the cell center height only by
  // sampling scatter.
  const DtmGrid d = sloped_dtm(0.05);
  const auto sloped = ground_cloud(d, rng, 20000, 0.0, 0.0);
  CHECK(std::abs(estimate_tz(sloped, iota_indices(sloped.size()), d, VerticalParams{}).t_z) < 1e-3);
}

TEST_CASE("flat cloud 0.3 m above the DTM") {
  const DtmGrid d = flat_dtm(-10, -10, 20, 20, 1.0, 100.0);
  std::mt19937_64 rng(303);
  const auto pts = ground_cloud(d, rng, 20000, 0.3, 0.0);
  const VerticalEstimate e = estimate_tz(pts, iota_indices(pts.size()), d, VerticalParams{});
  CHECK(e.t_z == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(e.n_pairs == e.deltas.size());
  CHECK(e.n_pairs >= 300);
}

TEST_CASE("sloped ground with a -0.12 m offset and noise") {
  const DtmGrid d = sloped_dtm(0.1);
  std::mt19937_64 rng(305);
  const auto pts = ground_cloud(d, rng, 40000, -0.12, 0.005);
  const VerticalEstimate e = estimate_tz(pts, iota_indices(pts.size()), d, VerticalParams{});
  // Global mean-difference oracle over all points.
  double oracle = 0.0;
  for (const auto& p : pts) oracle += d.sample(p.x(), p.y()) - p.z();
  oracle /= static_cast<double>(pts.size());
  CHECK(std::abs(e.t_z - 0.12) < 0.003);
  CHECK(std::abs(e.t_z - oracle) < 0.003);
}

TEST_CASE("vertical shift is equivariant, horizontal shift is ignored on flat ground") {
  const DtmGrid flat = flat_dtm(-10, -10, 20, 20, 1.0, 50.0);
  std::mt19937_64 rng(307);
  auto pts = ground_cloud(flat, rng, 20000, 0.07, 0.004);
  const auto all = iota_indices(pts.size());
  const double base = estimate_tz(pts, all, flat, VerticalParams{}).t_z;
  auto up = pts;
  for (auto& p : up) p.z() += 0.25;
  CHECK(estimate_tz(up, all, flat, VerticalParams{}).t_z == doctest::Approx(base - 0.25).epsilon(1e-9));
  // A horizontal shift changes which points pair with which cells but not
  // the mean height on flat ground; noise-free to make it exact.
  auto clean = ground_cloud(flat, rng, 20000, 0.07, 0.0);
  auto moved = clean;
  for (auto& p : moved) p += Vec3(0.37, -0.21, 0);
  CHECK(estimate_tz(moved, all, flat, VerticalParams{}).t_z ==
        doctest::Approx(estimate_tz(clean, all, flat, VerticalParams{}).t_z).epsilon(1e-12));
}

TEST_CASE("too few pairs") {
  const DtmGrid d = flat_dtm(-10, -10, 20, 20, 1.0, 0.0);
  const std::vector<Vec3> pts = {Vec3(0.5, 0.5, 0), Vec3(0.6, 0.5, 0), Vec3(0.5, 0.6, 0)};
  try {
    estimate_tz(pts, iota_indices(3), d, VerticalParams{});
    FAIL("one pair accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientPairs);
  }
}

TEST_CASE("only the ground indices are used") {
  const DtmGrid d = flat_dtm(-10, -10, 20, 20, 1.0, 0.0);
  std::mt19937_64 rng(309);
  auto pts = ground_cloud(d, rng, 20000, 0.0, 0.0);
  const std::size_t n_ground = pts.size();
  for (int i = 0; i < 5000; ++i) pts.emplace_back(uniform(rng, -9, 9), uniform(rng, -9, 9), 3.0);
  const VerticalEstimate e = estimate_tz(pts, iota_indices(n_ground), d, VerticalParams{});
  CHECK(std::abs(e.t_z) < 1e-12);
}

TEST_CASE("uniform flat ground survives denoising") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 40; ++j) pts.emplace_back(0.1 * i, 0.1 * j, 0.0);
  }
  const auto all = iota_indices(pts.size());
  const auto kept = denoise_ground(pts, all, 8, 2.0);
  // Brute-force statistic: mean kNN distance per point.
  std::vector<double> stat;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    }
    std::partial_sort(d.begin(), d.begin() + 8, d.end());
    stat.push_back(std::accumulate(d.begin(), d.begin() + 8, 0.0) / 8.0);
  }
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / stat.size();
  double var = 0.0;
  for (const double s : stat) var += (s - mean) * (s - mean);
  const double limit = mean + 2.0 * std::sqrt(var / stat.size());
  std::vector<std::size_t> want;
  for (std::size_t i = 0; i < stat.size(); ++i) {
    if (stat[i] <= limit) want.push_back(i);
  }
  CHECK(kept == want);
  // Only boundary points can exceed the limit.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool interior = i / 40 >= 2 && i / 40 < 38 && i % 40 >= 2 && i % 40 < 38;
    if (interior) CHECK(std::binary_search(kept.begin(), kept.end(), i));
  }
}

TEST_CASE("floating points are removed") {
  std::mt19937_64 rng(311);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(uniform(rng, 0, 10), uniform(rng, 0, 10), gaussian(rng, 0.002));
  std::vector<std::size_t> floating;
  for (int i = 0; i < 10; ++i) {
    floating.push_back(pts.size());
    pts.emplace_back(1.0 + 0.9 * i, 5.0, 1.0);
  }
  const auto kept = denoise_ground(pts, iota_indices(pts.size()), 8, 2.0);
  const auto all = iota_indices(pts.size());
  std::vector<std::size_t> removed;
  std::set_difference(all.begin(), all.end(), kept.begin(), kept.end(),
                      std::back_inserter(removed));
  CHECK(std::includes(removed.begin(), removed.end(), floating.begin(), floating.end()));
  CHECK(removed.size() <= floating.size() + 40);
}

TEST_CASE("denoising needs more than k points") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 9)};
  const auto all = iota_indices(pts.size());
  CHECK(denoise_ground(pts, all, 8, 2.0) == all);
}

TEST_CASE("planar ground model stands in for the DTM") {
  const std::vector<WallSurface> ground = {make_wall(
      "G", {Vec3(-10, -10, 1), Vec3(10, -10, 1), Vec3(10, 10, 1), Vec3(-10, 10, 1)})};
  const DtmGrid d = rasterize_ground_model(ground, 1.0);
  CHECK(d.n_cols >= 20);
  CHECK(d.sample(0.2, 0.3) == doctest::Approx(1.0));
  const auto ref = surface_reference_points(ground, 1.0);
  CHECK(ref.size() >= 400);
  for (const auto& r : ref) CHECK(r.z() == doctest::Approx(1.0));
  std::mt19937_64 rng(313);
  std::vector<Vec3> pts;
  for (int i = 0; i < 10000; ++i) pts.emplace_back(uniform(rng, -9, 9), uniform(rng, -9, 9), 1.2);
  const VerticalEstimate e = estimate_tz(pts, iota_indices(pts.size()), ref, VerticalParams{});
  CHECK(e.t_z == doctest::Approx(-0.2));
}

TEST_CASE("worker count does not change the estimate") {
  const DtmGrid d = sloped_dtm(0.03);
  std::mt19937_64 rng(315);
  const auto pts = ground_cloud(d, rng, 30000, 0.1, 0.005);
  VerticalParams one, eight;
  eight.workers = 8;
  const auto all = iota_indices(pts.size());
  CHECK(estimate_tz(pts, all, d, one).t_z == estimate_tz(pts, all, d, eight).t_z);
  CHECK(denoise_ground(pts, all, 8, 2.0, 1) == denoise_ground(pts, all, 8, 2.0, 8));
}

}  // TEST_SUITE
