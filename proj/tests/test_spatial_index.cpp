#include "l2mreg/spatial_index.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace l2mreg;
using namespace l2mreg::test;

namespace {

std::vector<Vec3> cloud(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, 0, 2));
  }
  return pts;
}

double dist(const Vec3& a, const Vec3& b, bool planar) {
  return planar ? (a - b).head<2>().norm() : (a - b).norm();
}

}  // namespace

TEST_SUITE("spatial_index") {

TEST_CASE("radius queries equal brute force") {
  const auto pts = cloud(1, 3000);
  std::mt19937_64 rng(2);
  for (const auto mode : {GridIndex::Mode::kPlanar, GridIndex::Mode::kSpatial}) {
    const bool planar = mode == GridIndex::Mode::kPlanar;
    const GridIndex index(pts, 0.37, mode);
    for (int q = 0; q < 100; ++q) {
      const Vec3 c(uniform(rng, -6, 6), uniform(rng, -6, 6), uniform(rng, -1, 3));
      const double r = uniform(rng, 0.05, 1.5);
      std::vector<std::size_t> got;
      index.radius_query(c, r, got);
      std::sort(got.begin(), got.end());
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (dist(pts[i], c, planar) <= r) want.push_back(i);
      }
      CHECK(got == want);
    }
  }
}

TEST_CASE("knn equals brute force with index tie-break") {
  const auto pts = cloud(3, 2000);
  std::mt19937_64 rng(4);
  for (const auto mode : {GridIndex::Mode::kPlanar, GridIndex::Mode::kSpatial}) {
    const bool planar = mode == GridIndex::Mode::kPlanar;
    const GridIndex index(pts, 0.5, mode);
    for (int q = 0; q < 50; ++q) {
      const std::size_t self = static_cast<std::size_t>(uniform(rng, 0, 1999.99));
      const auto got = index.knn(pts[self], 8, self);
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != self) all.emplace_back(dist(pts[i], pts[self], planar), i);
      }
      std::sort(all.begin(), all.end());
      all.resize(8);
      REQUIRE(got.size() == all.size());
      for (std::size_t k = 0; k < all.size(); ++k) {
        CHECK(got[k].second == all[k].second);
        CHECK(std::abs(got[k].first - all[k].first) < 1e-12);
      }
    }
  }
}

TEST_CASE("subset index only returns subset members") {
  const auto pts = cloud(5, 1000);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < pts.size(); i += 3) subset.push_back(i);
  const GridIndex index(pts, subset, 0.4, GridIndex::Mode::kSpatial);
  CHECK(index.size() == subset.size());
  std::vector<std::size_t> got;
  index.radius_query(Vec3(0, 0, 1), 3.0, got);
  for (const auto i : got) CHECK(i % 3 == 0);
}

TEST_CASE("empty index answers nothing") {
  const std::vector<Vec3> none;
  const GridIndex index(none, 1.0, GridIndex::Mode::kPlanar);
  std::vector<std::size_t> got;
  index.radius_query(Vec3::Zero(), 10.0, got);
  CHECK(got.empty());
  CHECK(index.knn(Vec3::Zero(), 3).empty());
}

}  // TEST_SUITE
