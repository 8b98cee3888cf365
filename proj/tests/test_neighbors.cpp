#include <doctest.h>

#include <random>

#include "reference.hpp"
#include "rvpose/neighbors.hpp"

using namespace rvpose;

namespace {

bool same(const NeighborResult &a, const NeighborResult &b) {
  return a.k == b.k && a.indices == b.indices && a.sq_dists == b.sq_dists;
}

}  // namespace

TEST_CASE("three-point case") {
  const std::vector<Point> q = {Point(0, 0, 0)};
  const std::vector<Point> t = {Point(1, 0, 0), Point(0, 2, 0)};
  for (auto s : {KnnStrategy::Full, KnnStrategy::Streamed}) {
    const NeighborResult r = knn(s, q, t, 1);
    CHECK(r.index(0) == 0);
    CHECK(r.sq_dist(0) == 1.0f);
  }
}

TEST_CASE("empty target gives the sentinel") {
  const std::vector<Point> q = {Point(0, 0, 0), Point(1, 1, 1)};
  for (auto s : {KnnStrategy::Full, KnnStrategy::Streamed}) {
    const NeighborResult r = knn(s, q, {}, 2);
    CHECK(r.query_count() == 2);
    for (size_t i = 0; i < 2; ++i) {
      CHECK_FALSE(r.has(i, 0));
      CHECK(std::isinf(r.sq_dist(i, 1)));
    }
  }
}

TEST_CASE("k larger than the target returns every target in order") {
  const std::vector<Point> q = {Point(0, 0, 0)};
  const std::vector<Point> t = {Point(3, 0, 0), Point(1, 0, 0), Point(2, 0, 0)};
  for (auto s : {KnnStrategy::Full, KnnStrategy::Streamed}) {
    const NeighborResult r = knn(s, q, t, 5);
    CHECK(r.index(0, 0) == 1);
    CHECK(r.index(0, 1) == 2);
    CHECK(r.index(0, 2) == 0);
    CHECK_FALSE(r.has(0, 3));
    CHECK_FALSE(r.has(0, 4));
  }
}

TEST_CASE("ties go to the lowest target index") {
  const std::vector<Point> q = {Point(0, 0, 0)};
  const std::vector<Point> t = {Point(0, 1, 0), Point(1, 0, 0), Point(0, 0, 1)};
  for (auto s : {KnnStrategy::Full, KnnStrategy::Streamed}) {
    const NeighborResult r = knn(s, q, t, 2);
    CHECK(r.index(0, 0) == 0);
    CHECK(r.index(0, 1) == 1);
  }
}

TEST_CASE("invalid k") {
  const std::vector<Point> q = {Point(0, 0, 0)};
  CHECK_THROWS_AS(knn_full(q, q, 0), Error);
  CHECK_THROWS_AS(knn_streamed(q, q, 0), Error);
}

TEST_CASE("200 x 300 instance equals the exhaustive oracle") {
  std::mt19937_64 rng(7);
  const auto q = reference::random_cloud(200, 0.1, rng);
  const auto t = reference::random_cloud(300, 0.1, rng);
  for (int k : {1, 3, 20}) {
    const auto ref = reference::knn(q, t, k);
    CHECK(same(knn_full(q, t, k), ref));
    CHECK(same(knn_streamed(q, t, k), ref));
  }
}

TEST_CASE("strategies agree bitwise on random instances with any worker count") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<size_t> n(0, 400);
  std::uniform_int_distribution<int> kk(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = reference::random_cloud(n(rng), 0.05, rng);
    const auto t = reference::random_cloud(n(rng), 0.05, rng);
    const int k = kk(rng);
    const auto a = knn_full(q, t, k, 1);
    CHECK(same(a, knn_streamed(q, t, k, 1)));
    CHECK(same(a, knn_streamed(q, t, k, 3)));
    CHECK(same(a, knn_full(q, t, k, 4)));
  }
}

TEST_CASE("exact against the oracle at 1000 x 1000") {
  std::mt19937_64 rng(9);
  const auto q = reference::random_cloud(1000, 1.0, rng);
  const auto t = reference::random_cloud(1000, 1.0, rng);
  const auto ref = reference::knn(q, t, 1);
  CHECK(same(knn_streamed(q, t, 1), ref));
  CHECK(same(knn_full(q, t, 1), ref));
}

TEST_CASE("adding a target point never increases the nearest distance") {
  std::mt19937_64 rng(10);
  auto q = reference::random_cloud(100, 0.1, rng);
  auto t = reference::random_cloud(50, 0.1, rng);
  auto before = knn_streamed(q, t, 1);
  for (int step = 0; step < 50; ++step) {
    t.push_back(reference::random_cloud(1, 0.1, rng)[0]);
    const auto after = knn_streamed(q, t, 1);
    for (size_t i = 0; i < q.size(); ++i) CHECK(after.sq_dist(i) <= before.sq_dist(i));
    before = after;
  }
}

TEST_CASE("streamed relation memory is far below the full relation") {
  std::mt19937_64 rng(11);
  const auto q = reference::random_cloud(1000, 0.1, rng);
  const auto t = reference::random_cloud(10000, 0.1, rng);
  const auto full = knn_full(q, t, 1);
  const auto streamed = knn_streamed(q, t, 1);
  CHECK(full.relation_bytes == 1000u * 10000u * sizeof(float));
  CHECK(double(streamed.relation_bytes) < 0.25 * double(full.relation_bytes));
}
