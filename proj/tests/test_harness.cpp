#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "rvpose/harness.hpp"
#include "rvpose/scenegen.hpp"

using namespace rvpose;

namespace {

RigidTransform random_transform(std::mt19937_64 &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  return {Eigen::AngleAxisd(ang(rng), Vec3(g(rng), g(rng), g(rng)).normalized()).toRotationMatrix(),
          Vec3(g(rng), g(rng), g(rng))};
}

// A dataset of `scenes` generated scenes and results that equal ground truth.
struct EvalFixture {
  std::filesystem::path root;
  std::filesystem::path dataset;
  std::filesystem::path results;

  explicit EvalFixture(const std::string &name, int scenes = 3) {
    root = std::filesystem::temp_directory_path() / ("rvpose_harness_" + name);
    std::filesystem::remove_all(root);
    dataset = root / "data";
    results = root / "results";
    const auto models = standard_models();
    write_models(dataset / "models", models);
    RandomSceneOptions opt;
    opt.object_ids = {1, 2, 4};
    for (int s = 0; s < scenes; ++s) {
      SceneRecord rec;
      rec.frame = generate_scene(random_scene(models, opt, uint64_t(s)), models);
      const std::string scene = "scene_000" + std::to_string(s);
      write_scene(dataset / scene, rec);
      SearchResult res;
      for (const auto &gt : *rec.frame.ground_truth) {
        ObjectResult o;
        o.object_id = gt.object_id;
        o.ok = true;
        o.best = gt;
        o.millis = 100.0;
        res.objects.push_back(o);
      }
      res.stats.total_ms = 300.0;
      std::filesystem::create_directories(results / scene);
      write_result_json(results / scene / "result.json", res);
      write_timing_json(results / scene / "timing.json", res);
    }
  }
  ~EvalFixture() { std::filesystem::remove_all(root); }
};

}  // namespace

TEST_CASE("adds_auc hand-checked cases") {
  const std::vector<double> zeros(5, 0.0);
  CHECK(adds_auc(zeros).auc == 100.0);
  const std::vector<double> half = {0.05};
  CHECK(adds_auc(half).auc == 50.0);
  const std::vector<double> far = {0.1000001, 0.2, 1.0};
  CHECK(adds_auc(far).auc == 0.0);
  const std::vector<double> none;
  CHECK_THROWS_AS(adds_auc(none), Error);
}

TEST_CASE("adds_auc percentages and accuracy") {
  const std::vector<double> e = {0.0, 0.005, 0.01, 0.015, 0.03};
  const AddSCurve c = adds_auc(e);
  CHECK(c.pct_below_1cm == 40.0);
  CHECK(c.pct_below_2cm == 80.0);
  CHECK(c.accuracy(0.01) == doctest::Approx(0.6));
  CHECK(c.accuracy(0.0) == doctest::Approx(0.2));
  // step integral: mean of (0.1 - e) / 0.1
  CHECK(c.auc == doctest::Approx(100.0 * (0.1 + 0.095 + 0.09 + 0.085 + 0.07) / (0.1 * 5)).epsilon(1e-12));
}

TEST_CASE("adds_auc properties") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> e(20);
    for (auto &x : e) x = u(rng);
    const AddSCurve a = adds_auc(e);
    CHECK(a.auc >= 0.0);
    CHECK(a.auc <= 100.0);
    CHECK(a.pct_below_1cm <= a.pct_below_2cm);
    std::shuffle(e.begin(), e.end(), rng);
    CHECK(adds_auc(e).auc == doctest::Approx(a.auc).epsilon(1e-12));
    double last = -1;
    for (double th = 0; th <= 0.1; th += 0.005) {
      CHECK(a.accuracy(th) >= last);
      last = a.accuracy(th);
    }
  }
}

TEST_CASE("adds_error basics") {
  const std::vector<Vec3> one = {Vec3(0.1, 0.2, 0.3)};
  const RigidTransform gt = RigidTransform::rot_z(0.4, Vec3(1, 2, 3));
  CHECK(adds_error(one, gt, gt) == 0.0);
  const RigidTransform shifted = RigidTransform::translation_only(Vec3(0.01, 0, 0)) * gt;
  CHECK(adds_error(one, gt, shifted) == doctest::Approx(0.01).epsilon(1e-9));
  const std::vector<Vec3> none;
  try {
    adds_error(none, gt, gt);
    FAIL("expected EmptyModel");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::EmptyModel);
  }
}

TEST_CASE("adds_error is invariant under a global rigid transform") {
  const auto models = standard_models();
  const auto pts = adds_model_points(models[3], 500);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const RigidTransform gt = random_transform(rng), est = random_transform(rng), g = random_transform(rng);
    CHECK(std::abs(adds_error(pts, g * gt, g * est) - adds_error(pts, gt, est)) < 1e-9);
  }
}

TEST_CASE("adds_error on a cylinder turned about its axis") {
  const auto models = standard_models();
  const auto pts = adds_model_points(models[0]);
  const RigidTransform gt = RigidTransform::rot_z(0.3, Vec3(0.1, -0.2, 0));
  for (double deg : {90.0, 180.0, 33.0}) {
    const RigidTransform est = gt * RigidTransform::rot_z(deg * std::numbers::pi / 180.0);
    CHECK(adds_error(pts, gt, est) < 1e-3);
  }
}

TEST_CASE("model point sampling") {
  const auto models = standard_models();
  const auto all = adds_model_points(models[0], 1000000);
  CHECK(all == models[0].mesh.vertices);
  const auto capped = adds_model_points(models[3], 50, 7);
  CHECK(capped.size() == 50);
  CHECK(adds_model_points(models[3], 50, 7) == capped);
  CHECK_FALSE(adds_model_points(models[3], 50, 8) == capped);
}

TEST_CASE("evaluation of results equal to ground truth") {
  EvalFixture fx("identity");
  const EvalReport r = run_eval(fx.dataset, fx.results);
  CHECK(r.scenes == 3);
  CHECK(r.warning_count() == 0);
  CHECK(r.aggregation == "instance-pooled");
  REQUIRE(r.rows.size() == 4);
  for (const auto &row : r.rows) {
    CHECK(row.auc == 100.0);
    CHECK(row.pct_below_1cm == 100.0);
    CHECK(row.pct_below_2cm == 100.0);
    REQUIRE(row.mean_runtime_s.has_value());
  }
  const EvalRow *pooled = r.find(-1);
  REQUIRE(pooled != nullptr);
  CHECK(pooled->instances == 9);
  CHECK(*pooled->mean_runtime_s == doctest::Approx(0.3));
  CHECK(*r.find(1)->mean_runtime_s == doctest::Approx(0.1));
}

TEST_CASE("one missing object result") {
  EvalFixture fx("missing");
  const auto path = fx.results / "scene_0001" / "result.json";
  SearchResult res = read_result_json(path);
  res.objects.erase(std::remove_if(res.objects.begin(), res.objects.end(),
                                   [](const ObjectResult &o) { return o.object_id == 2; }),
                    res.objects.end());
  write_result_json(path, res);

  const EvalReport r = run_eval(fx.dataset, fx.results);
  CHECK(r.warning_count() == 1);
  REQUIRE(r.missing.size() == 1);
  CHECK(r.missing[0] == MissingEntry{"scene_0001", 2});
  CHECK(r.find(2)->instances == 2);
  CHECK(r.find(-1)->instances == 8);
  CHECK(r.find(2)->auc == 100.0);
}

TEST_CASE("a missing result file and a failed estimate") {
  EvalFixture fx("failed");
  std::filesystem::remove_all(fx.results / "scene_0002");
  const auto path = fx.results / "scene_0000" / "result.json";
  SearchResult res = read_result_json(path);
  res.objects[0].ok = false;
  res.objects[0].failure = "NoValidDepth";
  write_result_json(path, res);

  const EvalReport r = run_eval(fx.dataset, fx.results);
  REQUIRE(r.missing.size() == 1);
  CHECK(r.missing[0] == MissingEntry{"scene_0002", -1});
  const EvalRow *pooled = r.find(-1);
  CHECK(pooled->instances == 6);
  CHECK(pooled->pct_below_1cm == doctest::Approx(500.0 / 6.0));
  CHECK(pooled->auc == doctest::Approx(500.0 / 6.0));
}

TEST_CASE("report round trips through JSON") {
  EvalFixture fx("roundtrip");
  std::filesystem::remove(fx.results / "scene_0001" / "timing.json");
  const EvalReport r = run_eval(fx.dataset, fx.results);
  const auto path = fx.root / "report.json";
  write_report_json(path, r);
  CHECK(read_report_json(path) == r);

  std::ostringstream csv;
  write_report_csv(csv, r);
  CHECK(csv.str().find("all") != std::string::npos);
  CHECK_FALSE(format_report(r).empty());
}

TEST_CASE("a dataset without scenes") {
  const auto root = std::filesystem::temp_directory_path() / "rvpose_harness_empty";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root / "models");
  CHECK(list_scenes(root).empty());
  std::filesystem::remove_all(root);
}
