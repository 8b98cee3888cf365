#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "rvpose/harness.hpp"
#include "rvpose/scenegen.hpp"
#include "rvpose/search.hpp"

using namespace rvpose;

namespace {

const std::vector<ObjectModel> &models() {
  static const std::vector<ObjectModel> m = standard_models();
  return m;
}

SceneFrame scene(std::vector<int> ids, uint64_t seed) {
  RandomSceneOptions opt;
  opt.object_ids = std::move(ids);
  return generate_scene(random_scene(models(), opt, seed), models());
}

SearchConfig config_3dof() {
  SearchConfig cfg;
  cfg.mode = SearchMode::ThreeDof;
  cfg.workspace = Workspace{};
  return cfg;
}

const ObjectState &truth(const SceneFrame &f, int id) {
  for (const auto &s : *f.ground_truth)
    if (s.object_id == id) return s;
  throw Error(ErrorCode::UnknownObjectId, "no ground truth");
}

double adds(const SceneFrame &f, const ObjectResult &r) {
  const auto pts = adds_model_points(*find_model(models(), r.object_id));
  return adds_error(pts, truth(f, r.object_id).pose, r.best.pose);
}

std::string result_json(const SearchResult &r) {
  std::ostringstream s;
  write_result_json(s, r);
  return s.str();
}

CostBreakdown cost_at(const SceneFrame &f, SearchConfig cfg, int model_id, const RigidTransform &pose) {
  cfg.refine = false;
  const std::vector<ProposalTask> task = {{model_id, pose}};
  return evaluate_proposals(f, models(), cfg, task).costs[0];
}

}  // namespace

TEST_CASE("select_best") {
  const std::vector<CostBreakdown> a = {{5, 0}, {1, 2}, {4, 5}};
  CHECK(select_best(a) == 1);
  const std::vector<CostBreakdown> tie = {{2, 2}, {4, 0}};
  CHECK(select_best(tie) == 0);
  const std::vector<CostBreakdown> none;
  CHECK_THROWS_AS(select_best(none), Error);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> c(0, 20);
  for (int t = 0; t < 50; ++t) {
    std::vector<CostBreakdown> costs(30);
    for (auto &x : costs) x = {c(rng), c(rng)};
    const size_t best = select_best(costs);
    // evaluating in any order and reducing by (total, index) picks the same slot
    std::vector<size_t> order(costs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t pick = order[0];
    for (size_t i : order) {
      const auto key = std::make_pair(costs[i].total(), i);
      if (key < std::make_pair(costs[pick].total(), pick)) pick = i;
    }
    CHECK(pick == best);
  }
}

TEST_CASE("noiseless 3-DoF scene is solved to under a centimeter") {
  const SceneFrame f = scene({1, 2, 3, 4, 5, 6}, 7);
  const SearchConfig cfg = config_3dof();
  const SearchResult r = estimate_poses(f, models(), cfg);
  REQUIRE(r.objects.size() == 6);
  for (const auto &o : r.objects) {
    REQUIRE(o.ok);
    CHECK(adds(f, o) < 0.01);
    CHECK(o.proposals_evaluated == 11u * 11u);  // symmetric models collapse yaw
  }
}

TEST_CASE("best cost is the minimum of an exhaustive sequential evaluation") {
  const SceneFrame f = scene({1, 4, 7}, 3);
  SearchConfig cfg = config_3dof();
  const Vec3 t = truth(f, 7).pose.translation();
  cfg.workspace = Workspace{t.x() - 0.12, t.x() + 0.12, t.y() - 0.08, t.y() + 0.08};
  cfg.object_ids = {7};
  const auto tasks = scene_proposals(f, models(), cfg);
  REQUIRE(tasks.size() <= 200);
  REQUIRE(tasks.size() > 16);

  std::vector<CostBreakdown> seq;
  for (const auto &task : tasks) seq.push_back(evaluate_proposals(f, models(), cfg, std::span(&task, 1)).costs[0]);
  const size_t best = select_best(seq);

  const SearchResult r = estimate_poses(f, models(), cfg);
  REQUIRE(r.objects.size() == 1);
  CHECK(r.objects[0].proposal_index == best);
  CHECK(r.objects[0].cost == seq[best]);
  CHECK(r.objects[0].proposals_evaluated == tasks.size());
}

TEST_CASE("results do not depend on worker count or chunking") {
  const SceneFrame f = scene({2, 5, 8}, 11);
  SearchConfig cfg = config_3dof();
  const std::string one = result_json(estimate_poses(f, models(), cfg));
  cfg.workers = 3;
  CHECK(result_json(estimate_poses(f, models(), cfg)) == one);
  cfg.chunk_size = 37;
  CHECK(result_json(estimate_poses(f, models(), cfg)) == one);
}

TEST_CASE("occluder marking lowers the cost of the true pose of an occluded object") {
  RandomSceneOptions opt;
  opt.object_ids = {1, 2, 3, 4, 5, 6};
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const SceneSpec spec = occluded_scene(models(), opt, 4, 1, 0.3, seed);
    const SceneFrame f = generate_scene(spec, models());
    SearchConfig on = config_3dof();
    SearchConfig off = on;
    off.occluder_marking = false;
    const RigidTransform gt = truth(f, 4).pose;
    const CostBreakdown c_on = cost_at(f, on, 4, gt);
    const CostBreakdown c_off = cost_at(f, off, 4, gt);
    CHECK(c_off.total() > c_on.total());
    CHECK(c_off.j_r > c_on.j_r);
  }
}

TEST_CASE("same-shape cylinders differ only through color") {
  const SceneFrame f = scene({1, 2}, 5);
  SearchConfig cfg = config_3dof();
  const SearchResult r = estimate_poses(f, models(), cfg);
  for (const auto &o : r.objects) CHECK(adds(f, o) < 0.01);

  const RigidTransform pose2 = truth(f, 2).pose;
  SearchConfig grey = cfg;
  grey.use_color = false;
  const auto own = cost_at(f, grey, 2, pose2), swapped = cost_at(f, grey, 1, pose2);
  CHECK(std::abs(own.total() - swapped.total()) <= 1);
  CHECK(cost_at(f, cfg, 1, pose2).total() > cost_at(f, cfg, 2, pose2).total());
}

TEST_CASE("refinement does not raise the selected cost") {
  size_t trials = 0, ok = 0;
  for (uint64_t seed : {21u, 22u}) {
    const SceneFrame f = scene({1, 2, 3, 4, 5, 6}, seed);
    SearchConfig cfg = config_3dof();
    const SearchResult refined = estimate_poses(f, models(), cfg);
    cfg.refine = false;
    const SearchResult raw = estimate_poses(f, models(), cfg);
    for (const auto &o : refined.objects) {
      ++trials;
      ok += o.cost.total() <= raw.find(o.object_id)->cost.total();
    }
  }
  CHECK(double(ok) >= 0.95 * double(trials));
}

TEST_CASE("per-object failures") {
  SceneFrame f = scene({1, 4}, 2);

  SUBCASE("degenerate workspace") {
    SearchConfig cfg = config_3dof();
    cfg.workspace = Workspace{0.1, 0.0, 0.0, 0.1};
    const SearchResult r = estimate_poses(f, models(), cfg);
    REQUIRE(r.objects.size() == 2);
    for (const auto &o : r.objects) {
      CHECK_FALSE(o.ok);
      CHECK_FALSE(o.failure.empty());
      CHECK(o.proposals_evaluated == 0);
    }
    CHECK(r.any_failed());
  }
  SUBCASE("no valid depth for one object in 6-DoF") {
    for (const auto &d : f.detections)
      if (d.object_id == 4)
        for (int32_t idx : d.mask_pixels) f.depth.data[size_t(idx)] = 0.f;
    SearchConfig cfg;
    cfg.mode = SearchMode::SixDof;
    cfg.proposals.viewpoints = 6;
    cfg.proposals.inplane = 4;
    const SearchResult r = estimate_poses(f, models(), cfg);
    REQUIRE(r.find(4) != nullptr);
    CHECK_FALSE(r.find(4)->ok);
    REQUIRE(r.find(1) != nullptr);
    CHECK(r.find(1)->ok);
  }
  SUBCASE("unknown object") {
    SearchConfig cfg = config_3dof();
    cfg.object_ids = {42};
    try {
      estimate_poses(f, models(), cfg);
      FAIL("expected UnknownObjectId");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::UnknownObjectId);
    }
  }
}

TEST_CASE("6-DoF on a symmetric object") {
  const SceneFrame f = scene({1, 4}, 9);
  SearchConfig cfg;
  cfg.mode = SearchMode::SixDof;
  cfg.object_ids = {1};
  const SearchResult r = estimate_poses(f, models(), cfg);
  REQUIRE(r.objects.size() == 1);
  REQUIRE(r.objects[0].ok);
  CHECK(adds(f, r.objects[0]) < 0.02);
  // in-plane spin collapses for a symmetric model
  CHECK(r.objects[0].proposals_evaluated % size_t(cfg.proposals.viewpoints) == 0);
}

TEST_CASE("trace lines cover every proposal") {
  const SceneFrame f = scene({3}, 4);
  SearchConfig cfg = config_3dof();
  cfg.refine = false;
  std::ostringstream trace;
  const SearchResult r = estimate_poses(f, models(), cfg, &trace);
  const std::string s = trace.str();
  CHECK(size_t(std::count(s.begin(), s.end(), '\n')) == r.objects[0].proposals_evaluated);
}

TEST_CASE("result and config files") {
  const auto dir = std::filesystem::temp_directory_path() / "rvpose_search_files";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  SearchResult r;
  ObjectResult o;
  o.object_id = 3;
  o.ok = true;
  o.best = {3, RigidTransform::rot_z(0.7, Vec3(0.1, 0.2, 0.0))};
  o.cost = {4, 9};
  o.proposals_evaluated = 121;
  o.proposal_index = 17;
  r.objects.push_back(o);
  ObjectResult bad;
  bad.object_id = 5;
  bad.failure = "no valid depth";
  r.objects.push_back(bad);
  write_result_json(dir / "result.json", r);
  const SearchResult back = read_result_json(dir / "result.json");
  REQUIRE(back.objects.size() == 2);
  CHECK(back.objects[0].best.pose.matrix() == o.best.pose.matrix());
  CHECK(back.objects[0].cost == o.cost);
  CHECK(back.objects[0].proposals_evaluated == 121);
  CHECK_FALSE(back.objects[1].ok);
  CHECK(result_json(back) == result_json(r));

  std::ofstream(dir / "cfg.json") << R"({"mode": "6dof", "use_color": false, "stride": 1, "refine_stride": 2,
    "delta": 0.01, "viewpoints": 12, "workers": 2, "gicp": {"max_iterations": 5}})";
  const SearchConfig cfg = read_search_config(dir / "cfg.json");
  CHECK(cfg.mode == SearchMode::SixDof);
  CHECK_FALSE(cfg.use_color);
  CHECK(cfg.stride == 1);
  CHECK(cfg.cost.delta == 0.01);
  CHECK(cfg.proposals.viewpoints == 12);
  CHECK(cfg.workers == 2);
  CHECK(cfg.gicp.max_iterations == 5);

  std::ofstream(dir / "bad.json") << R"({"strid": 3})";
  try {
    read_search_config(dir / "bad.json");
    FAIL("expected InvalidConfig");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation") {
  SearchConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), Error);  // 3-DoF without a workspace
  cfg.workspace = Workspace{};
  CHECK_NOTHROW(cfg.validate());
  cfg.refine_stride = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
