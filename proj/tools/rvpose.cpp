#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ciede2000_vectors.hpp"
#include "reference.hpp"
#include "rvpose/colorspace.hpp"
#include "rvpose/cost.hpp"
#include "rvpose/harness.hpp"
#include "rvpose/neighbors.hpp"
#include "rvpose/scenegen.hpp"
#include "rvpose/search.hpp"

namespace fs = std::filesystem;
using namespace rvpose;

namespace {

enum Exit { kOk = 0, kFailed = 1, kInvalidConfig = 2, kDatasetError = 3, kEstimationFailures = 4 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSpec:
      return kInvalidConfig;
    default:
      return kDatasetError;
  }
}

NoiseModel parse_noise(const std::string &text) {
  NoiseModel n;
  if (text.empty()) return n;
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception &) {
      throw Error(ErrorCode::InvalidConfig, "bad --noise value '" + item + "'");
    }
  }
  if (v.size() != 3) throw Error(ErrorCode::InvalidConfig, "--noise takes sigma,dropout,jitter");
  n.depth_sigma = v[0];
  n.dropout_prob = v[1];
  n.color_jitter_sigma = v[2];
  n.validate();
  return n;
}

struct GenArgs {
  fs::path out;
  int scenes = 1;
  uint64_t seed = 0;
  fs::path objects;
  std::string noise;
};

int run_gen(const GenArgs &a) {
  ObjectSet set;
  if (a.objects.empty()) {
    set.models = standard_models();
    set.placement.object_ids = {1, 2, 3, 4, 5, 6};
  } else {
    set = read_object_set(a.objects);
  }
  const NoiseModel noise = parse_noise(a.noise);
  write_models(a.out / "models", set.models);
  for (int i = 0; i < a.scenes; ++i) {
    const uint64_t seed = a.seed + uint64_t(i);
    SceneSpec spec = random_scene(set.models, set.placement, seed);
    spec.table_half_extent = set.table_half_extent;
    spec.noise = noise;
    SceneRecord rec;
    rec.frame = generate_scene(spec, set.models);
    rec.table_z = spec.table_z;
    rec.table_half_extent = spec.table_half_extent;
    rec.rng_seed = seed;
    rec.noise = noise;
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", i);
    write_scene(a.out / name, rec);
  }
  std::cout << "wrote " << a.scenes << " scenes to " << a.out.string() << '\n';
  return kOk;
}

struct EstimateArgs {
  fs::path scene;
  fs::path models;
  std::string mode;
  fs::path config;
  fs::path out;
  bool no_color = false;
  bool no_occluder_marking = false;
  bool no_refine = false;
  std::string knn;
  int workers = 0;
  bool trace = false;
};

SearchConfig build_config(const EstimateArgs &a, double table_z) {
  SearchConfig cfg;
  if (!a.config.empty()) cfg = read_search_config(a.config, cfg);
  if (!a.mode.empty()) cfg.mode = parse_search_mode(a.mode);
  if (a.no_color) cfg.use_color = false;
  if (a.no_occluder_marking) cfg.occluder_marking = false;
  if (a.no_refine) cfg.refine = false;
  if (!a.knn.empty()) cfg.knn = parse_knn_strategy(a.knn);
  if (a.workers > 0) cfg.workers = a.workers;
  if (cfg.mode == SearchMode::ThreeDof && !cfg.workspace) cfg.workspace = Workspace{};
  cfg.table_z = table_z;
  cfg.validate();
  return cfg;
}

// Returns true when every object was estimated.
bool estimate_one(const fs::path &scene_dir, const std::vector<ObjectModel> &models, const EstimateArgs &a,
                  const fs::path &out_dir) {
  const SceneRecord rec = read_scene(scene_dir);
  const SearchConfig cfg = build_config(a, rec.table_z);
  fs::create_directories(out_dir);
  std::ofstream trace_file;
  if (a.trace) {
    trace_file.open(out_dir / "trace.jsonl");
    if (!trace_file) throw Error(ErrorCode::Io, "cannot write " + (out_dir / "trace.jsonl").string());
  }
  const SearchResult result = estimate_poses(rec.frame, models, cfg, a.trace ? &trace_file : nullptr);
  write_result_json(out_dir / "result.json", result);
  write_timing_json(out_dir / "timing.json", result);
  for (const auto &o : result.objects) {
    if (o.ok)
      std::printf("%s object %d cost %lld (j_o %lld, j_r %lld)\n", scene_dir.filename().c_str(), o.object_id,
                  (long long)o.cost.total(), (long long)o.cost.j_o, (long long)o.cost.j_r);
    else
      std::printf("%s object %d failed: %s\n", scene_dir.filename().c_str(), o.object_id, o.failure.c_str());
  }
  std::printf("%s: %zu proposals in %.2f s\n", scene_dir.filename().c_str(), result.stats.proposals,
              result.stats.total_ms / 1000.0);
  return !result.any_failed();
}

int run_estimate(const EstimateArgs &a) {
  const bool single = fs::exists(a.scene / "scene.json");
  const fs::path models_dir = !a.models.empty() ? a.models : single ? a.scene.parent_path() / "models" : a.scene / "models";
  const auto models = read_models(models_dir);
  // validate flags before touching any scene
  build_config(a, 0.0);
  bool all_ok = true;
  if (single) {
    all_ok = estimate_one(a.scene, models, a, a.out);
  } else {
    const auto scenes = list_scenes(a.scene);
    if (scenes.empty()) throw Error(ErrorCode::Io, "no scenes under " + a.scene.string());
    for (const auto &s : scenes) all_ok = estimate_one(s, models, a, a.out / s.filename()) && all_ok;
  }
  return all_ok ? kOk : kEstimationFailures;
}

int run_eval_cmd(const fs::path &dataset, const fs::path &results, const fs::path &out) {
  const EvalReport report = run_eval(dataset, results);
  std::cout << format_report(report);
  for (const auto &m : report.missing) {
    if (m.object_id < 0) std::cerr << "warning: no result for scene " << m.scene << '\n';
    else std::cerr << "warning: no result for object " << m.object_id << " in " << m.scene << '\n';
  }
  if (!out.empty()) {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_report_json(out, report);
    fs::path csv = out;
    csv.replace_extension(".csv");
    std::ofstream c(csv);
    if (!c) throw Error(ErrorCode::Io, "cannot write " + csv.string());
    write_report_csv(c, report);
  }
  return kOk;
}

struct BenchArgs {
  fs::path scene;
  fs::path models;
  int repeat = 3;
  size_t proposals = 2000;
  int workers = 8;
  fs::path config;
  std::string mode;
};

void print_stage(const BenchStage &s) {
  std::printf("workers %d: %zu proposals in %.1f ms, %.1f proposals/s\n", s.workers, s.proposals, s.total_ms,
              s.proposals_per_second());
  std::printf("  render %.1f ms, refine %.1f ms, re-render %.1f ms, cost %.1f ms (%.4f ms/proposal)\n", s.render_ms,
              s.refine_ms, s.rerender_ms, s.cost_ms, s.cost_ms / double(s.proposals));
  std::printf("  peak neighbor relation %zu bytes\n", s.peak_relation_bytes);
}

int run_bench(const BenchArgs &a) {
  const SceneRecord rec = read_scene(a.scene);
  const auto models = read_models(!a.models.empty() ? a.models : a.scene.parent_path() / "models");
  EstimateArgs ea;
  ea.config = a.config;
  ea.mode = a.mode;
  SearchConfig cfg = build_config(ea, rec.table_z);
  cfg.workers = 1;
  const BenchStage one = bench_proposals(rec.frame, models, cfg, a.proposals, a.repeat);
  print_stage(one);
  if (a.workers > 1) {
    cfg.workers = a.workers;
    const BenchStage many = bench_proposals(rec.frame, models, cfg, a.proposals, a.repeat);
    print_stage(many);
    std::printf("speedup %.2fx at %d workers (%u hardware threads)\n", one.total_ms / many.total_ms, a.workers,
                std::thread::hardware_concurrency());
  }
  // memory of the two neighbor strategies on one representative batch
  cfg.workers = 1;
  cfg.knn = KnnStrategy::Full;
  const BenchStage full = bench_proposals(rec.frame, models, cfg, std::min<size_t>(a.proposals, 64), 1);
  cfg.knn = KnnStrategy::Streamed;
  const BenchStage streamed = bench_proposals(rec.frame, models, cfg, std::min<size_t>(a.proposals, 64), 1);
  std::printf("neighbor memory: full %zu bytes, streamed %zu bytes\n", full.peak_relation_bytes,
              streamed.peak_relation_bytes);
  return kOk;
}

int run_selftest() {
  int failures = 0;
  auto report = [&](bool ok, const std::string &what) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", what.c_str());
    if (!ok) ++failures;
  };

  double worst = 0.0;
  for (const auto &v : reference::kCiede2000Vectors)
    worst = std::max(worst, std::abs(ciede2000({v[0], v[1], v[2]}, {v[3], v[4], v[5]}) - v[6]));
  char buf[128];
  std::snprintf(buf, sizeof buf, "CIEDE2000 published vectors (worst error %.2e)", worst);
  report(worst <= 1e-4, buf);

  std::mt19937_64 rng(12345);
  bool knn_ok = true;
  for (int t = 0; t < 200 && knn_ok; ++t) {
    std::uniform_int_distribution<size_t> n(1, 300);
    std::uniform_int_distribution<int> kk(1, 8);
    const auto q = reference::random_cloud(n(rng), 0.05, rng);
    const auto tg = reference::random_cloud(n(rng), 0.05, rng);
    const int k = kk(rng);
    const auto a = knn_full(q, tg, k);
    const auto b = knn_streamed(q, tg, k);
    const auto r = reference::knn(q, tg, k);
    knn_ok = a.indices == b.indices && a.sq_dists == b.sq_dists && a.indices == r.indices && a.sq_dists == r.sq_dists;
  }
  report(knn_ok, "kNN full, streamed and exhaustive reference agree on 200 instances");

  bool cost_ok = true;
  for (int t = 0; t < 200 && cost_ok; ++t) {
    const auto inst = reference::random_cost_instance(rng, 300);
    ObservedScene obs{inst.observed, inst.observed_labels};
    const auto ref = reference::proposal_cost(inst.rendered, inst.observed, inst.observed_labels, inst.assoc, inst.params);
    for (auto s : {KnnStrategy::Full, KnnStrategy::Streamed})
      cost_ok = cost_ok && proposal_cost(inst.rendered, obs, inst.assoc, inst.params, s) == ref;
  }
  report(cost_ok, "proposal costs match the double-loop reference on 200 instances");
  return failures == 0 ? kOk : kFailed;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Render-and-verify object pose estimation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto *g = app.add_subcommand("gen", "Generate synthetic tabletop scenes");
  g->add_option("--out", gen.out, "Output dataset directory")->required();
  g->add_option("--scenes", gen.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Seed of the first scene; scene i uses seed + i");
  g->add_option("--objects", gen.objects, "Object set JSON (default: three cans, three bottles)");
  g->add_option("--noise", gen.noise, "sigma,dropout,jitter: depth sigma in m, dropout probability, color jitter sigma on the [0,1] sRGB scale");

  EstimateArgs est;
  auto *e = app.add_subcommand("estimate", "Estimate object poses for a scene or every scene of a dataset");
  e->add_option("--scene", est.scene, "Scene or dataset directory")->required();
  e->add_option("--models", est.models, "Model directory (default: models beside the scenes)");
  e->add_option("--mode", est.mode, "3dof or 6dof");
  e->add_option("--config", est.config, "Search config JSON");
  e->add_option("--out", est.out, "Result directory")->required();
  e->add_flag("--no-color", est.no_color, "Depth-only cost");
  e->add_flag("--no-occluder-marking", est.no_occluder_marking, "Keep occluded render pixels");
  e->add_flag("--no-refine", est.no_refine, "Skip GICP refinement");
  e->add_option("--knn", est.knn, "full or streamed");
  e->add_option("--workers", est.workers, "Worker threads")->check(CLI::PositiveNumber);
  e->add_flag("--trace", est.trace, "Write every scored proposal to trace.jsonl");

  fs::path dataset, results, report_out;
  auto *ev = app.add_subcommand("eval", "ADD-S evaluation of results against ground truth");
  ev->add_option("--dataset", dataset, "Dataset directory")->required();
  ev->add_option("--results", results, "Result directory")->required();
  ev->add_option("--out", report_out, "Report JSON (a CSV is written beside it)");

  BenchArgs bench;
  auto *b = app.add_subcommand("bench", "Time batched proposal evaluation");
  b->add_option("--scene", bench.scene, "Scene directory")->required();
  b->add_option("--models", bench.models, "Model directory");
  b->add_option("--repeat", bench.repeat, "Repeats per measurement; the fastest is kept")->check(CLI::PositiveNumber);
  b->add_option("--proposals", bench.proposals, "Batch size")->check(CLI::PositiveNumber);
  b->add_option("--workers", bench.workers, "Workers compared against one")->check(CLI::PositiveNumber);
  b->add_option("--config", bench.config, "Search config JSON");
  b->add_option("--mode", bench.mode, "3dof or 6dof");

  auto *st = app.add_subcommand("selftest", "CIEDE2000 vectors, kNN equivalence and oracle cost checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (e->parsed()) return run_estimate(est);
    if (ev->parsed()) return run_eval_cmd(dataset, results, report_out);
    if (b->parsed()) return run_bench(bench);
    if (st->parsed()) return run_selftest();
  } catch (const Error &err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDatasetError;
  }
  return kOk;
}
