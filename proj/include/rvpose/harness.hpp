#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvpose/core.hpp"
#include "rvpose/search.hpp"

namespace rvpose {

/// Mesh vertices, or `cap` of them by seeded stratified subsampling: one
/// uniform pick inside each of `cap` equal index strata.
std::vector<Vec3> adds_model_points(const ObjectModel &model, size_t cap = 3000, uint64_t seed = 0);

/// Mean over gt-posed points of the distance to the nearest est-posed point.
/// Throws EmptyModel.
double adds_error(std::span<const Vec3> model_points, const RigidTransform &gt, const RigidTransform &est);

struct AddSCurve {
  std::vector<double> errors;  // meters
  double max_threshold = 0.1;
  double auc = 0.0;            // percent
  double pct_below_1cm = 0.0;  // strict <
  double pct_below_2cm = 0.0;

  /// Fraction of errors <= t.
  double accuracy(double t) const;
};

/// Exact integral of the accuracy step function over [0, max_threshold].
/// Throws EmptyInput.
AddSCurve adds_auc(std::span<const double> errors, double max_threshold = 0.1);

struct EvalRow {
  std::string name;   // model name, or "all"
  int object_id = 0;  // -1 for the pooled row
  size_t instances = 0;
  double auc = 0.0;
  double pct_below_1cm = 0.0;
  double pct_below_2cm = 0.0;
  std::optional<double> mean_runtime_s;  // absent without timing sidecars

  bool operator==(const EvalRow &) const = default;
};

struct MissingEntry {
  std::string scene;
  int object_id = 0;  // -1: whole result file missing

  bool operator==(const MissingEntry &) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // per object by id, then the pooled row
  std::vector<MissingEntry> missing;
  size_t scenes = 0;
  std::string aggregation = "instance-pooled";

  size_t warning_count() const { return missing.size(); }
  const EvalRow *find(int object_id) const;
  bool operator==(const EvalReport &) const = default;
};

struct EvalOptions {
  size_t model_point_cap = 3000;
  uint64_t sampling_seed = 0;
  double max_threshold = 0.1;
};

/// Dataset layout: DIR/models/ plus one scene directory per scene. Results:
/// RESULTS/<scene>/result.json with an optional timing.json beside it.
/// Missing results are listed and excluded; failed estimates count as
/// infinite error.
EvalReport run_eval(const std::filesystem::path &dataset_dir, const std::filesystem::path &results_dir,
                    const EvalOptions &options = {});

/// Scene directories of a dataset, sorted by name.
std::vector<std::filesystem::path> list_scenes(const std::filesystem::path &dataset_dir);

void write_report_json(const std::filesystem::path &path, const EvalReport &report);
EvalReport read_report_json(const std::filesystem::path &path);
void write_report_csv(std::ostream &out, const EvalReport &report);
std::string format_report(const EvalReport &report);

struct BenchStage {
  size_t proposals = 0;
  int workers = 1;
  double total_ms = 0.0;  // best of the repeats
  double render_ms = 0.0;
  double refine_ms = 0.0;
  double rerender_ms = 0.0;
  double cost_ms = 0.0;
  size_t peak_relation_bytes = 0;

  double proposals_per_second() const { return total_ms > 0.0 ? 1000.0 * double(proposals) / total_ms : 0.0; }
};

/// Scores the scene's first `proposals` proposals (cycled if the scene has
/// fewer) `repeat` times and keeps the fastest run.
BenchStage bench_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models, const SearchConfig &cfg,
                           size_t proposals, int repeat);

}  // namespace rvpose
