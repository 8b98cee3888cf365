#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvpose/core.hpp"
#include "rvpose/cost.hpp"
#include "rvpose/proposals.hpp"
#include "rvpose/registration.hpp"

namespace rvpose {

enum class SearchMode { ThreeDof, SixDof };

const char *to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string &name);

struct ProposalParams {
  double dt = 0.08;                             // meters
  double dyaw = 22.5 * std::numbers::pi / 180.0;  // radians
  int viewpoints = 42;
  int inplane = 16;
  double z_step = 0.02;  // meters
};

struct SearchConfig {
  SearchMode mode = SearchMode::ThreeDof;
  bool use_color = true;
  bool occluder_marking = true;
  bool refine = true;
  KnnStrategy knn = KnnStrategy::Streamed;
  int stride = 2;         // image-space sampling of renders and the observation
  int refine_stride = 4;  // sampling of GICP sources; a multiple of stride
  CostParams cost;
  GicpConfig gicp;
  ProposalParams proposals;
  std::optional<Workspace> workspace;  // required in ThreeDof
  double table_z = 0.0;
  double crop_radius_factor = 1.5;  // ThreeDof GICP target crop, in inscribed radii
  bool crop_covers_cell = true;     // widen the crop by half the grid cell diagonal
  double min_visible_fraction = 0.2;  // see RenderBatchOptions
  std::vector<int> object_ids;      // empty: every detection in the frame
  int workers = 1;
  size_t chunk_size = 256;  // tasks per render/refine/cost round

  void validate() const;
};

struct ObjectResult {
  int object_id = 0;
  bool ok = false;
  std::string failure;
  ObjectState best;
  CostBreakdown cost;
  size_t proposal_index = 0;
  int rotation_index = 0;
  int translation_index = 0;
  RigidTransform refine_delta;  // world-frame correction applied by GICP
  size_t proposals_evaluated = 0;
  double millis = 0.0;
};

struct SearchStats {
  double proposal_ms = 0.0;
  double render_ms = 0.0;
  double refine_ms = 0.0;
  double rerender_ms = 0.0;
  double cost_ms = 0.0;
  double total_ms = 0.0;
  size_t proposals = 0;
  size_t peak_relation_bytes = 0;
};

struct SearchResult {
  std::vector<ObjectResult> objects;
  SearchStats stats;

  bool any_failed() const;
  const ObjectResult *find(int object_id) const;
};

/// Lowest total, ties to the lowest index. Throws EmptyBatch.
size_t select_best(std::span<const CostBreakdown> costs);

struct ProposalTask {
  int object_id = 0;
  RigidTransform pose;  // object-to-world
};

struct BatchEvaluation {
  std::vector<CostBreakdown> costs;
  std::vector<RigidTransform> final_poses;  // after refinement
  std::vector<double> task_ms;              // chunk wall time split evenly
  SearchStats stats;
};

/// Every proposal estimate_poses would score, in its order.
std::vector<ProposalTask> scene_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models,
                                          const SearchConfig &cfg);

/// Render -> GICP -> re-render -> cost over an arbitrary flat batch.
BatchEvaluation evaluate_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models,
                                   const SearchConfig &cfg, std::span<const ProposalTask> tasks);

/// Flat search: proposals -> render -> GICP -> re-render -> cost -> argmin,
/// per object. Per-object failures are recorded, not thrown. With `trace`,
/// every scored proposal is written as one JSON line.
SearchResult estimate_poses(const SceneFrame &frame, const std::vector<ObjectModel> &models, const SearchConfig &cfg,
                            std::ostream *trace = nullptr);

// result.json holds only deterministic fields; wall times go to timing.json.
void write_result_json(std::ostream &out, const SearchResult &result);
void write_result_json(const std::filesystem::path &path, const SearchResult &result);
SearchResult read_result_json(const std::filesystem::path &path);
void write_timing_json(const std::filesystem::path &path, const SearchResult &result);

/// Reads a JSON config with any subset of the SearchConfig fields.
SearchConfig read_search_config(const std::filesystem::path &path, SearchConfig base = {});

}  // namespace rvpose
