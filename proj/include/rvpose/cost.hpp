#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "rvpose/core.hpp"
#include "rvpose/neighbors.hpp"

namespace rvpose {

struct CostParams {
  double delta = 0.0075;  // sensor noise resolution, meters
  double tau_c = 12.5;    // CIEDE2000 threshold
  bool use_color = true;

  void validate() const;
};

struct CostBreakdown {
  int64_t j_o = 0;
  int64_t j_r = 0;
  int64_t total() const { return j_o + j_r; }
  bool operator==(const CostBreakdown &) const = default;
};

/// Observed points inside the proposal's inscribed cylinder (3-DoF search).
struct CylinderAssociation {
  RigidTransform object_to_camera;
  InscribedCylinder cylinder;
};

/// Observed points whose pixel label equals the object id (6-DoF search).
struct LabelAssociation {
  int object_id = 0;
};

using ObservedAssociation = std::variant<CylinderAssociation, LabelAssociation>;

/// The observed input cloud with the pixel label of every point.
struct ObservedScene {
  LabeledCloud cloud;
  std::vector<int32_t> labels;

  static ObservedScene from_frame(const SceneFrame &frame, int stride);
  /// Indices of points carrying `object_id`, ascending.
  std::vector<int32_t> indices_with_label(int object_id) const;
};

/// Outlier test for query slot `query` given its nearest neighbor in the
/// target cloud: beyond delta, or (with color) within delta but further than
/// tau_c in CIEDE2000 from that neighbor. No neighbor counts as an outlier.
int outlier(size_t query, const NeighborResult &nn, const Eigen::Vector3f &query_lab,
            std::span<const Eigen::Vector3f> target_labs, const CostParams &params);

struct RenderedCost {
  int64_t j_r = 0;
  /// Observed indices that served as an inlier nearest neighbor, ascending.
  std::vector<int32_t> explained;
  size_t relation_bytes = 0;
};

/// J_r of a rendered cloud against the observed cloud. Only observed points
/// inside the rendered bounding box grown by delta are searched; any neighbor
/// within delta lies there, so the outcome equals an unrestricted search.
RenderedCost rendered_cost(const LabeledCloud &rendered, const LabeledCloud &observed, const CostParams &params,
                           KnnStrategy strategy);

/// J_o: selected observed points not marked explained by rendered_cost.
int64_t observed_cost(const LabeledCloud &observed, std::span<const int32_t> observed_labels,
                      const ObservedAssociation &assoc, std::span<const int32_t> explained);

CostBreakdown proposal_cost(const LabeledCloud &rendered, const ObservedScene &observed,
                            const ObservedAssociation &assoc, const CostParams &params, KnnStrategy strategy);

/// One JSON object per line: {object_id, proposal_index, j_o, j_r, total}.
void write_cost_trace_line(std::ostream &out, int object_id, size_t proposal_index, const CostBreakdown &cost);

}  // namespace rvpose
