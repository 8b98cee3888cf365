#include "rvpose/cost.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "rvpose/colorspace.hpp"

namespace rvpose {

void CostParams::validate() const {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidConfig, "delta must be positive");
  if (!(tau_c > 0.0)) throw Error(ErrorCode::InvalidConfig, "tau_c must be positive");
}

ObservedScene ObservedScene::from_frame(const SceneFrame &frame, int stride) {
  if (stride < 1) throw Error(ErrorCode::InvalidConfig, "stride must be >= 1");
  ObservedScene s;
  const auto &k = frame.intrinsics;
  for (int v = 0; v < frame.depth.height; v += stride) {
    for (int u = 0; u < frame.depth.width; u += stride) {
      if (!frame.depth.valid(u, v)) continue;
      s.cloud.points.push_back(unproject_pixel(k, u, v, frame.depth.at(u, v)).cast<float>());
      s.cloud.lab_colors.push_back(srgb_to_lab_unchecked(frame.color.at(u, v)));
      s.cloud.source_pixel.push_back({u, v});
      s.labels.push_back(frame.labels.at(u, v));
    }
  }
  return s;
}

std::vector<int32_t> ObservedScene::indices_with_label(int object_id) const {
  std::vector<int32_t> out;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == object_id) out.push_back(int32_t(i));
  return out;
}

int outlier(size_t query, const NeighborResult &nn, const Eigen::Vector3f &query_lab,
            std::span<const Eigen::Vector3f> target_labs, const CostParams &params) {
  if (!nn.has(query)) return 1;
  if (std::sqrt(double(nn.sq_dist(query))) > params.delta) return 1;
  if (params.use_color &&
      ciede2000(to_lab(query_lab), to_lab(target_labs[size_t(nn.index(query))])) > params.tau_c)
    return 1;
  return 0;
}

RenderedCost rendered_cost(const LabeledCloud &rendered, const LabeledCloud &observed, const CostParams &params,
                           KnnStrategy strategy) {
  RenderedCost out;
  if (rendered.empty()) return out;

  Point lo = rendered.points.front();
  Point hi = lo;
  for (const auto &p : rendered.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // grown slightly past delta so float rounding can never drop a neighbor
  const float grow = float(params.delta * 1.001 + 1e-6);
  lo.array() -= grow;
  hi.array() += grow;

  std::vector<int32_t> kept;
  std::vector<Point> target;
  std::vector<Eigen::Vector3f> target_labs;
  for (size_t i = 0; i < observed.size(); ++i) {
    const Point &p = observed.points[i];
    if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()) {
      kept.push_back(int32_t(i));
      target.push_back(p);
      target_labs.push_back(observed.lab_colors[i]);
    }
  }

  const NeighborResult nn = knn(strategy, rendered.points, target, 1);
  out.relation_bytes = nn.relation_bytes;
  for (size_t q = 0; q < rendered.size(); ++q) {
    if (outlier(q, nn, rendered.lab_colors[q], target_labs, params)) {
      ++out.j_r;
    } else {
      out.explained.push_back(kept[size_t(nn.index(q))]);
    }
  }
  std::sort(out.explained.begin(), out.explained.end());
  out.explained.erase(std::unique(out.explained.begin(), out.explained.end()), out.explained.end());
  return out;
}

int64_t observed_cost(const LabeledCloud &observed, std::span<const int32_t> observed_labels,
                      const ObservedAssociation &assoc, std::span<const int32_t> explained) {
  auto is_explained = [&](int32_t i) { return std::binary_search(explained.begin(), explained.end(), i); };
  int64_t j_o = 0;
  if (const auto *cyl = std::get_if<CylinderAssociation>(&assoc)) {
    const RigidTransform camera_to_object = cyl->object_to_camera.inverse();
    for (size_t i = 0; i < observed.size(); ++i) {
      const Vec3 p = camera_to_object * observed.points[i].cast<double>();
      if (cyl->cylinder.contains(p) && !is_explained(int32_t(i))) ++j_o;
    }
  } else {
    const int id = std::get<LabelAssociation>(assoc).object_id;
    if (observed_labels.size() != observed.size())
      throw Error(ErrorCode::DimensionMismatch, "observed labels do not match the observed cloud");
    for (size_t i = 0; i < observed.size(); ++i)
      if (observed_labels[i] == id && !is_explained(int32_t(i))) ++j_o;
  }
  return j_o;
}

CostBreakdown proposal_cost(const LabeledCloud &rendered, const ObservedScene &observed,
                            const ObservedAssociation &assoc, const CostParams &params, KnnStrategy strategy) {
  const RenderedCost r = rendered_cost(rendered, observed.cloud, params, strategy);
  CostBreakdown c;
  c.j_r = r.j_r;
  c.j_o = observed_cost(observed.cloud, observed.labels, assoc, r.explained);
  return c;
}

void write_cost_trace_line(std::ostream &out, int object_id, size_t proposal_index, const CostBreakdown &cost) {
  nlohmann::ordered_json j;
  j["object_id"] = object_id;
  j["proposal_index"] = proposal_index;
  j["j_o"] = cost.j_o;
  j["j_r"] = cost.j_r;
  j["total"] = cost.total();
  out << j.dump() << '\n';
}

}  // namespace rvpose
