#include "rvpose/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "rvpose/parallel.hpp"
#include "rvpose/raster.hpp"

namespace rvpose {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct ObjectPlan {
  int object_id = 0;
  PoseProposalSet proposals;  // world poses
  std::string failure;
};

std::vector<int> search_object_ids(const SceneFrame &frame, const SearchConfig &cfg) {
  std::vector<int> ids = cfg.object_ids;
  if (ids.empty())
    for (const auto &d : frame.detections) ids.push_back(d.object_id);
  return ids;
}

// Proposals in the world frame for one object.
PoseProposalSet make_proposals(const SceneFrame &frame, const ObjectModel &model, const SearchConfig &cfg,
                               double fixed_z) {
  const ProposalParams &pp = cfg.proposals;
  if (cfg.mode == SearchMode::ThreeDof)
    return grid_proposals_3dof(*cfg.workspace, pp.dt, pp.dyaw, fixed_z, model.object_id, model.rotationally_symmetric);

  const Detection *det = nullptr;
  for (const auto &d : frame.detections)
    if (d.object_id == model.object_id) det = &d;
  if (!det) throw Error(ErrorCode::NoValidDepth, "no detection for object " + std::to_string(model.object_id));
  const auto trans = translation_proposals(*det, frame.depth, frame.labels, frame.intrinsics, pp.z_step);
  const auto rots = rotation_proposals(pp.viewpoints, model.rotationally_symmetric ? 1 : pp.inplane);
  PoseProposalSet set = pose_proposals_6dof(rots, trans, model.object_id, model.bbox_center());
  for (auto &p : set.poses) p.pose = frame.intrinsics.camera_pose * p.pose;
  return set;
}

std::vector<Point> refine_source(const LabeledCloud &cloud, int refine_stride) {
  std::vector<Point> out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const PixelCoord &px = cloud.source_pixel[i];
    if (px.u % refine_stride == 0 && px.v % refine_stride == 0) out.push_back(cloud.points[i]);
  }
  return out;
}

nlohmann::ordered_json pose_json(const RigidTransform &t) { return t.to_matrix34(); }

}  // namespace

const char *to_string(SearchMode mode) { return mode == SearchMode::ThreeDof ? "3dof" : "6dof"; }

SearchMode parse_search_mode(const std::string &name) {
  if (name == "3dof") return SearchMode::ThreeDof;
  if (name == "6dof") return SearchMode::SixDof;
  throw Error(ErrorCode::InvalidConfig, "unknown search mode '" + name + "'");
}

void SearchConfig::validate() const {
  cost.validate();
  gicp.validate();
  if (stride < 1 || refine_stride < 1 || refine_stride % stride != 0)
    throw Error(ErrorCode::InvalidConfig, "refine_stride must be a positive multiple of stride");
  if (mode == SearchMode::ThreeDof && !workspace)
    throw Error(ErrorCode::InvalidConfig, "3-DoF search needs workspace bounds");
  if (!(proposals.dt > 0.0 && proposals.dyaw > 0.0 && proposals.z_step > 0.0))
    throw Error(ErrorCode::InvalidConfig, "proposal steps must be positive");
  if (proposals.viewpoints < 1 || proposals.inplane < 1)
    throw Error(ErrorCode::InvalidConfig, "viewpoint and in-plane counts must be >= 1");
  if (!(min_visible_fraction >= 0.0 && min_visible_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "min_visible_fraction must be in [0, 1]");
  if (!(crop_radius_factor > 0.0)) throw Error(ErrorCode::InvalidConfig, "crop_radius_factor must be positive");
  if (chunk_size < 1) throw Error(ErrorCode::InvalidConfig, "chunk_size must be >= 1");
}

bool SearchResult::any_failed() const {
  return std::any_of(objects.begin(), objects.end(), [](const ObjectResult &o) { return !o.ok; });
}

const ObjectResult *SearchResult::find(int object_id) const {
  for (const auto &o : objects)
    if (o.object_id == object_id) return &o;
  return nullptr;
}

size_t select_best(std::span<const CostBreakdown> costs) {
  if (costs.empty()) throw Error(ErrorCode::EmptyBatch, "no costs to select from");
  size_t best = 0;
  for (size_t i = 1; i < costs.size(); ++i)
    if (costs[i].total() < costs[best].total()) best = i;
  return best;
}

std::vector<ProposalTask> scene_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models,
                                          const SearchConfig &cfg) {
  cfg.validate();
  std::vector<ProposalTask> out;
  for (int id : search_object_ids(frame, cfg)) {
    const ObjectModel *m = find_model(models, id);
    if (!m) throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(id));
    for (const auto &p : make_proposals(frame, *m, cfg, cfg.table_z - m->mesh.min_z()).poses)
      out.push_back({id, p.pose});
  }
  return out;
}

BatchEvaluation evaluate_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models,
                                   const SearchConfig &cfg, std::span<const ProposalTask> tasks) {
  cfg.validate();
  frame.validate();
  const auto t_start = Clock::now();
  BatchEvaluation out;
  SearchStats &stats = out.stats;
  const CameraIntrinsics &k = frame.intrinsics;
  const RigidTransform &cam = k.camera_pose;
  const RigidTransform world_to_camera = cam.inverse();

  auto t0 = Clock::now();
  const ObservedScene observed = ObservedScene::from_frame(frame, cfg.stride);

  struct ObjectInfo {
    int object_id = 0;
    const ObjectModel *model = nullptr;
    double fixed_z = 0.0;
    size_t target = 0;
  };
  std::vector<ObjectInfo> objects;
  std::vector<size_t> task_object(tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    size_t o = 0;
    while (o < objects.size() && objects[o].object_id != tasks[i].object_id) ++o;
    if (o == objects.size()) {
      const ObjectModel *m = find_model(models, tasks[i].object_id);
      if (!m) throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(tasks[i].object_id));
      objects.push_back({m->object_id, m, cfg.table_z - m->mesh.min_z(), 0});
    }
    task_object[i] = o;
  }

  // GICP targets, sampled like the sources: above-table points shared by all
  // objects (3-DoF) or the label-masked points of each object (6-DoF).
  const ObservedScene coarse = ObservedScene::from_frame(frame, cfg.refine_stride);
  std::vector<std::vector<Point>> targets;
  std::vector<Vec3> shared_world;
  if (cfg.mode == SearchMode::ThreeDof) {
    std::vector<Point> above;
    for (const auto &p : coarse.cloud.points) {
      const Vec3 w = cam * p.cast<double>();
      if (w.z() > cfg.table_z + cfg.cost.delta) {
        above.push_back(p);
        shared_world.push_back(w);
      }
    }
    targets.push_back(std::move(above));
  } else {
    for (auto &obj : objects) {
      obj.target = targets.size();
      std::vector<Point> masked;
      for (size_t i = 0; i < coarse.cloud.size(); ++i)
        if (coarse.labels[i] == obj.object_id) masked.push_back(coarse.cloud.points[i]);
      targets.push_back(std::move(masked));
    }
  }
  TargetCache cache(std::move(targets), cfg.gicp.k_covariance, cfg.gicp.epsilon);
  stats.proposals = tasks.size();
  stats.proposal_ms = ms_since(t0);

  out.costs.resize(tasks.size());
  out.final_poses.resize(tasks.size());
  out.task_ms.resize(tasks.size());

  RenderBatchOptions ropt;
  ropt.stride = cfg.stride;
  ropt.occluder_marking = cfg.occluder_marking;
  ropt.delta_occ = cfg.cost.delta;
  ropt.min_visible_fraction = cfg.min_visible_fraction;
  ropt.workers = cfg.workers;
  // the crop follows the object anywhere inside the proposal's grid cell
  const double crop_margin = cfg.crop_covers_cell ? cfg.proposals.dt * std::sqrt(0.5) : 0.0;
  CostParams cparams = cfg.cost;
  cparams.use_color = cfg.use_color;

  for (size_t begin = 0; begin < tasks.size(); begin += cfg.chunk_size) {
    const auto t_chunk = Clock::now();
    const size_t end = std::min(tasks.size(), begin + cfg.chunk_size);
    const size_t n = end - begin;
    std::vector<RenderRequest> requests(n);
    for (size_t i = 0; i < n; ++i) {
      requests[i] = {tasks[begin + i].object_id, tasks[begin + i].pose};
      out.final_poses[begin + i] = requests[i].pose;
    }

    t0 = Clock::now();
    std::vector<LabeledCloud> rendered = render_batch(models, requests, frame, k, ropt);
    stats.render_ms += ms_since(t0);

    if (cfg.refine) {
      t0 = Clock::now();
      std::vector<std::vector<Point>> sources(n);
      std::vector<M2mTask> gicp_tasks(n);
      parallel_for(n, cfg.workers, [&](size_t i) {
        const ObjectInfo &obj = objects[task_object[begin + i]];
        sources[i] = refine_source(rendered[i], cfg.refine_stride);
        M2mTask &g = gicp_tasks[i];
        g.source = sources[i];
        g.target = obj.target;
        if (cfg.mode == SearchMode::ThreeDof) {
          // observed points near the proposal's axis, up to the object's top
          const Vec3 &c = requests[i].pose.translation();
          const double r = cfg.crop_radius_factor * obj.model->inscribed_cylinder.radius + crop_margin;
          const double top = obj.fixed_z + obj.model->mesh.max_z() + cfg.cost.delta;
          for (size_t j = 0; j < shared_world.size(); ++j) {
            const Vec3 &w = shared_world[j];
            if (std::hypot(w.x() - c.x(), w.y() - c.y()) <= r && w.z() <= top) g.target_subset.push_back(int32_t(j));
          }
          // an empty crop must not fall back to the whole target
          if (g.target_subset.empty()) g.source = {};
        }
      });
      const auto refined = m2m_gicp(cache, gicp_tasks, cfg.gicp, cfg.workers);
      for (size_t i = 0; i < n; ++i) {
        const ObjectInfo &obj = objects[task_object[begin + i]];
        RigidTransform world = (cam * refined[i].transform * world_to_camera * requests[i].pose).orthonormalized();
        if (cfg.mode == SearchMode::ThreeDof) world = lift_pose3dof(project_to_3dof(world, obj.fixed_z), obj.fixed_z);
        out.final_poses[begin + i] = world;
        requests[i].pose = world;
      }
      stats.refine_ms += ms_since(t0);

      t0 = Clock::now();
      rendered = render_batch(models, requests, frame, k, ropt);
      stats.rerender_ms += ms_since(t0);
    }

    t0 = Clock::now();
    std::vector<size_t> relation_bytes(n, 0);
    parallel_for(n, cfg.workers, [&](size_t i) {
      const ObjectInfo &obj = objects[task_object[begin + i]];
      ObservedAssociation assoc = LabelAssociation{obj.object_id};
      if (cfg.mode == SearchMode::ThreeDof)
        assoc = CylinderAssociation{world_to_camera * out.final_poses[begin + i], obj.model->inscribed_cylinder};
      const RenderedCost rc = rendered_cost(rendered[i], observed.cloud, cparams, cfg.knn);
      CostBreakdown &c = out.costs[begin + i];
      c.j_r = rc.j_r;
      c.j_o = observed_cost(observed.cloud, observed.labels, assoc, rc.explained);
      relation_bytes[i] = rc.relation_bytes;
    });
    stats.cost_ms += ms_since(t0);
    for (size_t b : relation_bytes) stats.peak_relation_bytes = std::max(stats.peak_relation_bytes, b);

    const double chunk_ms = ms_since(t_chunk);
    for (size_t i = 0; i < n; ++i) out.task_ms[begin + i] = chunk_ms / double(n);
  }
  stats.total_ms = ms_since(t_start);
  return out;
}

SearchResult estimate_poses(const SceneFrame &frame, const std::vector<ObjectModel> &models, const SearchConfig &cfg,
                            std::ostream *trace) {
  cfg.validate();
  frame.validate();
  const auto t_start = Clock::now();
  SearchResult result;

  auto t0 = Clock::now();
  std::vector<ObjectPlan> plans;
  std::vector<ProposalTask> tasks;
  for (int id : search_object_ids(frame, cfg)) {
    const ObjectModel *m = find_model(models, id);
    if (!m) throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(id));
    ObjectPlan plan;
    plan.object_id = id;
    try {
      plan.proposals = make_proposals(frame, *m, cfg, cfg.table_z - m->mesh.min_z());
      if (plan.proposals.poses.empty()) plan.failure = "empty proposal set";
    } catch (const Error &e) {
      plan.failure = e.what();
    }
    if (plan.failure.empty())
      for (const auto &p : plan.proposals.poses) tasks.push_back({id, p.pose});
    plans.push_back(std::move(plan));
  }
  const double proposal_ms = ms_since(t0);

  BatchEvaluation eval = evaluate_proposals(frame, models, cfg, tasks);
  result.stats = eval.stats;
  result.stats.proposal_ms += proposal_ms;

  size_t offset = 0;
  for (const ObjectPlan &plan : plans) {
    ObjectResult r;
    r.object_id = plan.object_id;
    if (!plan.failure.empty()) {
      r.failure = plan.failure;
      result.objects.push_back(std::move(r));
      continue;
    }
    const size_t count = plan.proposals.poses.size();
    const std::span<const CostBreakdown> mine(eval.costs.data() + offset, count);
    const size_t best = select_best(mine);
    const PoseProposal &prop = plan.proposals.poses[best];
    r.ok = true;
    r.best = {plan.object_id, eval.final_poses[offset + best]};
    r.cost = mine[best];
    r.proposal_index = best;
    r.rotation_index = prop.rotation_index;
    r.translation_index = prop.translation_index;
    r.refine_delta = (r.best.pose * prop.pose.inverse()).orthonormalized();
    r.proposals_evaluated = count;
    for (size_t i = 0; i < count; ++i) r.millis += eval.task_ms[offset + i];
    if (trace)
      for (size_t i = 0; i < count; ++i) write_cost_trace_line(*trace, plan.object_id, i, mine[i]);
    result.objects.push_back(std::move(r));
    offset += count;
  }
  result.stats.total_ms = ms_since(t_start);
  return result;
}

void write_result_json(std::ostream &out, const SearchResult &result) {
  nlohmann::ordered_json j;
  j["objects"] = nlohmann::ordered_json::array();
  for (const auto &o : result.objects) {
    nlohmann::ordered_json e;
    e["object_id"] = o.object_id;
    e["status"] = o.ok ? "ok" : "failed";
    if (!o.ok) {
      e["error"] = o.failure;
    } else {
      e["pose"] = pose_json(o.best.pose);
      e["j_o"] = o.cost.j_o;
      e["j_r"] = o.cost.j_r;
      e["total"] = o.cost.total();
      e["proposals_evaluated"] = o.proposals_evaluated;
      e["proposal_index"] = o.proposal_index;
      e["rotation_index"] = o.rotation_index;
      e["translation_index"] = o.translation_index;
      e["refine_delta"] = pose_json(o.refine_delta);
    }
    j["objects"].push_back(std::move(e));
  }
  out << j.dump(2) << '\n';
}

void write_result_json(const std::filesystem::path &path, const SearchResult &result) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_result_json(out, result);
}

SearchResult read_result_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingResult, "cannot read " + path.string());
  SearchResult result;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto &e : j.at("objects")) {
      ObjectResult o;
      o.object_id = e.at("object_id");
      o.ok = e.at("status") == "ok";
      if (!o.ok) {
        o.failure = e.value("error", std::string{});
      } else {
        o.best = {o.object_id, RigidTransform::from_matrix34(e.at("pose").get<std::array<double, 12>>())};
        o.cost.j_o = e.at("j_o");
        o.cost.j_r = e.at("j_r");
        o.proposals_evaluated = e.value("proposals_evaluated", size_t{0});
        o.proposal_index = e.value("proposal_index", size_t{0});
        o.rotation_index = e.value("rotation_index", 0);
        o.translation_index = e.value("translation_index", 0);
        if (e.contains("refine_delta"))
          o.refine_delta = RigidTransform::from_matrix34(e["refine_delta"].get<std::array<double, 12>>());
      }
      result.objects.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::Io, "malformed result file " + path.string() + ": " + e.what());
  }
  // timing sidecar is optional
  const auto timing = path.parent_path() / "timing.json";
  std::ifstream tin(timing);
  if (tin) {
    try {
      const auto t = nlohmann::json::parse(tin);
      result.stats.total_ms = t.value("total_ms", 0.0);
      for (const auto &e : t.value("objects", nlohmann::json::array())) {
        for (auto &o : result.objects)
          if (o.object_id == e.value("object_id", -1)) o.millis = e.value("millis", 0.0);
      }
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::Io, "malformed timing file " + timing.string() + ": " + e.what());
    }
  }
  return result;
}

void write_timing_json(const std::filesystem::path &path, const SearchResult &result) {
  const SearchStats &s = result.stats;
  nlohmann::ordered_json j;
  j["total_ms"] = s.total_ms;
  j["stages"] = {{"proposals", s.proposal_ms}, {"render", s.render_ms}, {"refine", s.refine_ms},
                 {"rerender", s.rerender_ms}, {"cost", s.cost_ms}};
  j["proposals"] = s.proposals;
  j["peak_relation_bytes"] = s.peak_relation_bytes;
  j["objects"] = nlohmann::ordered_json::array();
  for (const auto &o : result.objects) j["objects"].push_back({{"object_id", o.object_id}, {"millis", o.millis}});
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SearchConfig read_search_config(const std::filesystem::path &path, SearchConfig cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto &[key, v] : j.items()) {
      if (key == "mode") cfg.mode = parse_search_mode(v.get<std::string>());
      else if (key == "use_color") cfg.use_color = v;
      else if (key == "occluder_marking") cfg.occluder_marking = v;
      else if (key == "refine") cfg.refine = v;
      else if (key == "knn") cfg.knn = parse_knn_strategy(v.get<std::string>());
      else if (key == "stride") cfg.stride = v;
      else if (key == "refine_stride") cfg.refine_stride = v;
      else if (key == "delta") cfg.cost.delta = v;
      else if (key == "tau_c") cfg.cost.tau_c = v;
      else if (key == "dt") cfg.proposals.dt = v;
      else if (key == "dyaw_deg") cfg.proposals.dyaw = v.get<double>() * std::numbers::pi / 180.0;
      else if (key == "viewpoints") cfg.proposals.viewpoints = v;
      else if (key == "inplane") cfg.proposals.inplane = v;
      else if (key == "z_step") cfg.proposals.z_step = v;
      else if (key == "workspace") {
        const auto w = v.get<std::array<double, 4>>();
        cfg.workspace = Workspace{w[0], w[1], w[2], w[3]};
      } else if (key == "table_z") cfg.table_z = v;
      else if (key == "crop_radius_factor") cfg.crop_radius_factor = v;
      else if (key == "crop_covers_cell") cfg.crop_covers_cell = v;
      else if (key == "min_visible_fraction") cfg.min_visible_fraction = v;
      else if (key == "object_ids") cfg.object_ids = v.get<std::vector<int>>();
      else if (key == "workers") cfg.workers = v;
      else if (key == "chunk_size") cfg.chunk_size = v;
      else if (key == "gicp") {
        for (const auto &[gk, gv] : v.items()) {
          if (gk == "k_covariance") cfg.gicp.k_covariance = gv;
          else if (gk == "epsilon") cfg.gicp.epsilon = gv;
          else if (gk == "max_iterations") cfg.gicp.max_iterations = gv;
          else if (gk == "translation_tolerance") cfg.gicp.translation_tolerance = gv;
          else if (gk == "rotation_tolerance") cfg.gicp.rotation_tolerance = gv;
          else if (gk == "max_correspondence_distance") cfg.gicp.max_correspondence_distance = gv;
          else throw Error(ErrorCode::InvalidConfig, "unknown gicp key '" + gk + "'");
        }
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidConfig, "malformed config " + path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace rvpose
