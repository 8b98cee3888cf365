#include "rvpose/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rvpose/scenegen.hpp"

namespace rvpose {

std::vector<Vec3> adds_model_points(const ObjectModel &model, size_t cap, uint64_t seed) {
  const auto &v = model.mesh.vertices;
  if (v.empty()) throw Error(ErrorCode::EmptyModel, "model " + std::to_string(model.object_id) + " has no vertices");
  if (cap == 0 || v.size() <= cap) return v;
  std::mt19937_64 rng(seed ^ (uint64_t(model.object_id) * 0x9e3779b97f4a7c15ULL));
  std::vector<Vec3> out;
  out.reserve(cap);
  for (size_t s = 0; s < cap; ++s) {
    const size_t lo = s * v.size() / cap;
    const size_t hi = (s + 1) * v.size() / cap;
    std::uniform_int_distribution<size_t> pick(lo, hi - 1);
    out.push_back(v[pick(rng)]);
  }
  return out;
}

double adds_error(std::span<const Vec3> model_points, const RigidTransform &gt, const RigidTransform &est) {
  if (model_points.empty()) throw Error(ErrorCode::EmptyModel, "no model points");
  std::vector<Vec3> e(model_points.size());
  for (size_t i = 0; i < e.size(); ++i) e[i] = est * model_points[i];
  double sum = 0.0;
  for (const Vec3 &p : model_points) {
    const Vec3 g = gt * p;
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3 &q : e) best = std::min(best, (g - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / double(model_points.size());
}

double AddSCurve::accuracy(double t) const {
  if (errors.empty()) return 0.0;
  const auto n = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
  return double(n) / double(errors.size());
}

AddSCurve adds_auc(std::span<const double> errors, double max_threshold) {
  if (errors.empty()) throw Error(ErrorCode::EmptyInput, "no errors");
  if (!(max_threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "max_threshold must be positive");
  AddSCurve c;
  c.errors.assign(errors.begin(), errors.end());
  c.max_threshold = max_threshold;
  // each error contributes accuracy 1/n on [e, max]; summing the area it
  // misses keeps all-zero and all-beyond inputs exact
  double missed = 0.0;
  size_t beyond = 0, below1 = 0, below2 = 0;
  for (double e : errors) {
    if (e <= max_threshold)
      missed += std::max(e, 0.0);
    else
      ++beyond;
    if (e < 0.01) ++below1;
    if (e < 0.02) ++below2;
  }
  const double n = double(errors.size());
  c.auc = 100.0 * (1.0 - double(beyond) / n - missed / (max_threshold * n));
  c.pct_below_1cm = 100.0 * double(below1) / n;
  c.pct_below_2cm = 100.0 * double(below2) / n;
  return c;
}

const EvalRow *EvalReport::find(int object_id) const {
  for (const auto &r : rows)
    if (r.object_id == object_id) return &r;
  return nullptr;
}

std::vector<std::filesystem::path> list_scenes(const std::filesystem::path &dataset_dir) {
  if (!std::filesystem::is_directory(dataset_dir))
    throw Error(ErrorCode::Io, "dataset directory " + dataset_dir.string() + " does not exist");
  std::vector<std::filesystem::path> out;
  for (const auto &e : std::filesystem::directory_iterator(dataset_dir))
    if (e.is_directory() && std::filesystem::exists(e.path() / "scene.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Instance {
  double error = 0.0;
  std::optional<double> runtime_s;
};

EvalRow make_row(const std::string &name, int object_id, const std::vector<Instance> &inst, double max_threshold,
                 std::optional<double> runtime_s) {
  EvalRow row;
  row.name = name;
  row.object_id = object_id;
  row.instances = inst.size();
  row.mean_runtime_s = runtime_s;
  if (inst.empty()) return row;
  std::vector<double> errors;
  for (const auto &i : inst) errors.push_back(i.error);
  const AddSCurve c = adds_auc(errors, max_threshold);
  row.auc = c.auc;
  row.pct_below_1cm = c.pct_below_1cm;
  row.pct_below_2cm = c.pct_below_2cm;
  return row;
}

std::optional<double> mean_of(const std::vector<std::optional<double>> &v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto &x : v) {
    if (!x) return std::nullopt;
    s += *x;
  }
  return s / double(v.size());
}

}  // namespace

EvalReport run_eval(const std::filesystem::path &dataset_dir, const std::filesystem::path &results_dir,
                    const EvalOptions &options) {
  const auto models = read_models(dataset_dir / "models");
  std::map<int, std::vector<Vec3>> points;
  for (const auto &m : models) points[m.object_id] = adds_model_points(m, options.model_point_cap, options.sampling_seed);

  EvalReport report;
  std::map<int, std::vector<Instance>> per_object;
  std::vector<std::optional<double>> scene_runtime;
  for (const auto &scene_dir : list_scenes(dataset_dir)) {
    const std::string name = scene_dir.filename().string();
    const SceneRecord rec = read_scene(scene_dir);
    if (!rec.frame.ground_truth) throw Error(ErrorCode::Io, "scene " + name + " has no ground truth");
    ++report.scenes;
    const auto result_path = results_dir / name / "result.json";
    if (!std::filesystem::exists(result_path)) {
      report.missing.push_back({name, -1});
      continue;
    }
    const SearchResult res = read_result_json(result_path);
    const bool timed = std::filesystem::exists(results_dir / name / "timing.json");
    scene_runtime.push_back(timed ? std::optional<double>(res.stats.total_ms / 1000.0) : std::nullopt);
    for (const ObjectState &gt : *rec.frame.ground_truth) {
      const ObjectResult *o = res.find(gt.object_id);
      if (!o) {
        report.missing.push_back({name, gt.object_id});
        continue;
      }
      const auto pts = points.find(gt.object_id);
      if (pts == points.end())
        throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(gt.object_id));
      Instance inst;
      inst.error = o->ok ? adds_error(pts->second, gt.pose, o->best.pose) : std::numeric_limits<double>::infinity();
      if (timed) inst.runtime_s = o->millis / 1000.0;
      per_object[gt.object_id].push_back(inst);
    }
  }

  std::vector<Instance> pooled;
  for (const auto &[id, inst] : per_object) {
    const ObjectModel *m = find_model(models, id);
    std::vector<std::optional<double>> rt;
    for (const auto &i : inst) rt.push_back(i.runtime_s);
    report.rows.push_back(make_row(m ? m->name : std::to_string(id), id, inst, options.max_threshold, mean_of(rt)));
    pooled.insert(pooled.end(), inst.begin(), inst.end());
  }
  report.rows.push_back(make_row("all", -1, pooled, options.max_threshold, mean_of(scene_runtime)));
  return report;
}

void write_report_json(const std::filesystem::path &path, const EvalReport &report) {
  nlohmann::ordered_json j;
  j["aggregation"] = report.aggregation;
  j["scenes"] = report.scenes;
  j["warnings"] = report.warning_count();
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto &r : report.rows) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["object_id"] = r.object_id;
    e["instances"] = r.instances;
    e["auc"] = r.auc;
    e["pct_below_1cm"] = r.pct_below_1cm;
    e["pct_below_2cm"] = r.pct_below_2cm;
    e["mean_runtime_s"] = r.mean_runtime_s ? nlohmann::ordered_json(*r.mean_runtime_s) : nlohmann::ordered_json();
    j["rows"].push_back(std::move(e));
  }
  j["missing"] = nlohmann::ordered_json::array();
  for (const auto &m : report.missing) j["missing"].push_back({{"scene", m.scene}, {"object_id", m.object_id}});
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

EvalReport read_report_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  EvalReport report;
  try {
    const auto j = nlohmann::json::parse(in);
    report.aggregation = j.at("aggregation");
    report.scenes = j.at("scenes");
    for (const auto &e : j.at("rows")) {
      EvalRow r;
      r.name = e.at("name");
      r.object_id = e.at("object_id");
      r.instances = e.at("instances");
      r.auc = e.at("auc");
      r.pct_below_1cm = e.at("pct_below_1cm");
      r.pct_below_2cm = e.at("pct_below_2cm");
      if (!e.at("mean_runtime_s").is_null()) r.mean_runtime_s = e.at("mean_runtime_s").get<double>();
      report.rows.push_back(std::move(r));
    }
    for (const auto &e : j.at("missing")) report.missing.push_back({e.at("scene"), e.at("object_id")});
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::Io, "malformed report " + path.string() + ": " + e.what());
  }
  return report;
}

void write_report_csv(std::ostream &out, const EvalReport &report) {
  out << "name,object_id,instances,auc,pct_below_1cm,pct_below_2cm,mean_runtime_s\n";
  char buf[256];
  for (const auto &r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.6f,%.6f,%.6f,", r.name.c_str(), r.object_id, r.instances, r.auc,
                  r.pct_below_1cm, r.pct_below_2cm);
    out << buf;
    if (r.mean_runtime_s) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.mean_runtime_s);
      out << buf;
    }
    out << '\n';
  }
}

std::string format_report(const EvalReport &report) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %9s %8s %8s %8s %12s\n", "object", "instances", "AUC", "<1cm", "<2cm",
                "runtime (s)");
  s << buf;
  for (const auto &r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %9zu %8.2f %8.2f %8.2f ", r.name.c_str(), r.instances, r.auc,
                  r.pct_below_1cm, r.pct_below_2cm);
    s << buf;
    if (r.mean_runtime_s) {
      std::snprintf(buf, sizeof buf, "%12.3f", *r.mean_runtime_s);
      s << buf;
    } else {
      s << "           -";
    }
    s << '\n';
  }
  s << report.scenes << " scenes, " << report.aggregation << " totals";
  if (report.warning_count() > 0) s << ", " << report.warning_count() << " missing results";
  s << '\n';
  return s.str();
}

BenchStage bench_proposals(const SceneFrame &frame, const std::vector<ObjectModel> &models, const SearchConfig &cfg,
                           size_t proposals, int repeat) {
  if (repeat < 1) throw Error(ErrorCode::InvalidConfig, "repeat must be >= 1");
  const auto all = scene_proposals(frame, models, cfg);
  if (all.empty()) throw Error(ErrorCode::EmptyBatch, "scene has no proposals");
  if (proposals == 0) proposals = all.size();
  std::vector<ProposalTask> tasks(proposals);
  for (size_t i = 0; i < proposals; ++i) tasks[i] = all[i % all.size()];

  BenchStage best;
  best.proposals = proposals;
  best.workers = cfg.workers;
  best.total_ms = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeat; ++r) {
    const SearchStats s = evaluate_proposals(frame, models, cfg, tasks).stats;
    if (s.total_ms < best.total_ms) {
      best.total_ms = s.total_ms;
      best.render_ms = s.render_ms;
      best.refine_ms = s.refine_ms;
      best.rerender_ms = s.rerender_ms;
      best.cost_ms = s.cost_ms;
    }
    best.peak_relation_bytes = std::max(best.peak_relation_bytes, s.peak_relation_bytes);
  }
  return best;
}

}  // namespace rvpose
