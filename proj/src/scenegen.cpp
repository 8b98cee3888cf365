#include "rvpose/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "rvpose/image_io.hpp"
#include "rvpose/ply.hpp"
#include "rvpose/raster.hpp"

namespace rvpose {
namespace {

using nlohmann::json;

Rgb from_bytes(int r, int g, int b) {
  return {float(r / 255.0), float(g / 255.0), float(b / 255.0)};
}

Rgb band_color(const std::vector<ColorBand> &bands, double f) {
  for (const auto &b : bands)
    if (f >= b.z_from && f <= b.z_to) return b.color;
  return bands.back().color;
}

struct MeshBuilder {
  TriangleMesh mesh;
  int32_t vertex(const Vec3 &p, const Rgb &c) {
    mesh.vertices.push_back(p);
    mesh.vertex_colors.push_back(c);
    return int32_t(mesh.vertices.size() - 1);
  }
  void tri(int32_t a, int32_t b, int32_t c) { mesh.triangles.push_back({a, b, c}); }
  void quad(int32_t a, int32_t b, int32_t c, int32_t d) {
    tri(a, b, c);
    tri(a, c, d);
  }
};

// Profile knots (height fraction, radius) with band boundaries inserted.
std::vector<std::pair<double, double>> split_profile(std::vector<std::pair<double, double>> knots,
                                                     const std::vector<ColorBand> &bands) {
  for (size_t i = 0; i + 1 < bands.size(); ++i) {
    const double f = bands[i].z_to;
    auto it = std::find_if(knots.begin(), knots.end(), [f](const auto &k) { return k.first >= f; });
    if (it == knots.end() || std::abs(it->first - f) < 1e-12) continue;
    const auto &hi = *it;
    const auto &lo = *(it - 1);
    const double s = (f - lo.first) / (hi.first - lo.first);
    knots.insert(it, {f, lo.second + s * (hi.second - lo.second)});
  }
  return knots;
}

TriangleMesh lathe(const std::vector<std::pair<double, double>> &profile, double height,
                   const std::vector<ColorBand> &bands, int segments) {
  MeshBuilder b;
  auto ring = [&](double f, double r, const Rgb &c) {
    const int32_t first = int32_t(b.mesh.vertices.size());
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      b.vertex(Vec3(r * std::cos(phi), r * std::sin(phi), f * height), c);
    }
    return first;
  };
  auto next = [segments](int s) { return (s + 1) % segments; };

  // bottom cap, normal -z
  const Rgb bottom = band_color(bands, 0.0);
  const int32_t bc = b.vertex(Vec3(0, 0, 0), bottom);
  const int32_t br = ring(0.0, profile.front().second, bottom);
  for (int s = 0; s < segments; ++s) b.tri(bc, br + next(s), br + s);

  for (size_t i = 0; i + 1 < profile.size(); ++i) {
    const Rgb c = band_color(bands, 0.5 * (profile[i].first + profile[i + 1].first));
    const int32_t lo = ring(profile[i].first, profile[i].second, c);
    const int32_t hi = ring(profile[i + 1].first, profile[i + 1].second, c);
    for (int s = 0; s < segments; ++s) b.quad(lo + s, lo + next(s), hi + next(s), hi + s);
  }

  const Rgb top = band_color(bands, 1.0);
  const int32_t tc = b.vertex(Vec3(0, 0, height), top);
  const int32_t tr = ring(1.0, profile.back().second, top);
  for (int s = 0; s < segments; ++s) b.tri(tc, tr + s, tr + next(s));
  return b.mesh;
}

TriangleMesh box_mesh(const Vec3 &d, const std::vector<ColorBand> &bands) {
  MeshBuilder b;
  const double hx = d.x() / 2, hy = d.y() / 2, h = d.z();
  const Vec3 corners[4] = {{-hx, -hy, 0}, {hx, -hy, 0}, {hx, hy, 0}, {-hx, hy, 0}};
  std::vector<double> cuts{0.0};
  for (size_t i = 0; i + 1 < bands.size(); ++i) cuts.push_back(bands[i].z_to);
  cuts.push_back(1.0);

  const Rgb bottom = band_color(bands, 0.0);
  {
    int32_t q[4];
    for (int c = 0; c < 4; ++c) q[c] = b.vertex(corners[c], bottom);
    b.quad(q[0], q[3], q[2], q[1]);
  }
  for (int side = 0; side < 4; ++side) {
    const Vec3 &p0 = corners[side];
    const Vec3 &p1 = corners[(side + 1) % 4];
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const Rgb c = band_color(bands, 0.5 * (cuts[i] + cuts[i + 1]));
      const Vec3 z0(0, 0, cuts[i] * h), z1(0, 0, cuts[i + 1] * h);
      b.quad(b.vertex(p0 + z0, c), b.vertex(p1 + z0, c), b.vertex(p1 + z1, c), b.vertex(p0 + z1, c));
    }
  }
  const Rgb top = band_color(bands, 1.0);
  {
    int32_t q[4];
    for (int c = 0; c < 4; ++c) q[c] = b.vertex(corners[c] + Vec3(0, 0, h), top);
    b.quad(q[0], q[1], q[2], q[3]);
  }
  return b.mesh;
}

json pose_json(const RigidTransform &t) { return t.to_matrix34(); }

RigidTransform pose_from_json(const json &j) { return RigidTransform::from_matrix34(j.get<std::array<double, 12>>()); }

// Table and objects in one z-buffer, no noise.
SceneFrame compose(const SceneSpec &spec, const std::vector<ObjectModel> &models) {
  const CameraIntrinsics &k = spec.camera;
  SceneFrame frame;
  frame.intrinsics = k;
  frame.color = ColorImage(k.width, k.height, Rgb{});
  frame.depth = DepthImage(k.width, k.height, 0.f);
  frame.labels = LabelImage(k.width, k.height, 0);
  const RigidTransform world_to_camera = k.camera_pose.inverse();

  auto paint = [&](const RenderedView &view, int label) {
    for (int v = view.roi.v0; v < view.roi.v0 + view.roi.h; ++v) {
      for (int u = view.roi.u0; u < view.roi.u0 + view.roi.w; ++u) {
        const float d = view.depth_at(u, v);
        if (!(d > 0.f)) continue;
        float &cur = frame.depth.at(u, v);
        if (cur > 0.f && !(d < cur)) continue;
        cur = d;
        frame.color.at(u, v) = view.color_at(u, v);
        frame.labels.at(u, v) = label;
      }
    }
  };

  paint(rasterize(make_table_mesh(spec.table_half_extent, spec.table_z), world_to_camera, k, 0), 0);
  std::vector<ObjectState> truth;
  for (const auto &pl : spec.placements) {
    const ObjectModel *m = find_model(models, pl.object_id);
    const RigidTransform model_to_camera = world_to_camera * pl.pose;
    paint(rasterize(m->mesh, model_to_camera, k, pl.object_id), pl.object_id);

    Detection det;
    det.object_id = pl.object_id;
    double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300;
    for (const auto &p : m->mesh.vertices) {
      const Vec3 pc = model_to_camera * p;
      if (pc.z() <= kNearPlane) continue;
      const Projection pr = project_point(k, pc);
      u0 = std::min(u0, pr.u);
      v0 = std::min(v0, pr.v);
      u1 = std::max(u1, pr.u);
      v1 = std::max(v1, pr.v);
    }
    det.full_bbox = {u0, v0, u1, v1};
    frame.detections.push_back(std::move(det));
    truth.push_back({pl.object_id, pl.pose});
  }
  frame.ground_truth = std::move(truth);
  refresh_masks(frame);
  return frame;
}

}  // namespace

void PrimitiveSpec::validate() const {
  if (!(dimensions.x() > 0.0 && dimensions.y() > 0.0))
    throw Error(ErrorCode::InvalidSpec, "primitive dimensions must be positive");
  if (kind != PrimitiveKind::Cylinder && !(dimensions.z() > 0.0))
    throw Error(ErrorCode::InvalidSpec, "primitive dimensions must be positive");
  if (kind == PrimitiveKind::LathedBottle && !(dimensions.z() < dimensions.x()))
    throw Error(ErrorCode::InvalidSpec, "bottle neck must be narrower than its body");
  if (color_bands.empty()) throw Error(ErrorCode::InvalidSpec, "at least one color band is required");
  if (color_bands.front().z_from != 0.0 || color_bands.back().z_to != 1.0)
    throw Error(ErrorCode::InvalidSpec, "color bands must cover [0, 1]");
  for (size_t i = 0; i < color_bands.size(); ++i) {
    const auto &b = color_bands[i];
    if (!(b.z_from < b.z_to)) throw Error(ErrorCode::InvalidSpec, "empty color band");
    if (i + 1 < color_bands.size() && std::abs(b.z_to - color_bands[i + 1].z_from) > 1e-12)
      throw Error(ErrorCode::InvalidSpec, "color bands must be contiguous and ordered");
    for (float c : {b.color.r, b.color.g, b.color.b})
      if (!(c >= 0.f && c <= 1.f)) throw Error(ErrorCode::InvalidSpec, "band color outside [0, 1]");
  }
}

PrimitiveMesh make_primitive_mesh(const PrimitiveSpec &spec, int segments) {
  spec.validate();
  if (segments < 3) throw Error(ErrorCode::InvalidSpec, "need at least 3 segments");
  PrimitiveMesh out;
  const Vec3 &d = spec.dimensions;
  switch (spec.kind) {
    case PrimitiveKind::Cylinder: {
      const auto profile = split_profile({{0.0, d.x()}, {1.0, d.x()}}, spec.color_bands);
      out.mesh = lathe(profile, d.y(), spec.color_bands, segments);
      out.inscribed = {d.x(), 0.0, d.y()};
      break;
    }
    case PrimitiveKind::LathedBottle: {
      const auto profile =
          split_profile({{0.0, d.x()}, {0.6, d.x()}, {0.8, d.z()}, {1.0, d.z()}}, spec.color_bands);
      out.mesh = lathe(profile, d.y(), spec.color_bands, segments);
      out.inscribed = {d.x(), 0.0, 0.6 * d.y()};
      break;
    }
    case PrimitiveKind::Box:
      out.mesh = box_mesh(d, spec.color_bands);
      out.inscribed = {0.5 * std::min(d.x(), d.y()), 0.0, d.z()};
      break;
  }
  return out;
}

ObjectModel make_model(int object_id, const std::string &name, const PrimitiveSpec &spec, int segments) {
  PrimitiveMesh pm = make_primitive_mesh(spec, segments);
  ObjectModel m;
  m.object_id = object_id;
  m.name = name;
  m.mesh = std::move(pm.mesh);
  m.inscribed_cylinder = pm.inscribed;
  m.rotationally_symmetric = spec.kind != PrimitiveKind::Box;
  m.validate();
  return m;
}

std::vector<ObjectModel> standard_models() {
  const Rgb rim = from_bytes(190, 190, 198);
  const Rgb neck = from_bytes(50, 50, 55);
  auto can = [&](Rgb body) {
    return PrimitiveSpec{PrimitiveKind::Cylinder, Vec3(0.033, 0.12, 0.0), {{0.0, 0.1, rim}, {0.1, 0.9, body}, {0.9, 1.0, rim}}};
  };
  auto bottle = [&](Rgb body) {
    return PrimitiveSpec{PrimitiveKind::LathedBottle, Vec3(0.035, 0.2, 0.013), {{0.0, 0.75, body}, {0.75, 1.0, neck}}};
  };
  auto box = [](Vec3 dims, Rgb lower, Rgb upper) {
    return PrimitiveSpec{PrimitiveKind::Box, dims, {{0.0, 0.5, lower}, {0.5, 1.0, upper}}};
  };
  std::vector<ObjectModel> models;
  models.push_back(make_model(1, "can_red", can(from_bytes(204, 26, 26))));
  models.push_back(make_model(2, "can_green", can(from_bytes(26, 153, 51))));
  models.push_back(make_model(3, "can_blue", can(from_bytes(38, 64, 204))));
  models.push_back(make_model(4, "bottle_yellow", bottle(from_bytes(230, 204, 26))));
  models.push_back(make_model(5, "bottle_purple", bottle(from_bytes(128, 38, 153))));
  models.push_back(make_model(6, "bottle_orange", bottle(from_bytes(242, 128, 26))));
  models.push_back(make_model(7, "box_teal", box(Vec3(0.08, 0.05, 0.14), from_bytes(26, 140, 140), from_bytes(230, 230, 230))));
  models.push_back(make_model(8, "box_brown", box(Vec3(0.07, 0.045, 0.1), from_bytes(140, 90, 38), from_bytes(240, 220, 170))));
  return models;
}

const char *to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::LathedBottle: return "bottle";
  }
  return "?";
}

PrimitiveKind parse_primitive_kind(const std::string &name) {
  if (name == "cylinder") return PrimitiveKind::Cylinder;
  if (name == "box") return PrimitiveKind::Box;
  if (name == "bottle") return PrimitiveKind::LathedBottle;
  throw Error(ErrorCode::InvalidSpec, "unknown primitive kind '" + name + "'");
}

void NoiseModel::validate() const {
  if (!(depth_sigma >= 0.0 && color_jitter_sigma >= 0.0 && dropout_prob >= 0.0 && dropout_prob <= 1.0))
    throw Error(ErrorCode::InvalidSpec, "noise parameters out of range");
}

void SceneSpec::validate(const std::vector<ObjectModel> &models) const {
  camera.validate();
  noise.validate();
  if (!(table_half_extent > 0.0)) throw Error(ErrorCode::InvalidSpec, "table extent must be positive");
  std::vector<int> seen;
  for (const auto &pl : placements) {
    if (!find_model(models, pl.object_id))
      throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(pl.object_id));
    if (std::find(seen.begin(), seen.end(), pl.object_id) != seen.end())
      throw Error(ErrorCode::InvalidSpec, "object " + std::to_string(pl.object_id) + " placed twice");
    seen.push_back(pl.object_id);
    if (pl.object_id > 255) throw Error(ErrorCode::InvalidSpec, "object ids must fit 8-bit labels");
    const Vec3 &t = pl.pose.translation();
    if (std::abs(t.x()) > table_half_extent || std::abs(t.y()) > table_half_extent)
      throw Error(ErrorCode::InvalidSpec, "placement outside the table");
  }
}

CameraIntrinsics default_camera() {
  CameraIntrinsics k;
  const double tilt = 30.0 * std::numbers::pi / 180.0;
  const Vec3 eye(0.0, -std::sin(tilt), std::cos(tilt));
  const Vec3 z = (-eye).normalized();
  const Vec3 x = Vec3::UnitX();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  k.camera_pose = RigidTransform(r, eye);
  return k;
}

TriangleMesh make_table_mesh(double half_extent, double table_z, int tiles) {
  MeshBuilder b;
  const Rgb light = from_bytes(150, 120, 90);
  const Rgb dark = from_bytes(115, 92, 70);
  const double step = 2.0 * half_extent / tiles;
  for (int i = 0; i < tiles; ++i) {
    for (int j = 0; j < tiles; ++j) {
      const Rgb c = (i + j) % 2 ? dark : light;
      const double x0 = -half_extent + i * step, y0 = -half_extent + j * step;
      b.quad(b.vertex(Vec3(x0, y0, table_z), c), b.vertex(Vec3(x0 + step, y0, table_z), c),
             b.vertex(Vec3(x0 + step, y0 + step, table_z), c), b.vertex(Vec3(x0, y0 + step, table_z), c));
    }
  }
  return b.mesh;
}

SceneFrame generate_scene(const SceneSpec &spec, const std::vector<ObjectModel> &models) {
  spec.validate(models);
  SceneFrame frame = compose(spec, models);
  if (!spec.noise.none()) frame = apply_noise(frame, spec.noise, spec.rng_seed);
  return frame;
}

SceneFrame apply_noise(const SceneFrame &frame, const NoiseModel &noise, uint64_t seed) {
  noise.validate();
  SceneFrame out = frame;
  if (noise.dropout_prob > 0.0 || noise.depth_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, noise.depth_sigma > 0.0 ? noise.depth_sigma : 1.0);
    for (float &d : out.depth.data) {
      if (!DepthImage::valid_value(d)) continue;
      if (noise.dropout_prob > 0.0 && uni(rng) < noise.dropout_prob) {
        d = 0.f;
        continue;
      }
      if (noise.depth_sigma > 0.0) {
        const double nd = double(d) + gauss(rng);
        d = nd > 0.0 ? float(nd) : 0.f;
      }
    }
  }
  if (noise.color_jitter_sigma > 0.0) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, noise.color_jitter_sigma);
    auto jitter = [&](float c) { return float(std::clamp(double(c) + gauss(rng), 0.0, 1.0)); };
    for (Rgb &c : out.color.data) {
      c.r = jitter(c.r);
      c.g = jitter(c.g);
      c.b = jitter(c.b);
    }
  }
  return out;
}

double occlusion_fraction(const SceneSpec &spec, const std::vector<ObjectModel> &models, int object_id) {
  const SceneFrame frame = compose(spec, models);
  const Placement *pl = nullptr;
  for (const auto &p : spec.placements)
    if (p.object_id == object_id) pl = &p;
  if (!pl) throw Error(ErrorCode::UnknownObjectId, "object " + std::to_string(object_id) + " not placed");
  const RenderedView alone =
      rasterize(find_model(models, object_id)->mesh, spec.camera.camera_pose.inverse() * pl->pose, spec.camera);
  const size_t full = alone.valid_count();
  if (full == 0) return 1.0;
  size_t visible = 0;
  for (int32_t l : frame.labels.data) visible += l == object_id;
  return 1.0 - double(visible) / double(full);
}

double footprint_radius(const ObjectModel &model) {
  double r = 0.0;
  for (const auto &p : model.mesh.vertices) r = std::max(r, std::hypot(p.x(), p.y()));
  return r;
}

namespace {

struct Footprint {
  double x, y, r;
};

bool fits(const Footprint &c, const std::vector<Footprint> &placed, const RandomSceneOptions &o) {
  for (const auto &p : placed) {
    const double dist = std::hypot(c.x - p.x, c.y - p.y);
    const double penetration = c.r + p.r + o.min_gap - dist;
    if (penetration > o.max_overlap * std::min(c.r, p.r)) return false;
  }
  return true;
}

Placement upright(const ObjectModel &m, double x, double y, double yaw, double table_z) {
  return {m.object_id, lift_pose3dof(Pose3Dof(x, y, yaw), table_z - m.mesh.min_z())};
}

const ObjectModel &require_model(const std::vector<ObjectModel> &models, int id) {
  const ObjectModel *m = find_model(models, id);
  if (!m) throw Error(ErrorCode::UnknownObjectId, "no model for object " + std::to_string(id));
  return *m;
}

}  // namespace

SceneSpec random_scene(const std::vector<ObjectModel> &models, const RandomSceneOptions &options, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-options.placement_half_extent, options.placement_half_extent);
  std::uniform_real_distribution<double> yaw(0.0, 2.0 * std::numbers::pi);
  SceneSpec spec;
  spec.camera = default_camera();
  spec.rng_seed = seed;
  std::vector<Footprint> placed;
  for (int id : options.object_ids) {
    const ObjectModel &m = require_model(models, id);
    const double r = footprint_radius(m);
    bool ok = false;
    for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
      const Footprint c{pos(rng), pos(rng), r};
      const double a = yaw(rng);
      if (!fits(c, placed, options)) continue;
      placed.push_back(c);
      spec.placements.push_back(upright(m, c.x, c.y, a, spec.table_z));
      ok = true;
    }
    if (!ok) throw Error(ErrorCode::InvalidSpec, "could not place object " + std::to_string(id));
  }
  spec.validate(models);
  return spec;
}

SceneSpec occluded_scene(const std::vector<ObjectModel> &models, const RandomSceneOptions &options, int target_id,
                         int occluder_id, double min_fraction, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double ext = options.placement_half_extent;
  std::uniform_real_distribution<double> pos(-ext, ext);
  std::uniform_real_distribution<double> yaw(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const ObjectModel &target = require_model(models, target_id);
  const ObjectModel &occluder = require_model(models, occluder_id);
  const double rt = footprint_radius(target), ro = footprint_radius(occluder);
  const CameraIntrinsics camera = default_camera();
  const Vec3 eye = camera.camera_pose.translation();

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    SceneSpec spec;
    spec.camera = camera;
    spec.rng_seed = seed;
    const Footprint t{pos(rng), pos(rng), rt};
    Eigen::Vector2d toward(eye.x() - t.x, eye.y() - t.y);
    toward.normalize();
    const Eigen::Vector2d side(-toward.y(), toward.x());
    const double gap = options.min_gap + 0.01 * (jitter(rng) + 1.0);
    const Eigen::Vector2d oc = Eigen::Vector2d(t.x, t.y) + toward * (rt + ro + gap) + side * (0.01 * jitter(rng));
    const Footprint o{oc.x(), oc.y(), ro};
    if (std::abs(o.x) > ext || std::abs(o.y) > ext) continue;
    std::vector<Footprint> placed{t, o};
    spec.placements.push_back(upright(target, t.x, t.y, yaw(rng), spec.table_z));
    spec.placements.push_back(upright(occluder, o.x, o.y, yaw(rng), spec.table_z));
    bool ok = true;
    for (int id : options.object_ids) {
      if (id == target_id || id == occluder_id) continue;
      const ObjectModel &m = require_model(models, id);
      bool placed_one = false;
      for (int a = 0; a < options.max_attempts && !placed_one; ++a) {
        const Footprint c{pos(rng), pos(rng), footprint_radius(m)};
        const double y = yaw(rng);
        if (!fits(c, placed, options)) continue;
        placed.push_back(c);
        spec.placements.push_back(upright(m, c.x, c.y, y, spec.table_z));
        placed_one = true;
      }
      ok = ok && placed_one;
    }
    if (!ok) continue;
    if (occlusion_fraction(spec, models, target_id) < min_fraction) continue;
    spec.validate(models);
    return spec;
  }
  throw Error(ErrorCode::InvalidSpec, "could not build the requested occlusion");
}

void write_scene(const std::filesystem::path &dir, const SceneRecord &record) {
  std::filesystem::create_directories(dir);
  const SceneFrame &f = record.frame;
  const CameraIntrinsics &k = f.intrinsics;
  nlohmann::ordered_json j;
  j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  j["camera_pose"] = pose_json(k.camera_pose);
  j["table"] = {{"z", record.table_z}, {"half_extent", record.table_half_extent}};
  j["rng_seed"] = record.rng_seed;
  j["noise"] = {{"depth_sigma", record.noise.depth_sigma},
                {"dropout_prob", record.noise.dropout_prob},
                {"color_jitter_sigma", record.noise.color_jitter_sigma}};
  j["objects"] = nlohmann::ordered_json::array();
  for (const auto &d : f.detections) j["objects"].push_back(d.object_id);
  j["ground_truth"] = nlohmann::ordered_json::array();
  if (f.ground_truth)
    for (const auto &s : *f.ground_truth) j["ground_truth"].push_back({{"object_id", s.object_id}, {"pose", pose_json(s.pose)}});
  j["detections"] = nlohmann::ordered_json::array();
  for (const auto &d : f.detections) {
    j["detections"].push_back({{"object_id", d.object_id},
                               {"full_bbox", {d.full_bbox.u_min, d.full_bbox.v_min, d.full_bbox.u_max, d.full_bbox.v_max}},
                               {"fully_occluded", d.fully_occluded}});
  }
  std::ofstream out(dir / "scene.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "scene.json").string());
  out << j.dump(2) << '\n';
  write_ppm(dir / "color.ppm", f.color);
  write_depth_pgm(dir / "depth.pgm", f.depth);
  write_label_pgm(dir / "labels.pgm", f.labels);
}

SceneRecord read_scene(const std::filesystem::path &dir) {
  std::ifstream in(dir / "scene.json");
  if (!in) throw Error(ErrorCode::Io, "cannot read " + (dir / "scene.json").string());
  SceneRecord rec;
  try {
    const json j = json::parse(in);
    CameraIntrinsics k;
    const auto &ji = j.at("intrinsics");
    k.fx = ji.at("fx");
    k.fy = ji.at("fy");
    k.cx = ji.at("cx");
    k.cy = ji.at("cy");
    k.width = ji.at("width");
    k.height = ji.at("height");
    k.camera_pose = pose_from_json(j.at("camera_pose"));
    rec.frame.intrinsics = k;
    if (j.contains("table")) {
      rec.table_z = j["table"].value("z", 0.0);
      rec.table_half_extent = j["table"].value("half_extent", 0.5);
    }
    rec.rng_seed = j.value("rng_seed", uint64_t{0});
    if (j.contains("noise")) {
      rec.noise.depth_sigma = j["noise"].value("depth_sigma", 0.0);
      rec.noise.dropout_prob = j["noise"].value("dropout_prob", 0.0);
      rec.noise.color_jitter_sigma = j["noise"].value("color_jitter_sigma", 0.0);
    }
    for (const auto &jd : j.at("detections")) {
      Detection d;
      d.object_id = jd.at("object_id");
      const auto b = jd.at("full_bbox").get<std::array<double, 4>>();
      d.full_bbox = {b[0], b[1], b[2], b[3]};
      rec.frame.detections.push_back(std::move(d));
    }
    if (j.contains("ground_truth") && !j["ground_truth"].empty()) {
      std::vector<ObjectState> truth;
      for (const auto &g : j["ground_truth"]) truth.push_back({g.at("object_id").get<int>(), pose_from_json(g.at("pose"))});
      rec.frame.ground_truth = std::move(truth);
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Io, "malformed scene.json in " + dir.string() + ": " + e.what());
  }
  rec.frame.color = read_ppm(dir / "color.ppm");
  rec.frame.depth = read_depth_pgm(dir / "depth.pgm");
  rec.frame.labels = read_label_pgm(dir / "labels.pgm");
  refresh_masks(rec.frame);
  rec.frame.validate();
  return rec;
}

void write_models(const std::filesystem::path &dir, const std::vector<ObjectModel> &models) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto &m : models) {
    const std::string file = m.name + ".ply";
    write_ply(dir / file, m.mesh);
    j.push_back({{"id", m.object_id},
                 {"name", m.name},
                 {"file", file},
                 {"inscribed_cylinder",
                  {{"radius", m.inscribed_cylinder.radius},
                   {"z_min", m.inscribed_cylinder.z_min},
                   {"z_max", m.inscribed_cylinder.z_max}}},
                 {"rotationally_symmetric", m.rotationally_symmetric}});
  }
  std::ofstream out(dir / "models.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "models.json").string());
  out << j.dump(2) << '\n';
}

std::vector<ObjectModel> read_models(const std::filesystem::path &dir) {
  std::ifstream in(dir / "models.json");
  if (!in) throw Error(ErrorCode::Io, "cannot read " + (dir / "models.json").string());
  std::vector<ObjectModel> models;
  try {
    const json j = json::parse(in);
    for (const auto &e : j) {
      ObjectModel m;
      m.object_id = e.at("id");
      m.name = e.at("name");
      m.mesh = read_ply(dir / e.at("file").get<std::string>());
      const auto &c = e.at("inscribed_cylinder");
      m.inscribed_cylinder = {c.at("radius"), c.at("z_min"), c.at("z_max")};
      m.rotationally_symmetric = e.value("rotationally_symmetric", false);
      m.validate();
      models.push_back(std::move(m));
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Io, "malformed models.json in " + dir.string() + ": " + e.what());
  }
  return models;
}

ObjectSet read_object_set(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidSpec, "cannot read object set " + path.string());
  ObjectSet set;
  try {
    const json j = json::parse(in);
    if (j.contains("models")) {
      for (const auto &e : j.at("models")) {
        PrimitiveSpec spec;
        spec.kind = parse_primitive_kind(e.at("kind"));
        const auto d = e.at("dimensions").get<std::array<double, 3>>();
        spec.dimensions = Vec3(d[0], d[1], d[2]);
        for (const auto &b : e.at("color_bands")) {
          const auto rgb = b.at("rgb").get<std::array<int, 3>>();
          for (int c : rgb)
            if (c < 0 || c > 255) throw Error(ErrorCode::InvalidSpec, "band color outside 0..255");
          spec.color_bands.push_back({b.at("from"), b.at("to"), from_bytes(uint8_t(rgb[0]), uint8_t(rgb[1]), uint8_t(rgb[2]))});
        }
        set.models.push_back(make_model(e.at("id"), e.at("name"), spec, e.value("segments", 32)));
      }
    } else {
      set.models = standard_models();
    }
    if (j.contains("object_ids")) {
      set.placement.object_ids = j.at("object_ids").get<std::vector<int>>();
    } else {
      for (const auto &m : set.models) set.placement.object_ids.push_back(m.object_id);
    }
    set.placement.placement_half_extent = j.value("placement_half_extent", set.placement.placement_half_extent);
    set.placement.max_overlap = j.value("max_overlap", set.placement.max_overlap);
    set.placement.min_gap = j.value("min_gap", set.placement.min_gap);
    set.table_half_extent = j.value("table_half_extent", set.table_half_extent);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::InvalidSpec, "malformed object set " + path.string() + ": " + e.what());
  }
  for (int id : set.placement.object_ids)
    if (!find_model(set.models, id)) throw Error(ErrorCode::InvalidSpec, "object set places unknown id " + std::to_string(id));
  return set;
}

}  // namespace rvpose
