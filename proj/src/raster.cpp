#include "rvpose/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rvpose/colorspace.hpp"
#include "rvpose/image_io.hpp"
#include "rvpose/parallel.hpp"

namespace rvpose {
namespace {

struct ScreenVertex {
  double x = 0.0;  // pixel coordinates
  double y = 0.0;
  double inv_z = 0.0;
  bool in_front = false;
};

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Top-left rule for an edge a->b of a triangle with positive edge() area.
inline bool owns_zero_edge(double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

}  // namespace

size_t RenderedView::valid_count() const {
  return size_t(std::count_if(depth.begin(), depth.end(), [](float d) { return d > 0.f; }));
}

void RenderedView::invalidate(int u, int v) {
  if (!roi.contains(u, v)) return;
  const size_t i = size_t(v - roi.v0) * size_t(roi.w) + size_t(u - roi.u0);
  depth[i] = 0.f;
  color[i] = Rgb{};
}

RenderedView rasterize(const TriangleMesh &mesh, const RigidTransform &model_to_camera, const CameraIntrinsics &k,
                       int object_id) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");

  RenderedView view;
  view.width = k.width;
  view.height = k.height;
  view.object_id = object_id;

  const size_t nv = mesh.vertices.size();
  std::vector<ScreenVertex> sv(nv);
  std::vector<Eigen::Vector3d> linear(nv);
  for (size_t i = 0; i < nv; ++i) {
    const Vec3 p = model_to_camera * mesh.vertices[i];
    auto &s = sv[i];
    s.in_front = p.z() > kNearPlane;
    if (s.in_front) {
      s.inv_z = 1.0 / p.z();
      s.x = k.fx * p.x() * s.inv_z + k.cx;
      s.y = k.fy * p.y() * s.inv_z + k.cy;
    }
    const Rgb &c = mesh.vertex_colors[i];
    linear[i] = {srgb_decode(c.r), srgb_decode(c.g), srgb_decode(c.b)};
  }

  // Window covering every drawable triangle, clipped to the image.
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  for (const auto &tri : mesh.triangles) {
    const auto &a = sv[size_t(tri[0])];
    const auto &b = sv[size_t(tri[1])];
    const auto &c = sv[size_t(tri[2])];
    if (!a.in_front || !b.in_front || !c.in_front) continue;
    lo_x = std::min({lo_x, a.x, b.x, c.x});
    lo_y = std::min({lo_y, a.y, b.y, c.y});
    hi_x = std::max({hi_x, a.x, b.x, c.x});
    hi_y = std::max({hi_y, a.y, b.y, c.y});
  }
  if (lo_x <= hi_x) {
    const int u0 = std::max(0, int(std::ceil(std::max(lo_x, -1.0))));
    const int v0 = std::max(0, int(std::ceil(std::max(lo_y, -1.0))));
    const int u1 = std::min(k.width - 1, int(std::floor(std::min(hi_x, double(k.width)))));
    const int v1 = std::min(k.height - 1, int(std::floor(std::min(hi_y, double(k.height)))));
    if (u1 >= u0 && v1 >= v0) view.roi = {u0, v0, u1 - u0 + 1, v1 - v0 + 1};
  }
  if (view.roi.empty()) {
    view.roi = {};
    return view;
  }

  const size_t roi_size = size_t(view.roi.w) * size_t(view.roi.h);
  std::vector<double> zbuf(roi_size, std::numeric_limits<double>::infinity());
  std::vector<Eigen::Vector3d> lin(roi_size, Eigen::Vector3d::Zero());

  for (const auto &tri : mesh.triangles) {
    size_t i0 = size_t(tri[0]), i1 = size_t(tri[1]), i2 = size_t(tri[2]);
    if (!sv[i0].in_front || !sv[i1].in_front || !sv[i2].in_front) continue;
    double area = edge(sv[i0].x, sv[i0].y, sv[i1].x, sv[i1].y, sv[i2].x, sv[i2].y);
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) {
      std::swap(i1, i2);
      area = -area;
    }
    const ScreenVertex &a = sv[i0], &b = sv[i1], &c = sv[i2];

    const int px0 = std::max(view.roi.u0, int(std::ceil(std::min({a.x, b.x, c.x}))));
    const int py0 = std::max(view.roi.v0, int(std::ceil(std::min({a.y, b.y, c.y}))));
    const int px1 = std::min(view.roi.u0 + view.roi.w - 1, int(std::floor(std::max({a.x, b.x, c.x}))));
    const int py1 = std::min(view.roi.v0 + view.roi.h - 1, int(std::floor(std::max({a.y, b.y, c.y}))));
    if (px1 < px0 || py1 < py0) continue;

    const bool own0 = owns_zero_edge(b.x, b.y, c.x, c.y);
    const bool own1 = owns_zero_edge(c.x, c.y, a.x, a.y);
    const bool own2 = owns_zero_edge(a.x, a.y, b.x, b.y);
    const double inv_area = 1.0 / area;
    const Eigen::Vector3d ca = linear[i0] * a.inv_z;
    const Eigen::Vector3d cb = linear[i1] * b.inv_z;
    const Eigen::Vector3d cc = linear[i2] * c.inv_z;

    for (int py = py0; py <= py1; ++py) {
      for (int px = px0; px <= px1; ++px) {
        const double w0 = edge(b.x, b.y, c.x, c.y, px, py);
        const double w1 = edge(c.x, c.y, a.x, a.y, px, py);
        const double w2 = edge(a.x, a.y, b.x, b.y, px, py);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        if ((w0 == 0.0 && !own0) || (w1 == 0.0 && !own1) || (w2 == 0.0 && !own2)) continue;
        const double l0 = w0 * inv_area, l1 = w1 * inv_area, l2 = w2 * inv_area;
        const double inv_z = l0 * a.inv_z + l1 * b.inv_z + l2 * c.inv_z;
        const double z = 1.0 / inv_z;
        const size_t idx = size_t(py - view.roi.v0) * size_t(view.roi.w) + size_t(px - view.roi.u0);
        if (z < zbuf[idx]) {
          zbuf[idx] = z;
          lin[idx] = (l0 * ca + l1 * cb + l2 * cc) * z;
        }
      }
    }
  }

  view.depth.assign(roi_size, 0.f);
  view.color.assign(roi_size, Rgb{});
  for (size_t i = 0; i < roi_size; ++i) {
    if (!std::isfinite(zbuf[i])) continue;
    view.depth[i] = float(zbuf[i]);
    view.color[i] = {srgb_encode(float(lin[i].x())), srgb_encode(float(lin[i].y())), srgb_encode(float(lin[i].z()))};
  }
  return view;
}

RenderedView mark_occluders(const RenderedView &view, const SceneFrame &frame, double delta_occ, bool check_labels) {
  if (!frame.depth.same_size(view.width, view.height) || !frame.labels.same_size(view.width, view.height))
    throw Error(ErrorCode::DimensionMismatch, "rendered view and frame differ in size");
  RenderedView out = view;
  for (int v = view.roi.v0; v < view.roi.v0 + view.roi.h; ++v) {
    for (int u = view.roi.u0; u < view.roi.u0 + view.roi.w; ++u) {
      const float rendered = view.depth_at(u, v);
      if (!(rendered > 0.f)) continue;
      if (!frame.depth.valid(u, v)) continue;
      const double observed = frame.depth.at(u, v);
      if (!(observed < double(rendered) - delta_occ)) continue;
      if (check_labels && frame.labels.at(u, v) == view.object_id) continue;
      out.invalidate(u, v);
    }
  }
  return out;
}

LabeledCloud render_to_cloud(const RenderedView &view, const CameraIntrinsics &k, int stride) {
  if (stride < 1) throw Error(ErrorCode::InvalidConfig, "stride must be >= 1");
  LabeledCloud cloud;
  if (view.roi.empty()) return cloud;
  auto first_multiple = [stride](int x) { return ((x + stride - 1) / stride) * stride; };
  const int v_end = view.roi.v0 + view.roi.h;
  const int u_end = view.roi.u0 + view.roi.w;
  for (int v = first_multiple(view.roi.v0); v < v_end; v += stride) {
    for (int u = first_multiple(view.roi.u0); u < u_end; u += stride) {
      const size_t idx = size_t(v - view.roi.v0) * size_t(view.roi.w) + size_t(u - view.roi.u0);
      const float d = view.depth[idx];
      if (!(d > 0.f)) continue;
      const Vec3 p = unproject_pixel(k, u, v, d);
      cloud.points.push_back(p.cast<float>());
      cloud.lab_colors.push_back(srgb_to_lab_unchecked(view.color[idx]));
      cloud.source_pixel.push_back({u, v});
    }
  }
  return cloud;
}

std::vector<LabeledCloud> render_batch(const std::vector<ObjectModel> &models, std::span<const RenderRequest> requests,
                                       const SceneFrame &frame, const CameraIntrinsics &k,
                                       const RenderBatchOptions &options) {
  std::vector<const ObjectModel *> resolved(requests.size());
  for (size_t i = 0; i < requests.size(); ++i) {
    resolved[i] = find_model(models, requests[i].object_id);
    if (!resolved[i]) throw Error(ErrorCode::UnknownObjectId, "no model for id " + std::to_string(requests[i].object_id));
  }
  const RigidTransform world_to_camera = k.camera_pose.inverse();
  std::vector<LabeledCloud> clouds(requests.size());
  parallel_for(requests.size(), options.workers, [&](size_t i) {
    const RigidTransform model_to_camera = world_to_camera * requests[i].pose;
    RenderedView view = rasterize(resolved[i]->mesh, model_to_camera, k, requests[i].object_id);
    if (options.occluder_marking) {
      RenderedView marked = mark_occluders(view, frame, options.delta_occ, options.occluder_label_check);
      if (double(marked.valid_count()) >= options.min_visible_fraction * double(view.valid_count()))
        view = std::move(marked);
    }
    clouds[i] = render_to_cloud(view, k, options.stride);
  });
  return clouds;
}

namespace {

template <typename Fn>
void expand(const RenderedView &view, Fn &&fn) {
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) fn(u, v);
}

}  // namespace

void write_view_ppm(const std::filesystem::path &path, const RenderedView &view) {
  ColorImage img(view.width, view.height);
  expand(view, [&](int u, int v) { img.at(u, v) = view.color_at(u, v); });
  write_ppm(path, img);
}

void write_view_depth_pgm(const std::filesystem::path &path, const RenderedView &view) {
  DepthImage img(view.width, view.height);
  expand(view, [&](int u, int v) { img.at(u, v) = view.depth_at(u, v); });
  write_depth_pgm(path, img);
}

}  // namespace rvpose
