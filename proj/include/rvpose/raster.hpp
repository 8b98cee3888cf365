#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rvpose/core.hpp"

namespace rvpose {

inline constexpr double kNearPlane = 1e-4;

/// Inclusive-exclusive pixel window [u0, u0 + w) x [v0, v0 + h).
struct PixelRect {
  int u0 = 0;
  int v0 = 0;
  int w = 0;
  int h = 0;
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int u, int v) const { return u >= u0 && v >= v0 && u < u0 + w && v < v0 + h; }
};

/// A rendered image of a single object. Only the window `roi` holds storage;
/// every pixel outside it is invalid. Invalid pixels carry depth 0 and black.
struct RenderedView {
  int width = 0;
  int height = 0;
  int object_id = 0;
  PixelRect roi;
  std::vector<float> depth;  // roi-sized, 0 = invalid
  std::vector<Rgb> color;    // roi-sized

  float depth_at(int u, int v) const {
    return roi.contains(u, v) ? depth[size_t(v - roi.v0) * size_t(roi.w) + size_t(u - roi.u0)] : 0.f;
  }
  Rgb color_at(int u, int v) const {
    return roi.contains(u, v) ? color[size_t(v - roi.v0) * size_t(roi.w) + size_t(u - roi.u0)] : Rgb{};
  }
  bool valid(int u, int v) const { return depth_at(u, v) > 0.f; }
  size_t valid_count() const;
  void invalidate(int u, int v);
};

/// Z-buffered perspective rasterization at pixel centers with a top-left fill
/// rule. Colors are interpolated perspective-correctly in linear light.
/// Triangles with any vertex closer than kNearPlane are discarded.
RenderedView rasterize(const TriangleMesh &mesh, const RigidTransform &model_to_camera,
                       const CameraIntrinsics &k, int object_id = 0);

/// Removes rendered pixels hidden behind observed clutter: the observed depth
/// is valid and more than `delta_occ` in front of the render. With
/// `check_labels`, pixels whose observed label equals the rendered object are
/// kept (they explain the object rather than occlude it).
RenderedView mark_occluders(const RenderedView &view, const SceneFrame &frame, double delta_occ,
                            bool check_labels = true);

/// Unprojects every valid pixel with u % stride == 0 and v % stride == 0.
LabeledCloud render_to_cloud(const RenderedView &view, const CameraIntrinsics &k, int stride);

struct RenderRequest {
  int object_id = 0;
  RigidTransform pose;  // object-to-world
};

struct RenderBatchOptions {
  int stride = 2;
  bool occluder_marking = true;
  bool occluder_label_check = true;
  double delta_occ = 0.0075;
  /// A render that would keep less than this share of its pixels after
  /// occluder marking is returned unmarked.
  double min_visible_fraction = 0.0;
  int workers = 1;
};

/// rasterize -> (mark_occluders) -> render_to_cloud for every request, in
/// input order. Output is independent of the worker count.
std::vector<LabeledCloud> render_batch(const std::vector<ObjectModel> &models,
                                       std::span<const RenderRequest> requests, const SceneFrame &frame,
                                       const CameraIntrinsics &k, const RenderBatchOptions &options);

/// Expands a view to full-frame images (debug dumps, scene composition).
void write_view_ppm(const std::filesystem::path &path, const RenderedView &view);
void write_view_depth_pgm(const std::filesystem::path &path, const RenderedView &view);

}  // namespace rvpose
