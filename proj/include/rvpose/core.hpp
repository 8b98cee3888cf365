#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rvpose/error.hpp"

namespace rvpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// Cloud storage is single precision; geometry and solvers work in double.
using Point = Eigen::Vector3f;

/// Rigid motion x -> R x + t. The rotation is kept orthonormal with det +1.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3 &rotation, const Vec3 &translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform translation_only(const Vec3 &t) { return {Mat3::Identity(), t}; }
  static RigidTransform rot_z(double radians, const Vec3 &t = Vec3::Zero());
  /// Rows of a 3x4 [R|t] matrix, row-major.
  static RigidTransform from_matrix34(const std::array<double, 12> &m);

  const Mat3 &rotation() const { return rotation_; }
  const Vec3 &translation() const { return translation_; }

  /// Applies `other` first, then `this`.
  RigidTransform operator*(const RigidTransform &other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }
  Vec3 operator*(const Vec3 &p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  /// Projects the rotation back onto SO(3) (nearest rotation in Frobenius norm).
  RigidTransform orthonormalized() const;

  /// ||R^T R - I||_inf < tol and det(R) > 0.
  bool is_valid(double tol = 1e-9) const;

  std::array<double, 12> to_matrix34() const;
  Eigen::Matrix4d matrix() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

RigidTransform rigid_compose(const RigidTransform &a, const RigidTransform &b);
Vec3 rigid_apply(const RigidTransform &t, const Vec3 &p);

/// Planar pose on the support plane; yaw is kept in [0, 2pi).
struct Pose3Dof {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose3Dof() = default;
  Pose3Dof(double x_, double y_, double yaw_);
};

double canonical_angle(double radians);

RigidTransform lift_pose3dof(const Pose3Dof &p, double fixed_z);

/// Pinhole camera. Camera frame: +Z forward, +X right, +Y down.
/// Pixel (u, v) has its center at continuous coordinate (u, v).
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;
  RigidTransform camera_pose;  // camera-to-world

  void validate() const;
};

struct Projection {
  double u;
  double v;
  double depth;
};

Projection project_point(const CameraIntrinsics &k, const Vec3 &p_cam);
Vec3 unproject_pixel(const CameraIntrinsics &k, double u, double v, double depth);

/// sRGB triple, components in [0, 1].
struct Rgb {
  float r = 0.f;
  float g = 0.f;
  float b = 0.f;
  bool operator==(const Rgb &) const = default;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Rgb> vertex_colors;
  std::vector<std::array<int32_t, 3>> triangles;

  void validate() const;
  bool empty() const { return triangles.empty(); }
  double min_z() const;
  double max_z() const;
};

/// Closed cylinder about the object-frame z axis.
struct InscribedCylinder {
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;

  /// Closed containment test for a point given in the object frame.
  bool contains(const Vec3 &p_object) const {
    return p_object.x() * p_object.x() + p_object.y() * p_object.y() <= radius * radius &&
           p_object.z() >= z_min && p_object.z() <= z_max;
  }
};

struct ObjectModel {
  int object_id = 0;
  std::string name;
  TriangleMesh mesh;
  InscribedCylinder inscribed_cylinder;
  bool rotationally_symmetric = false;  // about the object z axis, shape and color

  void validate() const;
  /// Center of the mesh's axis-aligned bounding box (object frame).
  Vec3 bbox_center() const;
};

const ObjectModel *find_model(const std::vector<ObjectModel> &models, int object_id);

struct ObjectState {
  int object_id = 0;
  RigidTransform pose;  // object-to-world
};

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * size_t(h), fill) {}

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  T &at(int u, int v) { return data[size_t(v) * size_t(width) + size_t(u)]; }
  const T &at(int u, int v) const { return data[size_t(v) * size_t(width) + size_t(u)]; }
  bool same_size(int w, int h) const { return width == w && height == h; }
};

/// Depth in meters; a pixel is valid iff its depth is finite, > 0 and < 100 m.
struct DepthImage : Image<float> {
  using Image<float>::Image;
  static bool valid_value(float d) { return d > 0.f && d < 100.f; }
  bool valid(int u, int v) const { return valid_value(at(u, v)); }
};

using ColorImage = Image<Rgb>;
using LabelImage = Image<int32_t>;

struct PixelBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;
  double center_u() const { return 0.5 * (u_min + u_max); }
  double center_v() const { return 0.5 * (v_min + v_max); }
};

struct Detection {
  int object_id = 0;
  PixelBox full_bbox;                // may extend beyond the image
  std::vector<int32_t> mask_pixels;  // linear pixel indices carrying object_id
  bool fully_occluded = false;
};

struct SceneFrame {
  ColorImage color;
  DepthImage depth;
  LabelImage labels;  // 0 = background / table
  std::vector<Detection> detections;
  CameraIntrinsics intrinsics;
  std::optional<std::vector<ObjectState>> ground_truth;

  void validate() const;
};

/// Rebuilds every detection's mask from the label image.
void refresh_masks(SceneFrame &frame);

struct PixelCoord {
  int32_t u = 0;
  int32_t v = 0;
};

/// Colored points in the camera frame, parallel arrays.
struct LabeledCloud {
  std::vector<Point> points;
  std::vector<Eigen::Vector3f> lab_colors;
  std::vector<PixelCoord> source_pixel;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void reserve(size_t n) {
    points.reserve(n);
    lab_colors.reserve(n);
    source_pixel.reserve(n);
  }
};

}  // namespace rvpose
