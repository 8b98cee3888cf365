#include "rvpose/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

namespace rvpose {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownObjectId: return "UnknownObjectId";
    case ErrorCode::OutOfGamutInput: return "OutOfGamutInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::NoValidDepth: return "NoValidDepth";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingResult: return "MissingResult";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

RigidTransform RigidTransform::rot_z(double radians, const Vec3 &t) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return {r, t};
}

RigidTransform RigidTransform::from_matrix34(const std::array<double, 12> &m) {
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = m[size_t(i * 4 + j)];
    t(i) = m[size_t(i * 4 + 3)];
  }
  return {r, t};
}

std::array<double, 12> RigidTransform::to_matrix34() const {
  std::array<double, 12> m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[size_t(i * 4 + j)] = rotation_(i, j);
    m[size_t(i * 4 + 3)] = translation_(i);
  }
  return m;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::orthonormalized() const {
  Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, translation_};
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const Mat3 e = rotation_.transpose() * rotation_ - Mat3::Identity();
  return e.cwiseAbs().maxCoeff() < tol && rotation_.determinant() > 0.0;
}

RigidTransform rigid_compose(const RigidTransform &a, const RigidTransform &b) { return a * b; }

Vec3 rigid_apply(const RigidTransform &t, const Vec3 &p) { return t * p; }

double canonical_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a < 0.0) a += two_pi;
  // fmod of a value just below a multiple of 2pi can round up to exactly 2pi
  if (a >= two_pi) a -= two_pi;
  return a;
}

Pose3Dof::Pose3Dof(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(canonical_angle(yaw_)) {}

RigidTransform lift_pose3dof(const Pose3Dof &p, double fixed_z) {
  return RigidTransform::rot_z(p.yaw, Vec3(p.x, p.y, fixed_z));
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw Error(ErrorCode::InvalidConfig, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidConfig, "image size must be positive");
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
    throw Error(ErrorCode::InvalidConfig, "principal point outside the image");
  if (!camera_pose.is_valid(1e-6)) throw Error(ErrorCode::InvalidConfig, "camera pose is not rigid");
}

Projection project_point(const CameraIntrinsics &k, const Vec3 &p_cam) {
  if (!(p_cam.z() > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "point at or behind the camera plane");
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy, p_cam.z()};
}

Vec3 unproject_pixel(const CameraIntrinsics &k, double u, double v, double depth) {
  if (!(depth > 0.0) || !DepthImage::valid_value(float(depth)))
    throw Error(ErrorCode::InvalidDepth, "cannot unproject an invalid depth");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

void TriangleMesh::validate() const {
  if (vertex_colors.size() != vertices.size())
    throw Error(ErrorCode::InvalidSpec, "vertex color count differs from vertex count");
  if (!triangles.empty() && vertices.size() < 3) throw Error(ErrorCode::InvalidSpec, "fewer than 3 vertices");
  const auto n = int32_t(vertices.size());
  for (const auto &tri : triangles)
    for (int32_t idx : tri)
      if (idx < 0 || idx >= n) throw Error(ErrorCode::InvalidSpec, "triangle index out of range");
}

double TriangleMesh::min_z() const {
  double z = vertices.empty() ? 0.0 : vertices.front().z();
  for (const auto &v : vertices) z = std::min(z, v.z());
  return z;
}

double TriangleMesh::max_z() const {
  double z = vertices.empty() ? 0.0 : vertices.front().z();
  for (const auto &v : vertices) z = std::max(z, v.z());
  return z;
}

void ObjectModel::validate() const {
  if (object_id <= 0) throw Error(ErrorCode::InvalidSpec, "object ids must be positive");
  mesh.validate();
  const auto &c = inscribed_cylinder;
  if (!(c.radius > 0.0) || !(c.z_max >= c.z_min))
    throw Error(ErrorCode::InvalidSpec, "inscribed cylinder must have positive radius");
  double bound_r2 = 0.0;
  for (const auto &v : mesh.vertices) bound_r2 = std::max(bound_r2, v.x() * v.x() + v.y() * v.y());
  constexpr double slack = 1e-9;
  if (c.radius > std::sqrt(bound_r2) + slack || c.z_min < mesh.min_z() - slack || c.z_max > mesh.max_z() + slack)
    throw Error(ErrorCode::InvalidSpec, "inscribed cylinder exceeds the mesh bounding cylinder");
}

Vec3 ObjectModel::bbox_center() const {
  if (mesh.vertices.empty()) return Vec3::Zero();
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const auto &v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return 0.5 * (lo + hi);
}

const ObjectModel *find_model(const std::vector<ObjectModel> &models, int object_id) {
  for (const auto &m : models)
    if (m.object_id == object_id) return &m;
  return nullptr;
}

void SceneFrame::validate() const {
  intrinsics.validate();
  const int w = intrinsics.width;
  const int h = intrinsics.height;
  if (!color.same_size(w, h) || !depth.same_size(w, h) || !labels.same_size(w, h))
    throw Error(ErrorCode::DimensionMismatch, "scene images must share the camera dimensions");
  for (const auto &d : detections) {
    if (!(d.full_bbox.u_min < d.full_bbox.u_max && d.full_bbox.v_min < d.full_bbox.v_max))
      throw Error(ErrorCode::InvalidSpec, "degenerate full bounding box");
    if (d.object_id <= 0) throw Error(ErrorCode::InvalidSpec, "detection with non-positive object id");
    if (d.mask_pixels.empty() && !d.fully_occluded) {
      const bool present = std::find(labels.data.begin(), labels.data.end(), d.object_id) != labels.data.end();
      if (!present) throw Error(ErrorCode::InvalidSpec, "detection label absent and not flagged occluded");
    }
  }
}

void refresh_masks(SceneFrame &frame) {
  for (auto &d : frame.detections) {
    d.mask_pixels.clear();
    for (size_t i = 0; i < frame.labels.data.size(); ++i)
      if (frame.labels.data[i] == d.object_id) d.mask_pixels.push_back(int32_t(i));
    d.fully_occluded = d.mask_pixels.empty();
  }
}

}  // namespace rvpose
