#include "rvpose/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Geometry>
#include <json.hpp>

namespace rvpose {
namespace {

int inclusive_count(double lo, double hi, double step) {
  return int(std::floor((hi - lo) / step + 1e-9)) + 1;
}

}  // namespace

std::vector<Vec3> fibonacci_viewpoints(int m) {
  if (m < 1) throw Error(ErrorCode::InvalidConfig, "viewpoint count must be >= 1");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out;
  out.reserve(size_t(m));
  for (int i = 0; i < m; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / m;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double az = i * golden;
    out.push_back(Vec3(r * std::cos(az), r * std::sin(az), z).normalized());
  }
  return out;
}

Mat3 rotation_z_to(const Vec3 &v) {
  const Vec3 z = Vec3::UnitZ();
  const Vec3 n = v.normalized();
  const double c = z.dot(n);
  if (1.0 + c < 1e-12) return Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()).toRotationMatrix();
  return Eigen::Quaterniond::FromTwoVectors(z, n).normalized().toRotationMatrix();
}

RotationProposalSet rotation_proposals(int m, int n_inplane) {
  if (n_inplane < 1) throw Error(ErrorCode::InvalidConfig, "in-plane count must be >= 1");
  RotationProposalSet set;
  set.viewpoint_count = m;
  set.inplane_count = n_inplane;
  const auto views = fibonacci_viewpoints(m);
  set.rotations.reserve(size_t(m) * size_t(n_inplane));
  for (int i = 0; i < m; ++i) {
    const Mat3 base = rotation_z_to(views[size_t(i)]);
    for (int k = 0; k < n_inplane; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / n_inplane;
      const Mat3 spin = Eigen::AngleAxisd(theta, views[size_t(i)]).toRotationMatrix();
      set.rotations.push_back({spin * base, i, k});
    }
  }
  return set;
}

TranslationProposalSet translation_proposals(const Detection &det, const DepthImage &depth,
                                             const LabelImage &labels, const CameraIntrinsics &k, double z_step) {
  if (!(z_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "z_step must be positive");
  if (!labels.same_size(depth.width, depth.height))
    throw Error(ErrorCode::DimensionMismatch, "label and depth images differ in size");
  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -z_min;
  const size_t n = depth.data.size();
  for (int32_t idx : det.mask_pixels) {
    if (idx < 0 || size_t(idx) >= n) continue;
    if (labels.data[size_t(idx)] != det.object_id) continue;
    const float d = depth.data[size_t(idx)];
    if (!DepthImage::valid_value(d)) continue;
    z_min = std::min(z_min, double(d));
    z_max = std::max(z_max, double(d));
  }
  if (!(z_min <= z_max))
    throw Error(ErrorCode::NoValidDepth, "object " + std::to_string(det.object_id) + " has no valid depth");

  TranslationProposalSet set;
  set.u_c = det.full_bbox.center_u();
  set.v_c = det.full_bbox.center_v();
  set.z_min = z_min;
  set.z_max = z_max;
  set.z_step = z_step;
  const int inner = int(std::ceil((z_max - z_min) / z_step - 1e-9));
  for (int i = 0; i < inner; ++i) set.translations.push_back(unproject_pixel(k, set.u_c, set.v_c, z_min + i * z_step));
  set.translations.push_back(unproject_pixel(k, set.u_c, set.v_c, z_max));
  return set;
}

PoseProposalSet pose_proposals_6dof(const RotationProposalSet &rot, const TranslationProposalSet &trans,
                                    int object_id, const Vec3 &anchor) {
  if (rot.rotations.empty() || trans.translations.empty())
    throw Error(ErrorCode::EmptyBatch, "empty rotation or translation proposals");
  PoseProposalSet set;
  set.object_id = object_id;
  set.poses.reserve(rot.rotations.size() * trans.translations.size());
  for (size_t r = 0; r < rot.rotations.size(); ++r) {
    const Mat3 &rm = rot.rotations[r].rotation;
    for (size_t t = 0; t < trans.translations.size(); ++t)
      set.poses.push_back({RigidTransform(rm, trans.translations[t] - rm * anchor), int(r), int(t)});
  }
  return set;
}

PoseProposalSet grid_proposals_3dof(const Workspace &ws, double dt, double dyaw, double fixed_z, int object_id,
                                    bool collapse_yaw) {
  if (ws.empty()) throw Error(ErrorCode::InvalidConfig, "empty workspace");
  if (!(dt > 0.0) || !(dyaw > 0.0)) throw Error(ErrorCode::InvalidConfig, "grid steps must be positive");
  const int nx = inclusive_count(ws.x_min, ws.x_max, dt);
  const int ny = inclusive_count(ws.y_min, ws.y_max, dt);
  int nyaw = std::max(1, int(std::floor(2.0 * std::numbers::pi / dyaw + 1e-9)));
  while (nyaw > 1 && (nyaw - 1) * dyaw >= 2.0 * std::numbers::pi) --nyaw;
  if (collapse_yaw) nyaw = 1;

  PoseProposalSet set;
  set.object_id = object_id;
  set.poses.reserve(size_t(nx) * size_t(ny) * size_t(nyaw));
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const int cell = ix * ny + iy;
      for (int k = 0; k < nyaw; ++k) {
        const Pose3Dof p(ws.x_min + ix * dt, ws.y_min + iy * dt, k * dyaw);
        set.poses.push_back({lift_pose3dof(p, fixed_z), k, cell});
      }
    }
  }
  return set;
}

void write_proposals_json(std::ostream &out, const PoseProposalSet &set) {
  nlohmann::ordered_json j;
  j["object_id"] = set.object_id;
  j["proposals"] = nlohmann::ordered_json::array();
  for (const auto &p : set.poses) {
    nlohmann::ordered_json e;
    e["rotation_index"] = p.rotation_index;
    e["translation_index"] = p.translation_index;
    e["pose"] = p.pose.to_matrix34();
    j["proposals"].push_back(std::move(e));
  }
  out << j.dump(1) << '\n';
}

}  // namespace rvpose
