#pragma once

#include <iosfwd>
#include <vector>

#include "rvpose/core.hpp"

namespace rvpose {

struct RotationProposal {
  Mat3 rotation;
  int viewpoint = 0;  // i
  int inplane = 0;    // k
};

struct RotationProposalSet {
  int viewpoint_count = 0;
  int inplane_count = 0;
  std::vector<RotationProposal> rotations;  // viewpoint-major
};

/// Translations in the camera frame, all on the ray through (u_c, v_c).
struct TranslationProposalSet {
  double u_c = 0.0;
  double v_c = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  double z_step = 0.0;
  std::vector<Vec3> translations;
};

struct PoseProposal {
  RigidTransform pose;
  int rotation_index = 0;
  int translation_index = 0;
};

struct PoseProposalSet {
  int object_id = 0;
  std::vector<PoseProposal> poses;
};

struct Workspace {
  double x_min = -0.4;
  double x_max = 0.4;
  double y_min = -0.4;
  double y_max = 0.4;
  bool empty() const { return !(x_min <= x_max && y_min <= y_max); }
};

/// Fibonacci-lattice unit directions.
std::vector<Vec3> fibonacci_viewpoints(int m);

/// Shortest-arc rotation taking +Z onto the unit vector v; 180 degrees about
/// +X when v is -Z.
Mat3 rotation_z_to(const Vec3 &v);

/// For every viewpoint v_i: rotation_z_to(v_i) composed with a spin of
/// 2*pi*k/n_inplane about v_i.
RotationProposalSet rotation_proposals(int m, int n_inplane);

/// Depth range from the detection's labeled pixels with valid depth, sampled
/// from z_min to z_max inclusive and back-projected through the full-box
/// center. Throws NoValidDepth.
TranslationProposalSet translation_proposals(const Detection &det, const DepthImage &depth,
                                             const LabelImage &labels, const CameraIntrinsics &k, double z_step);

/// Cartesian product in the camera frame, rotation-major. The model point
/// `anchor` (object frame) is placed on each translation.
PoseProposalSet pose_proposals_6dof(const RotationProposalSet &rot, const TranslationProposalSet &trans,
                                    int object_id = 0, const Vec3 &anchor = Vec3::Zero());

/// Inclusive x/y grid at dt and yaws k*dyaw in [0, 2*pi), lifted to world
/// poses at fixed_z. `collapse_yaw` keeps only yaw 0. Provenance:
/// rotation_index = yaw index, translation_index = grid cell (x-major).
PoseProposalSet grid_proposals_3dof(const Workspace &ws, double dt, double dyaw, double fixed_z,
                                    int object_id = 0, bool collapse_yaw = false);

/// JSON audit dump: {object_id, proposals: [{rotation_index, translation_index, pose}]}.
void write_proposals_json(std::ostream &out, const PoseProposalSet &set);

}  // namespace rvpose
