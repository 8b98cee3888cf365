#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rvpose/core.hpp"

namespace rvpose {

struct GicpConfig {
  int k_covariance = 20;
  double epsilon = 1e-3;  // smallest regularized eigenvalue
  int max_iterations = 30;
  double translation_tolerance = 1e-4;  // meters
  double rotation_tolerance = 1e-3;     // radians
  double max_correspondence_distance = 0.05;

  void validate() const;
};

struct RegistrationResult {
  RigidTransform transform;  // maps source points onto the target
  int iterations = 0;
  double final_residual = 0.0;  // RMS Euclidean correspondence distance
  bool converged = false;
  std::optional<ErrorCode> error;
  /// GICP objective after each accepted step (fixed correspondences).
  std::vector<double> objective_trace;
  /// Objective at the start of each accepted step, same correspondences.
  std::vector<double> objective_before;
};

using Covariances = std::vector<Mat3>;

/// Point-to-point ICP with closed-form SVD alignment per iteration.
RegistrationResult icp_point2point(std::span<const Point> source, std::span<const Point> target,
                                   const RigidTransform &init, const GicpConfig &cfg);

/// Per-point plane-like covariances: the k-neighborhood covariance with its
/// eigenvalues replaced by (epsilon, 1, 1). Throws TooFewPoints if
/// |cloud| <= k.
Covariances estimate_covariances(std::span<const Point> cloud, int k, double epsilon);

/// Generalized ICP (plane-to-plane). Gauss-Newton on the SE(3) tangent with
/// left-multiplied exponential-map updates and step halving.
RegistrationResult gicp_align(std::span<const Point> source, std::span<const Point> target,
                              const Covariances &source_covs, const Covariances &target_covs,
                              const RigidTransform &init, const GicpConfig &cfg);

/// Rotation increment exp([w]x) for a 3-vector w.
Mat3 so3_exp(const Vec3 &w);

struct M2mTask {
  std::span<const Point> source;
  size_t target = 0;                  // index into the target cache
  std::vector<int32_t> target_subset;  // optional crop; empty = whole target
  RigidTransform init;
};

/// Shared GICP targets whose covariances are computed at most once each.
class TargetCache {
 public:
  TargetCache(std::vector<std::vector<Point>> targets, int k_covariance, double epsilon);

  size_t size() const { return targets_.size(); }
  const std::vector<Point> &points(size_t i) const { return targets_.at(i); }
  /// Builds covariances for the listed targets that are not built yet.
  void build(std::span<const size_t> referenced, int workers);
  /// Null when the target has too few points.
  const Covariances *covariances(size_t i) const;
  /// Number of targets whose covariances have been estimated.
  size_t covariance_computations() const { return computations_; }

 private:
  std::vector<std::vector<Point>> targets_;
  std::vector<std::optional<Covariances>> covs_;
  std::vector<char> built_;
  int k_;
  double epsilon_;
  size_t computations_ = 0;
};

/// Many-to-many GICP: independent alignments, each against one target of the
/// cache. Per-task failures are reported in the slot, never thrown. Output
/// order follows the task order and does not depend on `workers`.
std::vector<RegistrationResult> m2m_gicp(TargetCache &cache, std::span<const M2mTask> tasks, const GicpConfig &cfg,
                                         int workers = 1);

struct M2mStats {
  size_t target_covariance_computations = 0;
};

/// Convenience form with a cache private to the call.
std::vector<RegistrationResult> m2m_gicp(std::span<const std::vector<Point>> targets, std::span<const M2mTask> tasks,
                                         const GicpConfig &cfg, int workers = 1, M2mStats *stats = nullptr);

/// Planar part of a near-planar transform: (x, y) from the translation and
/// the yaw of the best-fitting rotation about z.
Pose3Dof project_to_3dof(const RigidTransform &t, double fixed_z);

}  // namespace rvpose
