#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "reference.hpp"
#include "rvpose/registration.hpp"

using namespace rvpose;

namespace {

std::vector<Point> transformed(const std::vector<Point> &pts, const RigidTransform &t) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const auto &p : pts) out.push_back(rigid_apply(t, p.cast<double>()).cast<float>());
  return out;
}

double translation_error(const RigidTransform &a, const RigidTransform &b) {
  return (a.translation() - b.translation()).norm();
}

double rotation_error_deg(const RigidTransform &a, const RigidTransform &b) {
  return reference::rotation_angle_deg(a.rotation().transpose() * b.rotation());
}

RegistrationResult gicp(const std::vector<Point> &src, const std::vector<Point> &tgt, const RigidTransform &init,
                        const GicpConfig &cfg) {
  const Covariances cs = estimate_covariances(src, cfg.k_covariance, cfg.epsilon);
  const Covariances ct = estimate_covariances(tgt, cfg.k_covariance, cfg.epsilon);
  return gicp_align(src, tgt, cs, ct, init, cfg);
}

bool same_result(const RegistrationResult &a, const RegistrationResult &b) {
  return a.transform.matrix() == b.transform.matrix() && a.iterations == b.iterations &&
         a.final_residual == b.final_residual && a.converged == b.converged && a.error == b.error &&
         a.objective_trace == b.objective_trace;
}

// Table plane with two raised blocks inside x in [0, 0.06], sampled with
// jitter so two samplings never share points.
std::vector<Point> block_surface(double x0, double x1, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> jit(-0.002, 0.002);
  std::vector<Point> out;
  for (double x = x0; x < x1; x += 0.01)
    for (double y = -0.1; y < 0.1; y += 0.01) {
      const double px = x + jit(rng), py = y + jit(rng);
      double z = 0.0;
      if (px > 0.02 && px < 0.06 && py > -0.05 && py < -0.01) z = 0.03;
      if (px > 0.0 && px < 0.04 && py > 0.02 && py < 0.07) z = 0.02;
      out.push_back(Point(float(px), float(py), float(z)));
    }
  return out;
}

// RMS nearest-target distance over the source points that truly overlap the
// target, so both methods are scored by the same yardstick.
double overlap_residual(const std::vector<Point> &src, const std::vector<Point> &tgt, double overlap_x0,
                        const RigidTransform &t) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto &p : src) {
    if (p.x() < overlap_x0) continue;
    const Vec3 q = rigid_apply(t, p.cast<double>());
    double best = std::numeric_limits<double>::infinity();
    for (const auto &b : tgt) best = std::min(best, (b.cast<double>() - q).squaredNorm());
    sum += best;
    ++n;
  }
  return std::sqrt(sum / double(n));
}

}  // namespace

TEST_CASE("point-to-point ICP trivial cases") {
  std::mt19937_64 rng(1);
  const auto src = reference::nondegenerate_cloud(300, rng);
  GicpConfig cfg;

  const RegistrationResult same = icp_point2point(src, src, RigidTransform::identity(), cfg);
  CHECK(same.converged);
  CHECK(same.iterations == 1);
  CHECK(same.final_residual == 0.0);
  CHECK((same.transform.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  const auto shifted = transformed(src, RigidTransform::translation_only(Vec3(0.01, 0, 0)));
  const RegistrationResult r = icp_point2point(src, shifted, RigidTransform::identity(), cfg);
  CHECK((r.transform.translation() - Vec3(0.01, 0, 0)).norm() < 1e-6);

  const auto far = transformed(src, RigidTransform::translation_only(Vec3(10, 0, 0)));
  cfg.max_correspondence_distance = 0.1;
  const RegistrationResult d = icp_point2point(src, far, RigidTransform::identity(), cfg);
  CHECK(d.error == ErrorCode::DegenerateCorrespondences);
  CHECK_FALSE(d.converged);
  CHECK(d.transform.matrix() == RigidTransform::identity().matrix());
}

TEST_CASE("covariances of a plane") {
  std::vector<Point> plane;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) plane.push_back(Point(0.01f * float(i), 0.01f * float(j), 0.f));
  const double eps = 1e-3;
  const Covariances c = estimate_covariances(plane, 20, eps);
  REQUIRE(c.size() == plane.size());
  for (size_t i = 0; i < plane.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(c[i]);
    CHECK((c[i] - c[i].transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(es.eigenvalues()(0) >= eps * (1 - 1e-9));
    CHECK(std::abs(es.eigenvalues()(0) - eps) < 1e-9);
    CHECK(std::abs(es.eigenvalues()(1) - 1.0) < 1e-9);
    CHECK(std::abs(es.eigenvalues()(2) - 1.0) < 1e-9);
    CHECK(std::abs(std::abs(es.eigenvectors()(2, 0)) - 1.0) < 1e-6);
  }
  CHECK_THROWS_AS(estimate_covariances(std::vector<Point>(plane.begin(), plane.begin() + 20), 20, eps), Error);
}

TEST_CASE("GICP on identical clouds is the identity") {
  std::mt19937_64 rng(2);
  const auto src = reference::nondegenerate_cloud(400, rng);
  const RegistrationResult r = gicp(src, src, RigidTransform::identity(), GicpConfig{});
  CHECK((r.transform.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("GICP recovers 10 degrees about z plus 5 cm") {
  std::mt19937_64 rng(3);
  const auto src = reference::nondegenerate_cloud(500, rng);
  const RigidTransform truth = RigidTransform::rot_z(10.0 * std::numbers::pi / 180.0, Vec3(0.05, 0, 0));
  const RegistrationResult r = gicp(src, transformed(src, truth), RigidTransform::identity(), GicpConfig{});
  CHECK(r.converged);
  CHECK(translation_error(r.transform, truth) < 1e-4);
  CHECK(rotation_error_deg(r.transform, truth) < 0.01);
}

TEST_CASE("GICP recovers random perturbations inside the basin") {
  std::mt19937_64 rng(4);
  // the gate has to reach as far as the largest perturbation
  GicpConfig cfg;
  cfg.max_correspondence_distance = 0.10;
  for (int t = 0; t < 20; ++t) {
    const auto src = reference::nondegenerate_cloud(500, rng);
    const RigidTransform truth = reference::random_perturbation(0.10, 20.0, rng);
    const RegistrationResult r = gicp(src, transformed(src, truth), RigidTransform::identity(), cfg);
    CHECK(translation_error(r.transform, truth) < 1e-3);
    CHECK(rotation_error_deg(r.transform, truth) < 0.1);
    CHECK(r.transform.is_valid());
  }
}

TEST_CASE("GICP objective is finite and never increases over accepted steps") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto src = reference::nondegenerate_cloud(300, rng);
    const auto tgt = transformed(src, reference::random_perturbation(0.05, 15.0, rng));
    const RegistrationResult r = gicp(src, tgt, RigidTransform::identity(), GicpConfig{});
    REQUIRE(r.objective_trace.size() == r.objective_before.size());
    for (size_t i = 0; i < r.objective_trace.size(); ++i) {
      CHECK(std::isfinite(r.objective_trace[i]));
      CHECK(r.objective_trace[i] <= r.objective_before[i]);
    }
  }
}

TEST_CASE("GICP beats point-to-point ICP under partial overlap") {
  std::mt19937_64 rng(6);
  int wins = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    // source spans x in [-0.1, 0.1], target x in [-0.02, 0.18]: 60% shared
    const auto src = block_surface(-0.1, 0.1, rng);
    const auto base = block_surface(-0.02, 0.18, rng);
    const RigidTransform pert = reference::random_perturbation(0.02, 2.0, rng);
    const auto tgt = transformed(base, pert);
    GicpConfig cfg;
    const RegistrationResult g = gicp(src, tgt, RigidTransform::identity(), cfg);
    const RegistrationResult p = icp_point2point(src, tgt, RigidTransform::identity(), cfg);
    wins += overlap_residual(src, tgt, -0.02, g.transform) <= overlap_residual(src, tgt, -0.02, p.transform);
  }
  CHECK(wins >= 45);
}

TEST_CASE("M2M batch equals the sequential loop") {
  std::mt19937_64 rng(7);
  std::vector<std::vector<Point>> targets;
  for (int i = 0; i < 3; ++i) targets.push_back(reference::nondegenerate_cloud(300, rng));
  std::vector<std::vector<Point>> sources;
  std::vector<M2mTask> tasks;
  for (int i = 0; i < 24; ++i) {
    const size_t tgt = size_t(i % 3);
    sources.push_back(transformed(targets[tgt], reference::random_perturbation(0.03, 10.0, rng)));
  }
  for (int i = 0; i < 24; ++i) {
    M2mTask task;
    task.source = sources[size_t(i)];
    task.target = size_t(i % 3);
    task.init = RigidTransform::identity();
    if (i % 4 == 1)
      for (int32_t j = 0; j < 200; ++j) task.target_subset.push_back(j);
    tasks.push_back(task);
  }
  // a source too small for covariances fails in its own slot
  const std::vector<Point> tiny(sources[0].begin(), sources[0].begin() + 5);
  M2mTask bad;
  bad.source = tiny;
  tasks.push_back(bad);

  const GicpConfig cfg;
  M2mStats stats;
  const auto batch = m2m_gicp(targets, tasks, cfg, 4, &stats);
  REQUIRE(batch.size() == tasks.size());
  CHECK(stats.target_covariance_computations == 3);
  CHECK(batch.back().error == ErrorCode::TooFewPoints);

  for (size_t i = 0; i + 1 < tasks.size(); ++i) {
    // a crop keeps the covariances estimated on the whole target
    const auto &full = targets[tasks[i].target];
    const Covariances full_covs = estimate_covariances(full, cfg.k_covariance, cfg.epsilon);
    std::vector<Point> tgt = full;
    Covariances tgt_covs = full_covs;
    if (!tasks[i].target_subset.empty()) {
      tgt.clear();
      tgt_covs.clear();
      for (int32_t j : tasks[i].target_subset) {
        tgt.push_back(full[size_t(j)]);
        tgt_covs.push_back(full_covs[size_t(j)]);
      }
    }
    const Covariances src_covs = estimate_covariances(tasks[i].source, cfg.k_covariance, cfg.epsilon);
    const RegistrationResult seq = gicp_align(tasks[i].source, tgt, src_covs, tgt_covs, tasks[i].init, cfg);
    CHECK(same_result(batch[i], seq));
  }

  for (int w : {1, 2, 3}) {
    const auto again = m2m_gicp(targets, tasks, cfg, w);
    for (size_t i = 0; i < tasks.size(); ++i) CHECK(same_result(again[i], batch[i]));
  }
}

TEST_CASE("batch of one equals gicp_align") {
  std::mt19937_64 rng(8);
  const std::vector<std::vector<Point>> targets = {reference::nondegenerate_cloud(300, rng)};
  const auto src = transformed(targets[0], reference::random_perturbation(0.05, 10.0, rng));
  M2mTask task;
  task.source = src;
  const auto r = m2m_gicp(targets, std::span<const M2mTask>(&task, 1), GicpConfig{});
  REQUIRE(r.size() == 1);
  CHECK(same_result(r[0], gicp(src, targets[0], RigidTransform::identity(), GicpConfig{})));
}

TEST_CASE("shared target covariances are computed once") {
  std::mt19937_64 rng(9);
  const std::vector<std::vector<Point>> targets = {reference::nondegenerate_cloud(200, rng)};
  std::vector<M2mTask> tasks(100);
  for (auto &t : tasks) t.source = targets[0];
  M2mStats stats;
  GicpConfig cfg;
  cfg.max_iterations = 2;
  m2m_gicp(targets, tasks, cfg, 2, &stats);
  CHECK(stats.target_covariance_computations == 1);
}

TEST_CASE("config validation") {
  GicpConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.k_covariance = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GicpConfig{};
  cfg.epsilon = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GicpConfig{};
  cfg.translation_tolerance = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("planar projection") {
  const Pose3Dof p = project_to_3dof(lift_pose3dof(Pose3Dof(1, 2, 0.3), 0.7), 0.7);
  CHECK(std::abs(p.x - 1) < 1e-12);
  CHECK(std::abs(p.y - 2) < 1e-12);
  CHECK(std::abs(p.yaw - 0.3) < 1e-12);
  const Pose3Dof id = project_to_3dof(RigidTransform::identity(), 0.0);
  CHECK(id.x == 0.0);
  CHECK(id.y == 0.0);
  CHECK(id.yaw == 0.0);
}

TEST_CASE("planar projection of a pitched pose matches the best planar fit") {
  // probe: a ring of vertices around the origin
  std::vector<Vec3> probe;
  for (int i = 0; i < 36; ++i) {
    const double a = 2 * std::numbers::pi * i / 36;
    probe.push_back(Vec3(0.05 * std::cos(a), 0.05 * std::sin(a), 0.02 * (i % 3)));
  }
  const double pitch = 5.0 * std::numbers::pi / 180.0;
  const RigidTransform t(RigidTransform::rot_z(1.1).rotation() * Eigen::AngleAxisd(pitch, Vec3::UnitY()).toRotationMatrix(),
                         Vec3(0.3, -0.2, 0.0));
  const Pose3Dof p = project_to_3dof(t, 0.0);
  REQUIRE(std::isfinite(p.yaw));

  auto displacement = [&](double yaw) {
    const RigidTransform planar = lift_pose3dof(Pose3Dof(p.x, p.y, yaw), 0.0);
    double s = 0;
    for (const auto &v : probe) s += (rigid_apply(planar, v) - rigid_apply(t, v)).norm();
    return s / double(probe.size());
  };
  double best = 0, best_d = 1e9;
  for (int i = 0; i < 36000; ++i) {
    const double yaw = 2 * std::numbers::pi * i / 36000;
    if (const double d = displacement(yaw); d < best_d) best_d = d, best = yaw;
  }
  const double diff = std::abs(canonical_angle(p.yaw - best));
  CHECK(std::min(diff, 2 * std::numbers::pi - diff) < 2e-3);
  CHECK(p.x == doctest::Approx(0.3));
  CHECK(p.y == doctest::Approx(-0.2));
}
