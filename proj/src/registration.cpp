#include "rvpose/registration.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "rvpose/neighbors.hpp"
#include "rvpose/parallel.hpp"

namespace rvpose {
namespace {

struct Correspondence {
  size_t source;
  size_t target;
};

std::vector<Correspondence> correspond(std::span<const Point> source, std::span<const Point> target,
                                       const RigidTransform &t, double gate, double *rms = nullptr) {
  std::vector<Point> moved(source.size());
  const Eigen::Matrix3f r = t.rotation().cast<float>();
  const Eigen::Vector3f tr = t.translation().cast<float>();
  for (size_t i = 0; i < source.size(); ++i) moved[i] = r * source[i] + tr;
  const NeighborResult nn = knn_streamed(moved, target, 1);
  std::vector<Correspondence> pairs;
  pairs.reserve(source.size());
  double sum = 0.0;
  for (size_t i = 0; i < source.size(); ++i) {
    if (!nn.has(i)) continue;
    const double d = std::sqrt(double(nn.sq_dist(i)));
    if (d > gate) continue;
    pairs.push_back({i, size_t(nn.index(i))});
    sum += d * d;
  }
  if (rms) *rms = pairs.empty() ? 0.0 : std::sqrt(sum / double(pairs.size()));
  return pairs;
}

double rotation_angle(const Mat3 &r) { return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0)); }

Mat3 skew(const Vec3 &v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

RigidTransform apply_increment(const RigidTransform &t, const Vec3 &w, const Vec3 &v) {
  const Mat3 dr = so3_exp(w);
  return RigidTransform(dr * t.rotation(), dr * t.translation() + v).orthonormalized();
}

}  // namespace

void GicpConfig::validate() const {
  if (k_covariance < 4) throw Error(ErrorCode::InvalidConfig, "k_covariance must be >= 4");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be in (0, 1)");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
  if (!(translation_tolerance > 0.0 && rotation_tolerance > 0.0 && max_correspondence_distance > 0.0))
    throw Error(ErrorCode::InvalidConfig, "tolerances must be positive");
}

Mat3 so3_exp(const Vec3 &w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

RegistrationResult icp_point2point(std::span<const Point> source, std::span<const Point> target,
                                   const RigidTransform &init, const GicpConfig &cfg) {
  RegistrationResult res;
  res.transform = init;
  if (source.size() < 3 || target.size() < 3) {
    res.error = ErrorCode::DegenerateCorrespondences;
    return res;
  }
  RigidTransform t = init;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    res.iterations = iter;
    const auto pairs = correspond(source, target, t, cfg.max_correspondence_distance);
    if (pairs.size() < 3) {
      res.error = ErrorCode::DegenerateCorrespondences;
      res.transform = init;
      res.converged = false;
      return res;
    }
    Eigen::Matrix3Xd src(3, pairs.size()), dst(3, pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
      src.col(Eigen::Index(i)) = t * source[pairs[i].source].cast<double>();
      dst.col(Eigen::Index(i)) = target[pairs[i].target].cast<double>();
    }
    const Eigen::Matrix4d fit = Eigen::umeyama(src, dst, false);
    const RigidTransform step(fit.topLeftCorner<3, 3>(), fit.topRightCorner<3, 1>());
    t = (step * t).orthonormalized();
    if (step.translation().norm() < cfg.translation_tolerance &&
        rotation_angle(step.rotation()) < cfg.rotation_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.transform = t;
  correspond(source, target, t, cfg.max_correspondence_distance, &res.final_residual);
  return res;
}

Covariances estimate_covariances(std::span<const Point> cloud, int k, double epsilon) {
  if (cloud.size() <= size_t(k)) throw Error(ErrorCode::TooFewPoints, "cloud not larger than k_covariance");
  const NeighborResult nn = knn_streamed(cloud, cloud, k);
  Covariances covs(cloud.size());
  const Eigen::Vector3d regularized(epsilon, 1.0, 1.0);
  for (size_t i = 0; i < cloud.size(); ++i) {
    Vec3 mean = Vec3::Zero();
    for (int s = 0; s < k; ++s) mean += cloud[size_t(nn.index(i, s))].cast<double>();
    mean /= double(k);
    Mat3 c = Mat3::Zero();
    for (int s = 0; s < k; ++s) {
      const Vec3 d = cloud[size_t(nn.index(i, s))].cast<double>() - mean;
      c += d * d.transpose();
    }
    c /= double(k);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(c);  // eigenvalues ascending
    const Mat3 &u = eig.eigenvectors();
    covs[i] = u * regularized.asDiagonal() * u.transpose();
  }
  return covs;
}

RegistrationResult gicp_align(std::span<const Point> source, std::span<const Point> target,
                              const Covariances &source_covs, const Covariances &target_covs,
                              const RigidTransform &init, const GicpConfig &cfg) {
  RegistrationResult res;
  res.transform = init;
  if (source_covs.size() != source.size() || target_covs.size() != target.size())
    throw Error(ErrorCode::DimensionMismatch, "covariances do not match their clouds");
  if (source.size() < 3 || target.size() < 3) {
    res.error = ErrorCode::DegenerateCorrespondences;
    return res;
  }

  RigidTransform t = init;
  std::vector<Mat3> info;
  std::vector<Vec3> a;
  std::vector<Vec3> b;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    res.iterations = iter;
    const auto pairs = correspond(source, target, t, cfg.max_correspondence_distance);
    if (pairs.size() < 3) {
      res.error = ErrorCode::DegenerateCorrespondences;
      res.transform = t;
      return res;
    }
    const Mat3 &r = t.rotation();
    info.resize(pairs.size());
    a.resize(pairs.size());
    b.resize(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
      const auto &p = pairs[i];
      a[i] = source[p.source].cast<double>();
      b[i] = target[p.target].cast<double>();
      info[i] = (target_covs[p.target] + r * source_covs[p.source] * r.transpose()).inverse();
    }
    auto objective = [&](const RigidTransform &x) {
      double f = 0.0;
      for (size_t i = 0; i < a.size(); ++i) {
        const Vec3 d = b[i] - x * a[i];
        f += d.dot(info[i] * d);
      }
      return f;
    };

    // d(xi) ~ d0 + J xi with J = [ [Ta]x , -I ] for x' = exp(w) x + v
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    double f0 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const Vec3 ta = t * a[i];
      const Vec3 d0 = b[i] - ta;
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = skew(ta);
      j.rightCols<3>() = -Mat3::Identity();
      const Eigen::Matrix<double, 6, 3> jt_info = j.transpose() * info[i];
      h += jt_info * j;
      g += jt_info * d0;
      f0 += d0.dot(info[i] * d0);
    }
    if (!std::isfinite(f0)) {
      res.error = ErrorCode::SingularNormalEquations;
      res.transform = t;
      return res;
    }

    Eigen::Matrix<double, 6, 1> xi;
    bool solved = false;
    for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
      Eigen::Matrix<double, 6, 6> hd = h;
      if (attempt == 1) hd.diagonal().array() += 1e-6;
      Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(hd);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
      xi = ldlt.solve(-g);
      solved = xi.allFinite() && ldlt.info() == Eigen::Success;
    }
    if (!solved) {
      res.error = ErrorCode::SingularNormalEquations;
      res.transform = t;
      return res;
    }

    Eigen::Matrix<double, 6, 1> step = xi;
    bool accepted = false;
    RigidTransform next = t;
    double f_next = f0;
    for (int halvings = 0; halvings <= 8; ++halvings) {
      next = apply_increment(t, step.head<3>(), step.tail<3>());
      f_next = objective(next);
      if (std::isfinite(f_next) && f_next <= f0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    t = next;
    res.objective_before.push_back(f0);
    res.objective_trace.push_back(f_next);
    if (step.head<3>().norm() < cfg.rotation_tolerance && step.tail<3>().norm() < cfg.translation_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.transform = t;
  correspond(source, target, t, cfg.max_correspondence_distance, &res.final_residual);
  return res;
}

TargetCache::TargetCache(std::vector<std::vector<Point>> targets, int k_covariance, double epsilon)
    : targets_(std::move(targets)), covs_(targets_.size()), built_(targets_.size(), 0), k_(k_covariance),
      epsilon_(epsilon) {}

void TargetCache::build(std::span<const size_t> referenced, int workers) {
  std::vector<size_t> todo;
  for (size_t i : referenced) {
    if (i >= targets_.size()) throw Error(ErrorCode::InvalidConfig, "task references a missing target");
    if (!built_[i] && std::find(todo.begin(), todo.end(), i) == todo.end()) todo.push_back(i);
  }
  parallel_for(todo.size(), workers, [&](size_t n) {
    const size_t i = todo[n];
    try {
      covs_[i] = estimate_covariances(targets_[i], k_, epsilon_);
    } catch (const Error &) {
      covs_[i].reset();
    }
  });
  for (size_t i : todo) built_[i] = 1;
  computations_ += todo.size();
}

const Covariances *TargetCache::covariances(size_t i) const {
  return built_.at(i) && covs_[i] ? &*covs_[i] : nullptr;
}

std::vector<RegistrationResult> m2m_gicp(TargetCache &cache, std::span<const M2mTask> tasks, const GicpConfig &cfg,
                                         int workers) {
  cfg.validate();
  std::vector<size_t> referenced;
  referenced.reserve(tasks.size());
  for (const auto &task : tasks) referenced.push_back(task.target);
  cache.build(referenced, workers);

  std::vector<RegistrationResult> results(tasks.size());
  parallel_for(tasks.size(), workers, [&](size_t i) {
    const M2mTask &task = tasks[i];
    RegistrationResult &out = results[i];
    out.transform = task.init;
    const Covariances *tcovs = cache.covariances(task.target);
    if (!tcovs) {
      out.error = ErrorCode::TooFewPoints;
      return;
    }
    Covariances scovs;
    try {
      scovs = estimate_covariances(task.source, cfg.k_covariance, cfg.epsilon);
    } catch (const Error &e) {
      out.error = e.code();
      return;
    }
    const auto &target = cache.points(task.target);
    if (task.target_subset.empty()) {
      out = gicp_align(task.source, target, scovs, *tcovs, task.init, cfg);
      return;
    }
    std::vector<Point> pts;
    Covariances covs;
    pts.reserve(task.target_subset.size());
    covs.reserve(task.target_subset.size());
    for (int32_t j : task.target_subset) {
      pts.push_back(target[size_t(j)]);
      covs.push_back((*tcovs)[size_t(j)]);
    }
    out = gicp_align(task.source, pts, scovs, covs, task.init, cfg);
  });
  return results;
}

std::vector<RegistrationResult> m2m_gicp(std::span<const std::vector<Point>> targets, std::span<const M2mTask> tasks,
                                         const GicpConfig &cfg, int workers, M2mStats *stats) {
  TargetCache cache(std::vector<std::vector<Point>>(targets.begin(), targets.end()), cfg.k_covariance, cfg.epsilon);
  auto results = m2m_gicp(cache, tasks, cfg, workers);
  if (stats) stats->target_covariance_computations += cache.covariance_computations();
  return results;
}

Pose3Dof project_to_3dof(const RigidTransform &t, double /*fixed_z*/) {
  const Mat3 &r = t.rotation();
  // closest planar rotation to the upper-left 2x2 block
  const double yaw = std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1));
  return Pose3Dof(t.translation().x(), t.translation().y(), yaw);
}

}  // namespace rvpose
