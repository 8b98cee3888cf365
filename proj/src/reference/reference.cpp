#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include <Eigen/Geometry>

namespace rvpose::reference {

NeighborResult knn(std::span<const Point> queries, std::span<const Point> target, int k) {
  NeighborResult r;
  r.k = k;
  r.indices.assign(queries.size() * size_t(k), kNoNeighbor);
  r.sq_dists.assign(queries.size() * size_t(k), std::numeric_limits<float>::infinity());
  for (size_t q = 0; q < queries.size(); ++q) {
    std::vector<std::pair<float, int32_t>> all;
    for (size_t j = 0; j < target.size(); ++j) all.emplace_back(squared_distance(queries[q], target[j]), int32_t(j));
    std::sort(all.begin(), all.end());
    for (size_t s = 0; s < std::min(all.size(), size_t(k)); ++s) {
      r.indices[q * size_t(k) + s] = all[s].second;
      r.sq_dists[q * size_t(k) + s] = all[s].first;
    }
  }
  return r;
}

double ciede2000(double l1, double a1, double b1, double l2, double a2, double b2) {
  const double pi = std::numbers::pi;
  auto deg = [pi](double r) { return r * 180.0 / pi; };
  auto rad = [pi](double d) { return d * pi / 180.0; };

  const double c1 = std::hypot(a1, b1);
  const double c2 = std::hypot(a2, b2);
  const double cbar = (c1 + c2) / 2.0;
  const double g = 0.5 * (1.0 - std::sqrt(std::pow(cbar, 7) / (std::pow(cbar, 7) + std::pow(25.0, 7))));
  const double ap1 = (1.0 + g) * a1;
  const double ap2 = (1.0 + g) * a2;
  const double cp1 = std::hypot(ap1, b1);
  const double cp2 = std::hypot(ap2, b2);
  double hp1 = (ap1 == 0.0 && b1 == 0.0) ? 0.0 : deg(std::atan2(b1, ap1));
  double hp2 = (ap2 == 0.0 && b2 == 0.0) ? 0.0 : deg(std::atan2(b2, ap2));
  if (hp1 < 0) hp1 += 360.0;
  if (hp2 < 0) hp2 += 360.0;

  const double dl = l2 - l1;
  const double dc = cp2 - cp1;
  double dh = 0.0;
  if (cp1 * cp2 != 0.0) {
    dh = hp2 - hp1;
    if (dh > 180.0) dh -= 360.0;
    else if (dh < -180.0) dh += 360.0;
  }
  const double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(rad(dh / 2.0));

  const double lbar = (l1 + l2) / 2.0;
  const double cpbar = (cp1 + cp2) / 2.0;
  double hbar = hp1 + hp2;
  if (cp1 * cp2 != 0.0) {
    if (std::abs(hp1 - hp2) <= 180.0) hbar /= 2.0;
    else if (hp1 + hp2 < 360.0) hbar = (hp1 + hp2 + 360.0) / 2.0;
    else hbar = (hp1 + hp2 - 360.0) / 2.0;
  }
  const double t = 1.0 - 0.17 * std::cos(rad(hbar - 30.0)) + 0.24 * std::cos(rad(2.0 * hbar)) +
                   0.32 * std::cos(rad(3.0 * hbar + 6.0)) - 0.20 * std::cos(rad(4.0 * hbar - 63.0));
  const double dtheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2));
  const double rc = 2.0 * std::sqrt(std::pow(cpbar, 7) / (std::pow(cpbar, 7) + std::pow(25.0, 7)));
  const double sl = 1.0 + 0.015 * std::pow(lbar - 50.0, 2) / std::sqrt(20.0 + std::pow(lbar - 50.0, 2));
  const double sc = 1.0 + 0.045 * cpbar;
  const double sh = 1.0 + 0.015 * cpbar * t;
  const double rt = -std::sin(rad(2.0 * dtheta)) * rc;
  return std::sqrt(std::pow(dl / sl, 2) + std::pow(dc / sc, 2) + std::pow(dH / sh, 2) + rt * (dc / sc) * (dH / sh));
}

CostBreakdown proposal_cost(const LabeledCloud &rendered, const LabeledCloud &observed,
                            std::span<const int32_t> observed_labels, const ObservedAssociation &assoc,
                            const CostParams &params) {
  CostBreakdown c;
  std::vector<char> explained(observed.size(), 0);
  for (size_t i = 0; i < rendered.size(); ++i) {
    float best = std::numeric_limits<float>::infinity();
    size_t best_j = observed.size();
    for (size_t j = 0; j < observed.size(); ++j) {
      const float d = squared_distance(rendered.points[i], observed.points[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    bool out = best_j == observed.size() || std::sqrt(double(best)) > params.delta;
    if (!out && params.use_color) {
      const auto &p = rendered.lab_colors[i];
      const auto &q = observed.lab_colors[best_j];
      out = ciede2000(p.x(), p.y(), p.z(), q.x(), q.y(), q.z()) > params.tau_c;
    }
    if (out) ++c.j_r;
    else explained[best_j] = 1;
  }
  for (size_t j = 0; j < observed.size(); ++j) {
    bool selected = false;
    if (const auto *cyl = std::get_if<CylinderAssociation>(&assoc)) {
      const Vec3 p = cyl->object_to_camera.inverse() * observed.points[j].cast<double>();
      const double r2 = p.x() * p.x() + p.y() * p.y();
      selected = r2 <= cyl->cylinder.radius * cyl->cylinder.radius && p.z() >= cyl->cylinder.z_min &&
                 p.z() <= cyl->cylinder.z_max;
    } else {
      selected = observed_labels[j] == std::get<LabelAssociation>(assoc).object_id;
    }
    if (selected && !explained[j]) ++c.j_o;
  }
  return c;
}

std::vector<Point> nondegenerate_cloud(size_t n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::uniform_int_distribution<int> part(0, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Point> out;
  out.reserve(n);
  while (out.size() < n) {
    Vec3 p;
    switch (part(rng)) {
      case 0: p = Vec3(u(rng), u(rng), -0.1); break;
      case 1: p = Vec3(u(rng), -0.1, u(rng)); break;
      case 2: p = Vec3(-0.1, u(rng), u(rng)); break;
      default: {
        Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        d = d.normalized();
        if (d.x() < 0) d.x() = -d.x();
        p = Vec3(0.05, 0.05, 0.05) + 0.06 * d;
      }
    }
    out.push_back(p.cast<float>());
  }
  return out;
}

RigidTransform random_perturbation(double max_translation, double max_degrees, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
  dir.normalize();
  const Vec3 t = dir * max_translation * std::cbrt(unit(rng));
  Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
  axis.normalize();
  const double angle = max_degrees * unit(rng) * std::numbers::pi / 180.0;
  return RigidTransform(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), t);
}

double rotation_angle_deg(const Mat3 &r) {
  return Eigen::AngleAxisd(Eigen::Quaterniond(r).normalized()).angle() * 180.0 / std::numbers::pi;
}

RayHit cast_pixel(const TriangleMesh &mesh, const RigidTransform &model_to_camera, const CameraIntrinsics &k, int u,
                  int v) {
  const Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  RayHit best;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto &tri : mesh.triangles) {
    const Vec3 a = model_to_camera * mesh.vertices[size_t(tri[0])];
    const Vec3 b = model_to_camera * mesh.vertices[size_t(tri[1])];
    const Vec3 c = model_to_camera * mesh.vertices[size_t(tri[2])];
    // Moller-Trumbore with the ray origin at the camera center
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-15) continue;
    const Vec3 tv = -a;
    const double bu = tv.dot(pv) / det;
    const Vec3 qv = tv.cross(e1);
    const double bv = dir.dot(qv) / det;
    const double t = e2.dot(qv) / det;
    const double bw = 1.0 - bu - bv;
    if (bu < 0 || bv < 0 || bw < 0 || t <= 0) continue;
    if (t < best_t) {
      best_t = t;
      best.depth = t;  // dir.z() == 1
      best.margin = std::min({bu, bv, bw});
    }
  }
  return best;
}

std::vector<Point> random_cloud(size_t n, double extent, std::mt19937_64 &rng) {
  std::uniform_real_distribution<float> u(0.f, float(extent));
  std::uniform_int_distribution<int> dup(0, 9);
  std::vector<Point> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!out.empty() && dup(rng) == 0) {
      std::uniform_int_distribution<size_t> pick(0, out.size() - 1);
      out.push_back(out[pick(rng)]);
    } else {
      out.push_back(Point(u(rng), u(rng), u(rng)));
    }
  }
  return out;
}

CostInstance random_cost_instance(std::mt19937_64 &rng, size_t max_points) {
  std::uniform_int_distribution<size_t> count(0, max_points);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<float> jitter(0.f, 6.f);
  CostInstance c;
  c.params.delta = 0.002 + 0.008 * unit(rng);
  c.params.tau_c = 5.0 + 15.0 * unit(rng);
  c.params.use_color = unit(rng) < 0.7;

  const Eigen::Vector3f palette[3] = {{50.f, 60.f, 40.f}, {55.f, 55.f, 45.f}, {70.f, -20.f, 10.f}};
  std::uniform_int_distribution<int> shade(0, 2);
  std::uniform_int_distribution<int32_t> label(0, 3);
  auto fill = [&](LabeledCloud &cloud, std::vector<Point> pts) {
    for (const auto &p : pts) {
      cloud.points.push_back(p);
      const Eigen::Vector3f base = palette[shade(rng)];
      cloud.lab_colors.push_back(base + Eigen::Vector3f(jitter(rng), jitter(rng), jitter(rng)));
      cloud.source_pixel.push_back({0, 0});
    }
  };
  const double extent = 0.03 + 0.05 * unit(rng);
  fill(c.observed, random_cloud(count(rng), extent, rng));
  for (size_t i = 0; i < c.observed.size(); ++i) c.observed_labels.push_back(label(rng));

  // rendered: perturbed copies of observed points plus fresh points
  std::vector<Point> rend = random_cloud(count(rng) / 2, extent, rng);
  std::normal_distribution<float> offset(0.f, float(c.params.delta));
  if (!c.observed.empty()) {
    std::uniform_int_distribution<size_t> pick(0, c.observed.size() - 1);
    const size_t copies = count(rng) / 2;
    for (size_t i = 0; i < copies; ++i)
      rend.push_back(c.observed.points[pick(rng)] + Point(offset(rng), offset(rng), offset(rng)));
  }
  fill(c.rendered, rend);

  if (unit(rng) < 0.5) {
    c.assoc = LabelAssociation{label(rng)};
  } else {
    CylinderAssociation cyl;
    const Vec3 centre(extent * unit(rng), extent * unit(rng), 0.0);
    cyl.object_to_camera = RigidTransform(Eigen::AngleAxisd(unit(rng), Vec3::UnitX()).toRotationMatrix(), centre);
    cyl.cylinder = {extent * (0.2 + 0.5 * unit(rng)), -extent, extent * unit(rng)};
    c.assoc = cyl;
  }
  return c;
}

}  // namespace rvpose::reference
