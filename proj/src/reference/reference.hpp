#pragma once

// Slow, obviously-correct counterparts of library routines. Tests compare
// the library against these; nothing in the library links them.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rvpose/core.hpp"
#include "rvpose/cost.hpp"
#include "rvpose/neighbors.hpp"

namespace rvpose::reference {

/// Sorts every target by (squared distance, index) for each query.
NeighborResult knn(std::span<const Point> queries, std::span<const Point> target, int k);

/// Direct transcription of the CIEDE2000 formula with kL = kC = kH = 1.
double ciede2000(double l1, double a1, double b1, double l2, double a2, double b2);

/// Double loop over every rendered and every observed point.
CostBreakdown proposal_cost(const LabeledCloud &rendered, const LabeledCloud &observed,
                            std::span<const int32_t> observed_labels, const ObservedAssociation &assoc,
                            const CostParams &params);

/// Points on three mutually orthogonal patches plus a sphere cap, so no
/// direction is unconstrained.
std::vector<Point> nondegenerate_cloud(size_t n, std::mt19937_64 &rng);

/// Uniform translation in a ball of `max_translation` and a rotation about a
/// uniform axis by up to `max_degrees`.
RigidTransform random_perturbation(double max_translation, double max_degrees, std::mt19937_64 &rng);

double rotation_angle_deg(const Mat3 &r);

struct RayHit {
  double depth = 0.0;   // camera z of the nearest hit, 0 for none
  double margin = 0.0;  // smallest barycentric coordinate of that hit
};

/// Casts the ray through the center of pixel (u, v) against every triangle.
RayHit cast_pixel(const TriangleMesh &mesh, const RigidTransform &model_to_camera, const CameraIntrinsics &k, int u,
                  int v);

/// Uniform points in a cube of side `extent`, with some exact duplicates so
/// distance ties occur.
std::vector<Point> random_cloud(size_t n, double extent, std::mt19937_64 &rng);

struct CostInstance {
  LabeledCloud rendered;
  LabeledCloud observed;
  std::vector<int32_t> observed_labels;
  ObservedAssociation assoc;
  CostParams params;
};

/// Dense clouds of at most `max_points` each with colors spread around
/// tau_c, so every branch of the outlier test is exercised.
CostInstance random_cost_instance(std::mt19937_64 &rng, size_t max_points = 500);

}  // namespace rvpose::reference
