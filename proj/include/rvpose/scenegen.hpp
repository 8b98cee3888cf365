#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rvpose/core.hpp"

namespace rvpose {

enum class PrimitiveKind { Cylinder, Box, LathedBottle };

/// Paints vertices whose height fraction lies in [z_from, z_to].
struct ColorBand {
  double z_from = 0.0;
  double z_to = 1.0;
  Rgb color;
};

/// Dimensions (meters):
///   Cylinder      (radius, height, unused)
///   Box           (size x, size y, size z)
///   LathedBottle  (body radius, height, neck radius)
struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Cylinder;
  Vec3 dimensions = Vec3::Zero();
  std::vector<ColorBand> color_bands;

  void validate() const;
};

struct PrimitiveMesh {
  TriangleMesh mesh;
  InscribedCylinder inscribed;
};

/// Closed mesh standing on z = 0 with its axis along +z. Walls are split at
/// band boundaries so every triangle carries one band color.
PrimitiveMesh make_primitive_mesh(const PrimitiveSpec &spec, int segments = 32);

ObjectModel make_model(int object_id, const std::string &name, const PrimitiveSpec &spec, int segments = 32);

/// Three cans (ids 1-3) and three bottles (ids 4-6) sharing meshes but not
/// colors, plus two boxes (ids 7-8).
std::vector<ObjectModel> standard_models();

const char *to_string(PrimitiveKind kind);
PrimitiveKind parse_primitive_kind(const std::string &name);

struct NoiseModel {
  double depth_sigma = 0.0;         // meters
  double dropout_prob = 0.0;        // [0, 1]
  double color_jitter_sigma = 0.0;  // sRGB units

  void validate() const;
  bool none() const { return depth_sigma == 0.0 && dropout_prob == 0.0 && color_jitter_sigma == 0.0; }
};

struct Placement {
  int object_id = 0;
  RigidTransform pose;  // object-to-world
};

struct SceneSpec {
  std::vector<Placement> placements;
  double table_half_extent = 0.5;  // square table centered on the world origin
  double table_z = 0.0;
  CameraIntrinsics camera;
  NoiseModel noise;
  uint64_t rng_seed = 0;

  void validate(const std::vector<ObjectModel> &models) const;
};

/// Default camera: 1 m from the table center, optical axis 30 degrees off
/// vertical, image x along world +x.
CameraIntrinsics default_camera();

/// Checkerboard table plane (label 0) at table_z.
TriangleMesh make_table_mesh(double half_extent, double table_z, int tiles = 20);

/// Rasterizes the table and all placements into one z-buffer, derives
/// detections (mask from labels, full box from the unoccluded projection),
/// records ground truth and applies spec.noise with spec.rng_seed.
SceneFrame generate_scene(const SceneSpec &spec, const std::vector<ObjectModel> &models);

/// Gaussian depth noise, Bernoulli dropout, clamped sRGB jitter. Labels and
/// detections are left as they are.
SceneFrame apply_noise(const SceneFrame &frame, const NoiseModel &noise, uint64_t seed);

/// Fraction of the object's unoccluded silhouette hidden by other objects.
double occlusion_fraction(const SceneSpec &spec, const std::vector<ObjectModel> &models, int object_id);

struct RandomSceneOptions {
  std::vector<int> object_ids;
  double placement_half_extent = 0.3;
  /// Allowed overlap of two footprint circles as a fraction of the smaller radius.
  double max_overlap = 0.0;
  double min_gap = 0.005;
  int max_attempts = 10000;
};

/// Upright objects at uniform (x, y, yaw), rejection-sampled against overlap.
SceneSpec random_scene(const std::vector<ObjectModel> &models, const RandomSceneOptions &options, uint64_t seed);

/// Random scene in which `target_id` is at least `min_fraction` hidden by
/// `occluder_id`, placed between it and the camera.
SceneSpec occluded_scene(const std::vector<ObjectModel> &models, const RandomSceneOptions &options, int target_id,
                         int occluder_id, double min_fraction, uint64_t seed);

/// Radius of the footprint circle about the object z axis.
double footprint_radius(const ObjectModel &model);

struct SceneRecord {
  SceneFrame frame;
  double table_z = 0.0;
  double table_half_extent = 0.5;
  uint64_t rng_seed = 0;
  NoiseModel noise;
};

// Scene directory: scene.json, color.ppm, depth.pgm, labels.pgm.
void write_scene(const std::filesystem::path &dir, const SceneRecord &record);
SceneRecord read_scene(const std::filesystem::path &dir);

// Model directory: models.json plus one ASCII PLY per model.
void write_models(const std::filesystem::path &dir, const std::vector<ObjectModel> &models);
std::vector<ObjectModel> read_models(const std::filesystem::path &dir);

struct ObjectSet {
  std::vector<ObjectModel> models;
  RandomSceneOptions placement;
  double table_half_extent = 0.5;
};

/// JSON with optional "models" (id, name, kind, dimensions, color_bands of
/// {from, to, rgb bytes}, segments), "object_ids", "placement_half_extent",
/// "max_overlap", "min_gap" and "table_half_extent". Without "models" the
/// standard set is used.
ObjectSet read_object_set(const std::filesystem::path &path);

}  // namespace rvpose
