#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rvpose/core.hpp"

namespace rvpose {

enum class KnnStrategy {
  Full,      // materializes the whole query x target distance relation
  Streamed,  // one pass per query keeping a bounded best-k set
};

struct KnnConfig {
  KnnStrategy strategy = KnnStrategy::Streamed;
  int k = 1;
};

inline constexpr int32_t kNoNeighbor = -1;

/// k slots per query, sorted by (squared distance, target index). Slots past
/// the target size hold kNoNeighbor and +inf.
struct NeighborResult {
  int k = 1;
  std::vector<int32_t> indices;
  std::vector<float> sq_dists;
  /// Bytes allocated for the distance relation (instrumentation).
  size_t relation_bytes = 0;

  size_t query_count() const { return k > 0 ? indices.size() / size_t(k) : 0; }
  int32_t index(size_t query, int slot = 0) const { return indices[query * size_t(k) + size_t(slot)]; }
  float sq_dist(size_t query, int slot = 0) const { return sq_dists[query * size_t(k) + size_t(slot)]; }
  bool has(size_t query, int slot = 0) const { return index(query, slot) != kNoNeighbor; }
};

/// Shared by every strategy so that distances are bitwise comparable.
inline float squared_distance(const Point &a, const Point &b) {
  const float dx = a.x() - b.x();
  const float dy = a.y() - b.y();
  const float dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

NeighborResult knn_full(std::span<const Point> queries, std::span<const Point> target, int k, int workers = 1);
NeighborResult knn_streamed(std::span<const Point> queries, std::span<const Point> target, int k, int workers = 1);
NeighborResult knn(KnnStrategy strategy, std::span<const Point> queries, std::span<const Point> target, int k,
                   int workers = 1);

KnnStrategy parse_knn_strategy(const std::string &name);
const char *to_string(KnnStrategy strategy);

}  // namespace rvpose
