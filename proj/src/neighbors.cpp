#include "rvpose/neighbors.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "rvpose/parallel.hpp"

namespace rvpose {
namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

struct Candidate {
  float d;
  int32_t i;
  bool operator<(const Candidate &o) const { return d < o.d || (d == o.d && i < o.i); }
};

NeighborResult empty_result(size_t queries, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  NeighborResult r;
  r.k = k;
  r.indices.assign(queries * size_t(k), kNoNeighbor);
  r.sq_dists.assign(queries * size_t(k), kInf);
  return r;
}

// Structure-of-arrays copy of the target for the streaming inner loop.
struct TargetSoA {
  std::vector<float> x, y, z;
  explicit TargetSoA(std::span<const Point> t) : x(t.size()), y(t.size()), z(t.size()) {
    for (size_t j = 0; j < t.size(); ++j) {
      x[j] = t[j].x();
      y[j] = t[j].y();
      z[j] = t[j].z();
    }
  }
  size_t size() const { return x.size(); }
};

// Same arithmetic as squared_distance(query, target[j]).
inline void distance_block(const Point &q, const TargetSoA &t, size_t begin, size_t end, float *out) {
  const float qx = q.x(), qy = q.y(), qz = q.z();
  const float *tx = t.x.data(), *ty = t.y.data(), *tz = t.z.data();
  for (size_t j = begin; j < end; ++j) {
    const float dx = qx - tx[j];
    const float dy = qy - ty[j];
    const float dz = qz - tz[j];
    out[j - begin] = dx * dx + dy * dy + dz * dz;
  }
}

void select_best(const float *row, size_t n, int k, int32_t *out_idx, float *out_d) {
  if (k == 1) {
    float best = kInf;
    int32_t best_i = kNoNeighbor;
    for (size_t j = 0; j < n; ++j) {
      if (row[j] < best) {
        best = row[j];
        best_i = int32_t(j);
      }
    }
    // all-inf rows still report the first target
    if (best_i == kNoNeighbor && n > 0) {
      best_i = 0;
      best = row[0];
    }
    out_idx[0] = best_i;
    out_d[0] = best;
    return;
  }
  std::vector<int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const size_t m = std::min(n, size_t(k));
  auto less = [row](int32_t a, int32_t b) { return Candidate{row[a], a} < Candidate{row[b], b}; };
  std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(m), order.end(), less);
  for (size_t s = 0; s < m; ++s) {
    out_idx[s] = order[s];
    out_d[s] = row[order[s]];
  }
}

}  // namespace

NeighborResult knn_full(std::span<const Point> queries, std::span<const Point> target, int k, int workers) {
  NeighborResult r = empty_result(queries.size(), k);
  if (target.empty() || queries.empty()) return r;
  const size_t nt = target.size();
  // The full relation, one row per query.
  std::vector<float> relation(queries.size() * nt);
  r.relation_bytes = relation.size() * sizeof(float);
  parallel_for(queries.size(), workers, [&](size_t q) {
    float *row = relation.data() + q * nt;
    for (size_t j = 0; j < nt; ++j) row[j] = squared_distance(queries[q], target[j]);
  });
  parallel_for(queries.size(), workers, [&](size_t q) {
    select_best(relation.data() + q * nt, nt, k, r.indices.data() + q * size_t(k), r.sq_dists.data() + q * size_t(k));
  });
  return r;
}

NeighborResult knn_streamed(std::span<const Point> queries, std::span<const Point> target, int k, int workers) {
  NeighborResult r = empty_result(queries.size(), k);
  r.relation_bytes = queries.size() * size_t(k) * (sizeof(float) + sizeof(int32_t));
  if (target.empty() || queries.empty()) return r;
  const TargetSoA soa(target);
  constexpr size_t kBlock = 256;
  parallel_for(queries.size(), workers, [&](size_t q) {
    float block[kBlock];
    int32_t *out_idx = r.indices.data() + q * size_t(k);
    float *out_d = r.sq_dists.data() + q * size_t(k);
    if (k == 1) {
      float best = kInf;
      int32_t best_i = kNoNeighbor;
      for (size_t b = 0; b < soa.size(); b += kBlock) {
        const size_t e = std::min(soa.size(), b + kBlock);
        distance_block(queries[q], soa, b, e, block);
        for (size_t j = b; j < e; ++j) {
          if (block[j - b] < best) {
            best = block[j - b];
            best_i = int32_t(j);
          }
        }
      }
      if (best_i == kNoNeighbor) {
        best_i = 0;
        best = squared_distance(queries[q], target[0]);
      }
      out_idx[0] = best_i;
      out_d[0] = best;
      return;
    }
    // bounded max-heap: top is the worst of the current best-k
    std::priority_queue<Candidate> heap;
    for (size_t b = 0; b < soa.size(); b += kBlock) {
      const size_t e = std::min(soa.size(), b + kBlock);
      distance_block(queries[q], soa, b, e, block);
      for (size_t j = b; j < e; ++j) {
        const Candidate c{block[j - b], int32_t(j)};
        if (heap.size() < size_t(k)) heap.push(c);
        else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
    }
    for (size_t s = heap.size(); s-- > 0;) {
      out_idx[s] = heap.top().i;
      out_d[s] = heap.top().d;
      heap.pop();
    }
  });
  return r;
}

NeighborResult knn(KnnStrategy strategy, std::span<const Point> queries, std::span<const Point> target, int k,
                   int workers) {
  return strategy == KnnStrategy::Full ? knn_full(queries, target, k, workers)
                                       : knn_streamed(queries, target, k, workers);
}

KnnStrategy parse_knn_strategy(const std::string &name) {
  if (name == "full") return KnnStrategy::Full;
  if (name == "streamed") return KnnStrategy::Streamed;
  throw Error(ErrorCode::InvalidConfig, "unknown knn strategy '" + name + "'");
}

const char *to_string(KnnStrategy strategy) { return strategy == KnnStrategy::Full ? "full" : "streamed"; }

}  // namespace rvpose
