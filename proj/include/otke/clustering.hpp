#pragma once

#include "otke/types.hpp"

#include <cstdint>
#include <vector>

namespace otke {

struct KmeansResult {
    Mat centroids;                     // k x d, rows sorted lexicographically
    std::vector<Index> assignment;    // per input row
    std::vector<Scalar> inertia_trace;  // sum of squared distances, one entry per Lloyd pass
};

// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed;
// empty clusters are reseeded to the point farthest from its centroid.
KmeansResult kmeans(const Mat& points, Index k, std::uint64_t seed, int max_iters = 100);

}  // namespace otke
