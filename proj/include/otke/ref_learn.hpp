#pragma once

#include "otke/embedding.hpp"
#include "otke/types.hpp"

#include <cstdint>
#include <vector>

namespace otke {

struct BarycenterProblem {
    std::vector<Mat> member_sets;  // already in embedded feature space
    Index p = 10;
    Scalar epsilon = 0.5;
    int inner_iters = 100;  // Sinkhorn iterations per transport solve
    int outer_iters = 10;   // assignment / centroid-update rounds

    void validate() const;
};

// References from Lloyd's K-means over the pooled feature rows. For q > 1 the
// member sets are first partitioned once by entropic W2 assignment against
// q seed centroids, then each group is clustered at the feature level.
ReferenceBank fit_refs_kmeans(const std::vector<Mat>& member_sets, Index p, Index q,
                              std::uint64_t seed, Scalar epsilon = 0.5, int inner_iters = 100);

struct WassersteinFitResult {
    ReferenceBank bank;
    std::vector<Index> assignment;        // member -> reference
    std::vector<Scalar> objective_trace;  // sum of assigned entropic W2^2 per round
};

// Free-support barycenter K-means: assignment by entropic W2^2, centroid
// update by the transport-weighted mean of assigned points. Empty centroids
// are reseeded from the largest cluster's farthest member.
WassersteinFitResult fit_refs_wasserstein(const BarycenterProblem& problem, Index q,
                                          std::uint64_t seed);

// Mean entropic transport cost (1/m) sum_i <P(x^i, z), d^2(x^i, z)> for each
// reference in the bank, with squared Euclidean ground cost.
Vec barycenter_objective(const ReferenceBank& bank, const std::vector<Mat>& member_sets,
                         Scalar epsilon, int iters);

// Entropic W2^2 estimate between one set and one support matrix.
Scalar entropic_w2_sq(const Mat& set, const Mat& supports, Scalar epsilon, int iters);

}  // namespace otke
