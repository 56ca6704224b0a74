#include "otke/clustering.hpp"

#include "otke/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace otke {

namespace {

// Squared Euclidean distances from every point to every centroid, via the
// expansion |x|^2 + |c|^2 - 2 x.c so the bulk of the work is one GEMM.
Mat squared_distances(const Mat& points, const Mat& centroids) {
    const Vec pn = points.rowwise().squaredNorm();
    const Vec cn = centroids.rowwise().squaredNorm();
    Mat d = (-2.0 * points * centroids.transpose());
    d.colwise() += pn;
    d.rowwise() += cn.transpose();
    return d.cwiseMax(0.0);
}

bool row_less(const Mat& m, Index a, Index b) {
    for (Index j = 0; j < m.cols(); ++j) {
        if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
    }
    return false;
}

}  // namespace

KmeansResult kmeans(const Mat& points, Index k, std::uint64_t seed, int max_iters) {
    const Index n = points.rows();
    if (k < 1) throw Error("kmeans: k must be >= 1");
    if (n < k) throw InsufficientData("kmeans: fewer points than clusters");

    Rng rng(seed);
    Mat centroids(k, points.cols());

    // k-means++ seeding.
    centroids.row(0) = points.row(static_cast<Index>(rng.uniform_index(n)));
    Vec best_d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (Index c = 1; c < k; ++c) {
        const Scalar total = best_d2.sum();
        Index pick = 0;
        if (total > 0) {
            Scalar target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                target -= best_d2[i];
                if (target <= 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Index>(rng.uniform_index(n));
        }
        centroids.row(c) = points.row(pick);
        best_d2 = best_d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<Index> assignment(n, -1);
    std::vector<Scalar> trace;
    for (int pass = 0; pass < max_iters; ++pass) {
        const Mat d2 = squared_distances(points, centroids);
        bool changed = false;
        Scalar inertia = 0;
        for (Index i = 0; i < n; ++i) {
            Index arg = 0;
            Scalar best = d2(i, 0);
            for (Index c = 1; c < k; ++c) {
                if (d2(i, c) < best) {
                    best = d2(i, c);
                    arg = c;
                }
            }
            inertia += best;
            if (assignment[i] != arg) {
                assignment[i] = arg;
                changed = true;
            }
        }
        trace.push_back(inertia);
        if (!changed) break;

        Mat sums = Mat::Zero(k, points.cols());
        std::vector<Index> counts(k, 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(assignment[i]) += points.row(i);
            ++counts[assignment[i]];
        }
        for (Index c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centroids.row(c) = sums.row(c) / static_cast<Scalar>(counts[c]);
            } else {
                // Reseed on the point farthest from its own centroid.
                Index far = 0;
                Scalar far_d = -1;
                for (Index i = 0; i < n; ++i) {
                    const Scalar di = d2(i, assignment[i]);
                    if (di > far_d) {
                        far_d = di;
                        far = i;
                    }
                }
                centroids.row(c) = points.row(far);
            }
        }
    }

    // Canonical centroid order: sort rows lexicographically, remap labels.
    std::vector<Index> order(k);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return row_less(centroids, a, b); });
    Mat sorted(k, points.cols());
    std::vector<Index> inverse(k);
    for (Index c = 0; c < k; ++c) {
        sorted.row(c) = centroids.row(order[c]);
        inverse[order[c]] = c;
    }
    for (auto& a : assignment) a = inverse[a];

    KmeansResult out;
    out.centroids = std::move(sorted);
    out.assignment = std::move(assignment);
    out.inertia_trace = std::move(trace);
    return out;
}

}  // namespace otke
