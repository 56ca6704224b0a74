#pragma once

#include "otke/kernels.hpp"
#include "otke/sinkhorn.hpp"
#include "otke/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace otke {

// Kernel-induced squared ground distance d^2(x, y) = k(x,x) + k(y,y) - 2 k(x,y),
// clamped at zero. Transport problems over this metric use the squared
// distance as cost; the embedding path instead uses the negated similarity.
struct GroundMetric {
    KernelSpec spec;

    Mat squared_distance(const Mat& X, const Mat& Y) const;
};

// Match kernel weighted by the direct entropic plan between the two sets.
// epsilon == 0 switches to the exact assignment oracle (square sets, n <= 8).
Scalar k_ot(const Mat& x, const Mat& y, const KernelSpec& spec, Scalar epsilon, int iters = 100);

// Reference-composed kernel: plans of both sets against each reference are
// glued into p * P(x,z) P(y,z)^T and averaged over references. Computing a
// whole Gram this way needs one plan per set, not per pair.
Scalar k_z(const Mat& x, const Mat& y, const std::vector<Mat>& refs, const KernelSpec& spec,
           Scalar epsilon, int iters = 100);

// 2-Wasserstein distance under the ground metric, entropic plan at epsilon > 0
// or the exact oracle at epsilon == 0.
Scalar w2_entropic(const Mat& x, const Mat& y, const GroundMetric& metric, Scalar epsilon,
                   int iters = 100);

// Surrogate distance through a reference: sqrt(<p P(x,z) P(y,z)^T, d^2(x,y)>).
Scalar w2_surrogate(const Mat& x, const Mat& y, const Mat& z, const GroundMetric& metric,
                    Scalar epsilon, int iters = 100);

struct BoundReport {
    int trials = 0;
    int pair_checks = 0;
    int violations = 0;
    Scalar max_pair_slack = -1e300;       // worst lhs - rhs for the pairwise bound
    Scalar max_aggregate_slack = -1e300;  // worst E^2 - rhs over the aggregate bounds
    Scalar max_plan_gap_fro = 0;          // worst |p P(x,z)P(y,z)^T - P(x,y)|_F, reported only
    bool ok = false;
};

// Oracle-mode sweep: random instances with n = p <= 6, exact plans, checking
// the pairwise surrogate bound and the aggregate mean-deviation bound for
// each requested reference count. Any violation beyond 1e-9 fails the report.
BoundReport verify_bounds(int trials, int m, const std::vector<int>& qs, Index n, Index d,
                          std::uint64_t seed);

enum class GramKind { k_ot, k_z, mean_pool, flatten };

struct GramMatrix {
    Mat values;
    GramKind kind = GramKind::k_ot;
    Scalar epsilon = 0;
};

// Pairwise kernel matrix over a list of sets (quadratic guard: m <= 2000).
// k_z needs the reference list; k_ot solves each unordered pair and fills the
// diagonal with the exact self-coupling limit (1/n) sum_i k(x_i, x_i), which
// is the epsilon -> 0 value and needs no solve.
GramMatrix gram(const std::vector<Mat>& sets, GramKind kind, const KernelSpec& spec,
                Scalar epsilon, int iters = 100, const std::vector<Mat>* refs = nullptr);

Scalar min_eigenvalue(const Mat& symmetric);

// Plain-text export: "# kind=<..> m=<..> epsilon=<..>" then comma-separated rows.
void write_gram_csv(const GramMatrix& gram, const std::string& path);

const char* gram_kind_name(GramKind kind);

}  // namespace otke
