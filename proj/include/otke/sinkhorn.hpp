#pragma once

#include "otke/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace otke {

enum class SinkhornMode { standard, log_domain };

// Inputs of one entropic transport problem. `similarity` is the n x p matrix
// of kernel values; the transport cost is its negation.
struct CostContext {
    Mat similarity;
    Scalar epsilon = 1.0;
    Vec a;  // row marginal, on the simplex
    Vec b;  // column marginal, on the simplex

    static CostContext with_uniform_marginals(Mat similarity, Scalar epsilon);
    void validate() const;
};

struct TransportPlan {
    Mat plan;
    Scalar epsilon = 0.0;
    int iterations_run = 0;
};

// Scaling vectors of the final iterate: diag(u) exp(K/eps) diag(v) is the
// returned plan. The log-domain potentials are eps * log(u), eps * log(v).
struct ScalingState {
    Vec u;
    Vec v;
};

// Runs a fixed number of alternating scaling updates
//   u <- a / (E v),  v <- b / (E^T u),   E = exp(K / epsilon),
// starting from v = 1, and returns diag(u) E diag(v). The log-domain mode
// computes the same values through log-sum-exp scalings and stays finite for
// small epsilon where the standard form under- or overflows.
TransportPlan sinkhorn(const CostContext& ctx, int iters,
                       SinkhornMode mode = SinkhornMode::log_domain,
                       ScalingState* scalings = nullptr);

// Batched solve over a stacked (batch * n_max) x p similarity block with
// per-sample valid lengths. Rows past each sample's length are padding; the
// returned plans keep the n_max x p shape with padded rows exactly zero.
std::vector<TransportPlan> sinkhorn_batched(const Mat& batch_similarity, Index n_max,
                                            const std::vector<Index>& lengths, Scalar epsilon,
                                            int iters,
                                            SinkhornMode mode = SinkhornMode::log_domain);

// Exhaustive assignment solver for square costs with uniform marginals
// (the extreme points of the polytope are the permutation matrices, so the
// optimum is (1/n) times the best permutation). Restricted to n <= 8; ties
// resolve to the lexicographically smallest permutation.
struct BruteForceResult {
    Mat plan;
    Scalar objective = 0.0;
    std::vector<Index> permutation;
};
BruteForceResult exact_ot_bruteforce(const Mat& cost);

// Diagnostic (max row residual, max column residual) against target marginals.
std::pair<Scalar, Scalar> marginal_residuals(const TransportPlan& plan, const Vec& a, const Vec& b);

// Number of Sinkhorn solves since the last reset; exposed so that Gram
// assembly cost claims can be asserted.
std::uint64_t sinkhorn_solve_count();
void reset_sinkhorn_solve_count();

}  // namespace otke
