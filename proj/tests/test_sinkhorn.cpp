#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otke/rng.hpp"
#include "otke/sinkhorn.hpp"

#include <cmath>

using namespace otke;

namespace {

// Stationary diagonal value of the symmetric 2x2 problem with unit diagonal
// similarity: solves log(t / (1/2 - t)) = 1/eps by bisection.
Scalar two_by_two_diagonal(Scalar eps) {
    Scalar lo = 1e-12, hi = 0.5 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        const Scalar mid = 0.5 * (lo + hi);
        (std::log(mid / (0.5 - mid)) < 1.0 / eps ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

CostContext identity_context(Scalar eps) {
    Mat k(2, 2);
    k << 1, 0, 0, 1;
    return CostContext::with_uniform_marginals(k, eps);
}

}  // namespace

TEST_CASE("constant similarity yields the independent coupling") {
    const CostContext ctx = CostContext::with_uniform_marginals(Mat::Constant(3, 2, 0.7), 1.0);
    for (const SinkhornMode mode : {SinkhornMode::standard, SinkhornMode::log_domain}) {
        const TransportPlan plan = sinkhorn(ctx, 100, mode);
        CHECK((plan.plan.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-12);
        CHECK(plan.iterations_run == 100);
    }
}

TEST_CASE("symmetric 2x2 problem matches the scalar stationarity equation") {
    const Scalar t = two_by_two_diagonal(1.0);
    CHECK(t == doctest::Approx(0.36552).epsilon(1e-4));
    const TransportPlan plan = sinkhorn(identity_context(1.0), 200, SinkhornMode::standard);
    CHECK(std::abs(plan.plan(0, 0) - t) < 1e-9);
    CHECK(std::abs(plan.plan(1, 1) - t) < 1e-9);
    CHECK(std::abs(plan.plan(0, 1) - (0.5 - t)) < 1e-9);
}

TEST_CASE("small epsilon approaches the exact assignment") {
    const TransportPlan plan = sinkhorn(identity_context(0.001), 200, SinkhornMode::log_domain);
    Mat k(2, 2);
    k << 1, 0, 0, 1;
    const BruteForceResult exact = exact_ot_bruteforce(-k);
    CHECK((plan.plan - exact.plan).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(exact.plan(0, 0) == 0.5);
    CHECK(exact.plan(1, 1) == 0.5);
}

TEST_CASE("batch of one equals the unbatched solve") {
    Rng rng(3);
    const Mat k = random_matrix(rng, 4, 3);
    const TransportPlan single = sinkhorn(CostContext::with_uniform_marginals(k, 0.5), 50);
    const auto batched = sinkhorn_batched(k, 4, {4}, 0.5, 50);
    REQUIRE(batched.size() == 1);
    CHECK((batched[0].plan - single.plan).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("padded batch matches trimmed solves and zeroes padding") {
    Rng rng(4);
    const Index n_max = 8;
    Mat block = Mat::Zero(2 * n_max, 5);
    const Mat k0 = random_matrix(rng, 3, 5);
    const Mat k1 = random_matrix(rng, 5, 5);
    block.topRows(3) = k0;
    block.middleRows(n_max, 5) = k1;
    const auto batched = sinkhorn_batched(block, n_max, {3, 5}, 0.5, 80);
    const TransportPlan p0 = sinkhorn(CostContext::with_uniform_marginals(k0, 0.5), 80);
    const TransportPlan p1 = sinkhorn(CostContext::with_uniform_marginals(k1, 0.5), 80);
    CHECK((batched[0].plan.topRows(3) - p0.plan).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batched[1].plan.topRows(5) - p1.plan).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(batched[0].plan.bottomRows(n_max - 3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(batched[1].plan.bottomRows(n_max - 5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-length sample in a batch is rejected") {
    const Mat block = Mat::Zero(4, 2);
    CHECK_THROWS_AS(sinkhorn_batched(block, 4, {0}, 0.5, 10), DimensionMismatch);
}

TEST_CASE("assignment oracle: ties break to the lexicographically smallest permutation") {
    const BruteForceResult r = exact_ot_bruteforce(Mat::Zero(2, 2));
    CHECK(r.objective == 0.0);
    CHECK(r.permutation == std::vector<Index>{0, 1});
}

TEST_CASE("assignment oracle: anti-diagonal cost picks the identity") {
    Mat cost(2, 2);
    cost << 0, 1, 1, 0;
    const BruteForceResult r = exact_ot_bruteforce(cost);
    CHECK(r.objective == 0.0);
    CHECK(r.plan(0, 0) == 0.5);
    CHECK(r.plan(1, 1) == 0.5);
    CHECK(r.plan(0, 1) == 0.0);
}

TEST_CASE("assignment oracle lower-bounds the entropic objective") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat cost = random_matrix(rng, 5, 5);
        const BruteForceResult exact = exact_ot_bruteforce(cost);
        const Scalar eps = 0.01;
        const TransportPlan plan = sinkhorn(CostContext::with_uniform_marginals(-cost, eps), 2000);
        const Scalar entropic_cost = plan.plan.cwiseProduct(cost).sum();
        CHECK(exact.objective <= entropic_cost + 5 * eps);
    }
}

TEST_CASE("assignment oracle rejects large and non-square inputs") {
    CHECK_THROWS_AS(exact_ot_bruteforce(Mat::Zero(9, 9)), TooLarge);
    CHECK_THROWS_AS(exact_ot_bruteforce(Mat::Zero(2, 3)), DimensionMismatch);
}

TEST_CASE("marginals are feasible after 100 iterations for moderate epsilon") {
    Rng rng(7);
    for (const Scalar eps : {0.1, 0.5, 1.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Index n = 2 + static_cast<Index>(rng.uniform_index(30));
            const Index p = 2 + static_cast<Index>(rng.uniform_index(15));
            const CostContext ctx =
                CostContext::with_uniform_marginals(random_matrix(rng, n, p), eps);
            const TransportPlan plan = sinkhorn(ctx, 100);
            const auto [row, col] = marginal_residuals(plan, ctx.a, ctx.b);
            CHECK(row <= 1e-6);
            CHECK(col <= 1e-6);
        }
    }
}

TEST_CASE("marginal violation is monotone over iterations") {
    Rng rng(8);
    const CostContext ctx = CostContext::with_uniform_marginals(random_matrix(rng, 6, 4), 0.3);
    Scalar prev_col = 1e30, prev_row = 1e30;
    for (int iters = 1; iters <= 15; ++iters) {
        const TransportPlan plan = sinkhorn(ctx, iters);
        const auto [row, col] = marginal_residuals(plan, ctx.a, ctx.b);
        CHECK(col <= prev_col + 1e-14);
        CHECK(row <= prev_row + 1e-14);
        prev_col = col;
        prev_row = row;
    }
}

TEST_CASE("standard and log-domain modes agree where both stay finite") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const CostContext ctx = CostContext::with_uniform_marginals(
            random_matrix(rng, 3 + trial % 5, 2 + trial % 4), 0.1 + 0.1 * (trial % 9));
        const TransportPlan a = sinkhorn(ctx, 100, SinkhornMode::standard);
        const TransportPlan b = sinkhorn(ctx, 100, SinkhornMode::log_domain);
        CHECK((a.plan - b.plan).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("permuting similarity rows permutes the plan rows") {
    Rng rng(10);
    const Mat k = random_matrix(rng, 5, 3);
    Mat permuted(5, 3);
    const Index perm[5] = {3, 0, 4, 1, 2};
    for (Index i = 0; i < 5; ++i) permuted.row(i) = k.row(perm[i]);
    const Mat base = sinkhorn(CostContext::with_uniform_marginals(k, 0.5), 100).plan;
    const Mat moved = sinkhorn(CostContext::with_uniform_marginals(permuted, 0.5), 100).plan;
    for (Index i = 0; i < 5; ++i) {
        CHECK((moved.row(i) - base.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("huge epsilon collapses to the independent coupling") {
    Rng rng(11);
    const CostContext ctx = CostContext::with_uniform_marginals(random_matrix(rng, 6, 4), 100.0);
    const TransportPlan plan = sinkhorn(ctx, 100);
    const Mat outer = ctx.a * ctx.b.transpose();
    CHECK((plan.plan - outer).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("standard mode reports overflow as NonFinite") {
    Rng rng(12);
    const CostContext ctx = CostContext::with_uniform_marginals(random_matrix(rng, 4, 3), 1e-4);
    CHECK_THROWS_AS(sinkhorn(ctx, 10, SinkhornMode::standard), NonFinite);
    CHECK_NOTHROW(sinkhorn(ctx, 10, SinkhornMode::log_domain));
}

TEST_CASE("shape and marginal validation") {
    CostContext ctx = CostContext::with_uniform_marginals(Mat::Ones(3, 2), 1.0);
    ctx.a = Vec::Ones(4) / 4;
    CHECK_THROWS_AS(sinkhorn(ctx, 10), DimensionMismatch);
    ctx = CostContext::with_uniform_marginals(Mat::Ones(3, 2), 1.0);
    ctx.b[0] += 0.5;
    CHECK_THROWS_AS(sinkhorn(ctx, 10), Error);
}

TEST_CASE("returned scalings factor the plan in both modes") {
    Rng rng(13);
    const CostContext ctx = CostContext::with_uniform_marginals(random_matrix(rng, 5, 3), 0.4);
    const Mat gibbs = (ctx.similarity / ctx.epsilon).array().exp();
    for (const SinkhornMode mode : {SinkhornMode::standard, SinkhornMode::log_domain}) {
        ScalingState scalings;
        const TransportPlan plan = sinkhorn(ctx, 60, mode, &scalings);
        const Mat rebuilt = scalings.u.asDiagonal() * gibbs * scalings.v.asDiagonal();
        CHECK((rebuilt - plan.plan).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(scalings.u.minCoeff() > 0.0);
        CHECK(scalings.v.minCoeff() > 0.0);
    }
}

TEST_CASE("solve counter counts sinkhorn calls") {
    reset_sinkhorn_solve_count();
    const CostContext ctx = CostContext::with_uniform_marginals(Mat::Ones(2, 2), 1.0);
    sinkhorn(ctx, 5);
    sinkhorn(ctx, 5);
    CHECK(sinkhorn_solve_count() == 2);
    reset_sinkhorn_solve_count();
}
