#include "otke/sinkhorn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

namespace otke {

namespace {

std::atomic<std::uint64_t> g_solve_count{0};

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

// log(sum_j exp(x_j)) with the max subtracted; rows that are all -inf stay -inf.
Vec log_sum_exp_rows(const Mat& x) {
    Vec out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const Scalar m = x.row(i).maxCoeff();
        if (!std::isfinite(m)) {
            out[i] = m;
            continue;
        }
        out[i] = m + std::log((x.row(i).array() - m).exp().sum());
    }
    return out;
}

Vec log_sum_exp_cols(const Mat& x) {
    Vec out(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const Scalar m = x.col(j).maxCoeff();
        if (!std::isfinite(m)) {
            out[j] = m;
            continue;
        }
        out[j] = m + std::log((x.col(j).array() - m).exp().sum());
    }
    return out;
}

Vec safe_log(const Vec& v) {
    Vec out(v.size());
    for (Index i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? std::log(v[i]) : kNegInf;
    return out;
}

TransportPlan sinkhorn_standard(const CostContext& ctx, int iters, ScalingState* scalings) {
    const Index n = ctx.similarity.rows();
    const Index p = ctx.similarity.cols();
    const Mat E = (ctx.similarity / ctx.epsilon).array().exp();
    Vec v = Vec::Ones(p);
    Vec u(n);
    for (int l = 0; l < iters; ++l) {
        const Vec row_scale = E * v;
        for (Index i = 0; i < n; ++i) u[i] = ctx.a[i] == 0 ? 0.0 : ctx.a[i] / row_scale[i];
        const Vec col_scale = E.transpose() * u;
        for (Index j = 0; j < p; ++j) v[j] = ctx.b[j] == 0 ? 0.0 : ctx.b[j] / col_scale[j];
        if (!u.allFinite() || !v.allFinite()) {
            throw NonFinite("sinkhorn: standard-mode scaling became non-finite; "
                            "rerun in log_domain mode");
        }
    }
    TransportPlan out;
    out.plan = u.asDiagonal() * E * v.asDiagonal();
    out.epsilon = ctx.epsilon;
    out.iterations_run = iters;
    if (!out.plan.allFinite()) {
        throw NonFinite("sinkhorn: standard-mode plan became non-finite; "
                        "rerun in log_domain mode");
    }
    if (scalings != nullptr) {
        scalings->u = std::move(u);
        scalings->v = std::move(v);
    }
    return out;
}

TransportPlan sinkhorn_log_domain(const CostContext& ctx, int iters, ScalingState* scalings) {
    const Index n = ctx.similarity.rows();
    const Index p = ctx.similarity.cols();
    const Mat scaled = ctx.similarity / ctx.epsilon;
    const Vec log_a = safe_log(ctx.a);
    const Vec log_b = safe_log(ctx.b);
    Vec log_v = Vec::Zero(p);
    Vec log_u(n);
    for (int l = 0; l < iters; ++l) {
        log_u = log_a - log_sum_exp_rows(scaled + Vec::Ones(n) * log_v.transpose());
        log_v = log_b - log_sum_exp_cols(scaled + log_u * Vec::Ones(p).transpose());
    }
    TransportPlan out;
    out.plan = (scaled + log_u * Vec::Ones(p).transpose() + Vec::Ones(n) * log_v.transpose())
                   .array()
                   .exp();
    out.epsilon = ctx.epsilon;
    out.iterations_run = iters;
    if (!out.plan.allFinite()) throw NonFinite("sinkhorn: log-domain plan became non-finite");
    if (scalings != nullptr) {
        scalings->u = log_u.array().exp();
        scalings->v = log_v.array().exp();
    }
    return out;
}

}  // namespace

CostContext CostContext::with_uniform_marginals(Mat similarity, Scalar epsilon) {
    CostContext ctx;
    ctx.a = Vec::Constant(similarity.rows(), 1.0 / static_cast<Scalar>(similarity.rows()));
    ctx.b = Vec::Constant(similarity.cols(), 1.0 / static_cast<Scalar>(similarity.cols()));
    ctx.similarity = std::move(similarity);
    ctx.epsilon = epsilon;
    return ctx;
}

void CostContext::validate() const {
    if (similarity.rows() < 1 || similarity.cols() < 1) {
        throw DimensionMismatch("sinkhorn: similarity matrix must be nonempty");
    }
    if (a.size() != similarity.rows() || b.size() != similarity.cols()) {
        throw DimensionMismatch("sinkhorn: marginal lengths do not match similarity shape");
    }
    if (!(epsilon > 0)) throw Error("sinkhorn: epsilon must be positive");
    if (!similarity.allFinite()) throw NonFinite("sinkhorn: similarity matrix has non-finite entries");
    for (const Vec* m : {&a, &b}) {
        if ((m->array() < 0).any()) throw Error("sinkhorn: marginals must be nonnegative");
        if (std::abs(m->sum() - 1.0) > 1e-12) throw Error("sinkhorn: marginals must sum to 1");
    }
}

TransportPlan sinkhorn(const CostContext& ctx, int iters, SinkhornMode mode,
                       ScalingState* scalings) {
    ctx.validate();
    if (iters < 1) throw Error("sinkhorn: iteration count must be >= 1");
    g_solve_count.fetch_add(1, std::memory_order_relaxed);
    return mode == SinkhornMode::standard ? sinkhorn_standard(ctx, iters, scalings)
                                          : sinkhorn_log_domain(ctx, iters, scalings);
}

std::vector<TransportPlan> sinkhorn_batched(const Mat& batch_similarity, Index n_max,
                                            const std::vector<Index>& lengths, Scalar epsilon,
                                            int iters, SinkhornMode mode) {
    if (n_max < 1 || batch_similarity.rows() != n_max * static_cast<Index>(lengths.size())) {
        throw DimensionMismatch("sinkhorn_batched: block shape does not match n_max and batch size");
    }
    const Index p = batch_similarity.cols();
    std::vector<TransportPlan> out(lengths.size());
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        const Index n = lengths[s];
        if (n < 1 || n > n_max) {
            throw DimensionMismatch("sinkhorn_batched: sample " + std::to_string(s) +
                                    " has invalid length " + std::to_string(n));
        }
        CostContext ctx = CostContext::with_uniform_marginals(
            batch_similarity.middleRows(static_cast<Index>(s) * n_max, n), epsilon);
        TransportPlan trimmed = sinkhorn(ctx, iters, mode);
        out[s].plan = Mat::Zero(n_max, p);
        out[s].plan.topRows(n) = trimmed.plan;
        out[s].epsilon = epsilon;
        out[s].iterations_run = iters;
    }
    return out;
}

BruteForceResult exact_ot_bruteforce(const Mat& cost) {
    const Index n = cost.rows();
    if (cost.cols() != n) throw DimensionMismatch("exact_ot_bruteforce: cost must be square");
    if (n < 1) throw DimensionMismatch("exact_ot_bruteforce: cost must be nonempty");
    if (n > 8) throw TooLarge("exact_ot_bruteforce: n > 8");

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<Index> best = perm;
    Scalar best_total = std::numeric_limits<Scalar>::infinity();
    do {
        Scalar total = 0;
        for (Index i = 0; i < n; ++i) total += cost(i, perm[i]);
        if (total < best_total) {  // strict: keeps the lexicographically first minimizer
            best_total = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    BruteForceResult out;
    out.plan = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i) out.plan(i, best[i]) = 1.0 / static_cast<Scalar>(n);
    out.objective = best_total / static_cast<Scalar>(n);
    out.permutation = std::move(best);
    return out;
}

std::pair<Scalar, Scalar> marginal_residuals(const TransportPlan& plan, const Vec& a, const Vec& b) {
    if (plan.plan.rows() != a.size() || plan.plan.cols() != b.size()) {
        throw DimensionMismatch("marginal_residuals: marginal lengths do not match the plan");
    }
    const Scalar row = (plan.plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
    const Scalar col = (plan.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
    return {row, col};
}

std::uint64_t sinkhorn_solve_count() { return g_solve_count.load(std::memory_order_relaxed); }

void reset_sinkhorn_solve_count() { g_solve_count.store(0, std::memory_order_relaxed); }

}  // namespace otke
