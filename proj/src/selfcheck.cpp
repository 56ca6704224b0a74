#include "otke/selfcheck.hpp"

#include "otke/autodiff.hpp"
#include "otke/classifier.hpp"
#include "otke/data_io.hpp"
#include "otke/embedding.hpp"
#include "otke/exact_kernels.hpp"
#include "otke/kernels.hpp"
#include "otke/rng.hpp"
#include "otke/sinkhorn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace otke {

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

}  // namespace

SuiteResult check_sinkhorn_feasibility(int instances, std::uint64_t seed) {
    Stopwatch clock;
    Rng rng(seed);
    const Scalar eps_grid[3] = {0.1, 0.5, 1.0};
    Scalar worst_residual = 0;
    Scalar worst_gap = 0;
    for (int t = 0; t < instances; ++t) {
        const Index n = 2 + static_cast<Index>(rng.uniform_index(49));
        const Index p = 2 + static_cast<Index>(rng.uniform_index(19));
        const Scalar eps = eps_grid[t % 3];
        const CostContext ctx =
            CostContext::with_uniform_marginals(random_matrix(rng, n, p), eps);
        const TransportPlan log_plan = sinkhorn(ctx, 100, SinkhornMode::log_domain);
        const TransportPlan std_plan = sinkhorn(ctx, 100, SinkhornMode::standard);
        const auto [row, col] = marginal_residuals(log_plan, ctx.a, ctx.b);
        worst_residual = std::max({worst_residual, row, col});
        worst_gap = std::max(worst_gap, (log_plan.plan - std_plan.plan).cwiseAbs().maxCoeff());
    }
    SuiteResult out;
    out.name = "sinkhorn";
    out.pass = worst_residual <= 1e-6 && worst_gap <= 1e-10;
    out.detail = fmt("max_marginal_residual=%.3g max_mode_gap=%.3g", worst_residual, worst_gap);
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_kernel_identity(int trials, std::uint64_t seed) {
    Stopwatch clock;
    Rng rng(seed);
    Scalar worst = 0;
    for (int t = 0; t < trials; ++t) {
        const Index n = 2 + static_cast<Index>(rng.uniform_index(9));
        const Index np = 2 + static_cast<Index>(rng.uniform_index(9));
        const Index p = 2 + static_cast<Index>(rng.uniform_index(5));
        const Index k = 2 + static_cast<Index>(rng.uniform_index(5));
        const Mat x = random_gaussian_matrix(rng, n, k);
        const Mat y = random_gaussian_matrix(rng, np, k);
        ReferenceBank bank;
        bank.refs.push_back(random_gaussian_matrix(rng, p, k));
        bank.epsilon = 0.5;
        bank.sinkhorn_iters = 60;
        const Scalar lhs =
            embed_set(x, bank).flatten().dot(embed_set(y, bank).flatten());
        const Scalar rhs =
            k_z(x, y, bank.refs, KernelSpec::linear(), bank.epsilon, bank.sinkhorn_iters);
        const Scalar rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
        worst = std::max(worst, rel);
    }
    SuiteResult out;
    out.name = "kernel-identity";
    out.pass = worst <= 1e-10;
    out.detail = fmt("max_relative_gap=%.3g trials=%g", worst, trials);
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_lemma_bound(int trials, std::uint64_t seed) {
    Stopwatch clock;
    const GroundMetric metric{KernelSpec::gaussian(2.0)};
    Rng rng(seed);
    Scalar worst = -1e9;
    int violations = 0;
    for (int t = 0; t < trials; ++t) {
        const Index n = 2 + static_cast<Index>(rng.uniform_index(5));  // n = n' = p <= 6
        const Index d = 3;
        const Mat x = random_gaussian_matrix(rng, n, d);
        const Mat y = random_gaussian_matrix(rng, n, d);
        const Mat z = random_gaussian_matrix(rng, n, d);
        const Scalar w2 = w2_entropic(x, y, metric, 0.0);
        const Scalar wz = w2_surrogate(x, y, z, metric, 0.0);
        const Scalar rhs = 2.0 * std::min(w2_entropic(x, z, metric, 0.0),
                                          w2_entropic(y, z, metric, 0.0));
        const Scalar slack = std::abs(w2 - wz) - rhs;
        worst = std::max(worst, slack);
        if (slack > 1e-9) ++violations;
    }
    SuiteResult out;
    out.name = "lemma1";
    out.pass = violations == 0;
    out.detail = fmt("violations=%g max_slack=%.3g trials=%g", violations, worst, trials);
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_barycenter_bounds(int trials, std::uint64_t seed) {
    Stopwatch clock;
    const BoundReport report = verify_bounds(trials, 4, {1, 2}, 4, 3, seed);
    SuiteResult out;
    out.name = "barycenter-bounds";
    out.pass = report.ok;
    out.detail = fmt("violations=%g max_aggregate_slack=%.3g plan_gap_fro=%.3g",
                     report.violations, report.max_aggregate_slack, report.max_plan_gap_fro);
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_gradients(std::uint64_t seed) {
    Stopwatch clock;
    // Toy graph sized so every matrix block offers at least 50 coordinates.
    Rng rng(seed);
    const Index d = 8, k = 8, p = 7, n = 5, classes = 2;
    Dataset data;
    for (int i = 0; i < 2; ++i) {
        FeatureSet s;
        s.features = random_gaussian_matrix(rng, n, d);
        s.label = i % 2;
        data.samples.push_back(std::move(s));
        data.split.push_back(Split::train);
    }
    data.num_classes = 2;
    const PaddedBatch batch = make_batches(data, 2, seed, false).front();

    NystromMap map;
    map.anchors = random_gaussian_matrix(rng, k, d);
    map.spec = KernelSpec::gaussian(1.5);
    map.ridge = 1e-6;
    map.refresh();
    ReferenceBank bank;
    bank.refs.push_back(random_gaussian_matrix(rng, p, k, 0.3));
    bank.epsilon = 1.0;
    bank.sinkhorn_iters = 10;
    bank.sigma_pos = 0.7;
    LinearClassifier clf;
    clf.W = random_gaussian_matrix(rng, classes, p * k, 0.2);
    clf.bias = Vec::Zero(classes);
    clf.lambda = 1e-3;

    GradCheckConfig config;
    config.h = 1e-5;
    config.samples_per_block = 50;
    config.seed = seed;
    const Scalar worst = grad_check(batch, map, bank, clf, config);

    SuiteResult out;
    out.name = "gradcheck";
    out.pass = worst <= 1e-4;
    out.detail = fmt("max_rel_error=%.3g h=1e-5 iters=10", worst);
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_gram_psd_and_cost(int sets, std::uint64_t seed) {
    Stopwatch clock;
    Rng rng(seed);
    std::vector<Mat> samples;
    for (int i = 0; i < sets; ++i) {
        samples.push_back(random_gaussian_matrix(rng, 3 + rng.uniform_index(6), 4));
    }
    std::vector<Mat> refs{random_gaussian_matrix(rng, 4, 4)};

    reset_sinkhorn_solve_count();
    const GramMatrix gz = gram(samples, GramKind::k_z, KernelSpec::linear(), 0.5, 50, &refs);
    const std::uint64_t kz_solves = sinkhorn_solve_count();

    reset_sinkhorn_solve_count();
    const GramMatrix got = gram(samples, GramKind::k_ot, KernelSpec::gaussian(2.0), 0.5, 50);
    const std::uint64_t kot_solves = sinkhorn_solve_count();
    reset_sinkhorn_solve_count();

    const Scalar min_eig = min_eigenvalue(gz.values);
    const Scalar floor = -1e-8 * gz.values.trace() / static_cast<Scalar>(sets);
    const Scalar symmetry = (got.values - got.values.transpose()).cwiseAbs().maxCoeff();
    const std::uint64_t m = static_cast<std::uint64_t>(sets);

    SuiteResult out;
    out.name = "gram-psd-cost";
    out.pass = min_eig >= floor && kz_solves == m && kot_solves == m * (m - 1) / 2 &&
               symmetry <= 1e-12;
    out.detail = fmt("min_eig=%.3g kz_solves=%g kot_solves=%g", min_eig,
                     static_cast<double>(kz_solves), static_cast<double>(kot_solves));
    out.seconds = clock.seconds();
    return out;
}

SuiteResult check_multireference(std::uint64_t seed) {
    Stopwatch clock;
    Rng rng(seed);
    Scalar worst_energy = 0, worst_perm = 0, worst_pe = 0;
    for (int t = 0; t < 20; ++t) {
        const Index n = 3 + static_cast<Index>(rng.uniform_index(8));
        const Index p = 2 + static_cast<Index>(rng.uniform_index(4));
        const Index k = 3 + static_cast<Index>(rng.uniform_index(4));
        const Index q = 1 + static_cast<Index>(rng.uniform_index(3));
        const Mat x = random_gaussian_matrix(rng, n, k);
        ReferenceBank bank;
        for (Index j = 0; j < q; ++j) bank.refs.push_back(random_gaussian_matrix(rng, p, k));
        bank.epsilon = 0.5;
        bank.sinkhorn_iters = 50;

        // Energy split across references.
        const SetEmbedding joint = embed_set(x, bank);
        Scalar split = 0;
        for (Index j = 0; j < q; ++j) {
            ReferenceBank single;
            single.refs.push_back(bank.refs[j]);
            single.epsilon = bank.epsilon;
            single.sinkhorn_iters = bank.sinkhorn_iters;
            split += embed_set(x, single).squared_norm();
        }
        worst_energy = std::max(
            worst_energy, std::abs(joint.squared_norm() - split / static_cast<Scalar>(q)));

        // Row-permutation invariance without the positional factor.
        std::vector<Index> perm(n);
        for (Index i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        Mat shuffled(n, k);
        for (Index i = 0; i < n; ++i) shuffled.row(i) = x.row(perm[i]);
        worst_perm = std::max(worst_perm, (embed_set(shuffled, bank).flatten() -
                                           joint.flatten())
                                              .cwiseAbs()
                                              .maxCoeff());

        // A huge positional bandwidth matches no positional factor at all.
        ReferenceBank wide = bank;
        wide.sigma_pos = 1e6;
        worst_pe = std::max(worst_pe, (embed_set(x, wide).flatten() - joint.flatten())
                                          .cwiseAbs()
                                          .maxCoeff());
    }
    SuiteResult out;
    out.name = "multireference";
    out.pass = worst_energy <= 1e-12 && worst_perm <= 1e-12 && worst_pe <= 1e-8;
    out.detail = fmt("energy_gap=%.3g perm_gap=%.3g pe_gap=%.3g", worst_energy, worst_perm,
                     worst_pe);
    out.seconds = clock.seconds();
    return out;
}

std::vector<SuiteResult> run_all_checks() {
    return {check_sinkhorn_feasibility(), check_kernel_identity(),  check_lemma_bound(),
            check_barycenter_bounds(),    check_gradients(),        check_gram_psd_and_cost(),
            check_multireference()};
}

SuiteResult run_named_check(const std::string& suite, int trials) {
    if (suite == "sinkhorn") return check_sinkhorn_feasibility(trials > 0 ? trials : 200);
    if (suite == "identity") return check_kernel_identity(trials > 0 ? trials : 100);
    if (suite == "lemma1") return check_lemma_bound(trials > 0 ? trials : 100);
    if (suite == "bounds") return check_barycenter_bounds(trials > 0 ? trials : 20);
    if (suite == "gradcheck") return check_gradients();
    if (suite == "psd") return check_gram_psd_and_cost(trials > 0 ? trials : 50);
    if (suite == "multiref") return check_multireference();
    throw Error("unknown check suite: " + suite);
}

}  // namespace otke
