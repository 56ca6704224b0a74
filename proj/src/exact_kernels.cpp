#include "otke/exact_kernels.hpp"

#include "otke/parallel.hpp"
#include "otke/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace otke {

Mat GroundMetric::squared_distance(const Mat& X, const Mat& Y) const {
    const Mat cross = kernel_eval(spec, X, Y);
    const Vec dx = kernel_eval(spec, X, X).diagonal();
    const Vec dy = kernel_eval(spec, Y, Y).diagonal();
    Mat d2 = -2.0 * cross;
    d2.colwise() += dx;
    d2.rowwise() += dy.transpose();
    return d2.cwiseMax(0.0);
}

namespace {

void require_nonempty(const Mat& x, const Mat& y, const char* where) {
    if (x.rows() < 1 || y.rows() < 1) throw EmptySet(std::string(where) + ": empty set");
    if (x.cols() != y.cols()) throw DimensionMismatch(std::string(where) + ": widths differ");
}

// Plan minimizing <cost, P>: entropic at epsilon > 0, exact assignment at 0.
Mat min_cost_plan(const Mat& cost, Scalar epsilon, int iters) {
    if (epsilon == 0) {
        if (cost.rows() != cost.cols()) {
            throw TooLarge("exact plan: the zero-epsilon oracle needs square sets");
        }
        return exact_ot_bruteforce(cost).plan;
    }
    return sinkhorn(CostContext::with_uniform_marginals(-cost, epsilon), iters).plan;
}

bool transpose_is_smaller(const Mat& c) {
    for (Index i = 0; i < c.rows(); ++i) {
        for (Index j = 0; j < c.cols(); ++j) {
            if (c(i, j) != c(j, i)) return c(j, i) < c(i, j);
        }
    }
    return false;
}

}  // namespace

Scalar k_ot(const Mat& x, const Mat& y, const KernelSpec& spec, Scalar epsilon, int iters) {
    require_nonempty(x, y, "k_ot");
    const Mat similarity = kernel_eval(spec, x, y);
    const Mat plan = min_cost_plan(-similarity, epsilon, iters);
    return plan.cwiseProduct(similarity).sum();
}

Scalar k_z(const Mat& x, const Mat& y, const std::vector<Mat>& refs, const KernelSpec& spec,
           Scalar epsilon, int iters) {
    require_nonempty(x, y, "k_z");
    if (refs.empty()) throw Error("k_z: need at least one reference");
    const Mat cross = kernel_eval(spec, x, y);
    Scalar total = 0;
    for (const Mat& z : refs) {
        if (z.cols() != x.cols()) throw DimensionMismatch("k_z: reference width differs");
        const Mat px = min_cost_plan(-kernel_eval(spec, x, z), epsilon, iters);
        const Mat py = min_cost_plan(-kernel_eval(spec, y, z), epsilon, iters);
        total += static_cast<Scalar>(z.rows()) * (px.transpose() * cross * py).trace();
    }
    return total / static_cast<Scalar>(refs.size());
}

Scalar w2_entropic(const Mat& x, const Mat& y, const GroundMetric& metric, Scalar epsilon,
                   int iters) {
    require_nonempty(x, y, "w2_entropic");
    // Orientation is canonicalized so that w2(x, y) and w2(y, x) run the same
    // finite-iteration solve and agree exactly.
    const bool swap = x.rows() != y.rows()
                          ? x.rows() > y.rows()
                          : transpose_is_smaller(metric.squared_distance(x, y));
    const Mat& lhs = swap ? y : x;
    const Mat& rhs = swap ? x : y;
    const Mat d2 = metric.squared_distance(lhs, rhs);
    const Mat plan = min_cost_plan(d2, epsilon, iters);
    return std::sqrt(std::max<Scalar>(0.0, plan.cwiseProduct(d2).sum()));
}

Scalar w2_surrogate(const Mat& x, const Mat& y, const Mat& z, const GroundMetric& metric,
                    Scalar epsilon, int iters) {
    require_nonempty(x, y, "w2_surrogate");
    if (z.cols() != x.cols()) throw DimensionMismatch("w2_surrogate: reference width differs");
    const Mat px = min_cost_plan(metric.squared_distance(x, z), epsilon, iters);
    const Mat py = min_cost_plan(metric.squared_distance(y, z), epsilon, iters);
    const Mat d2 = metric.squared_distance(x, y);
    const Scalar value = static_cast<Scalar>(z.rows()) * (px.transpose() * d2 * py).trace();
    return std::sqrt(std::max<Scalar>(0.0, value));
}

BoundReport verify_bounds(int trials, int m, const std::vector<int>& qs, Index n, Index d,
                          std::uint64_t seed) {
    if (n > 6) throw TooLarge("verify_bounds: oracle mode needs n <= 6");
    if (trials < 1 || m < 2) throw Error("verify_bounds: need trials >= 1 and m >= 2");
    const GroundMetric metric{KernelSpec::gaussian(2.0)};
    constexpr Scalar kSlack = 1e-9;

    BoundReport report;
    report.trials = trials;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        std::vector<Mat> samples(m);
        for (auto& s : samples) s = random_gaussian_matrix(rng, n, d);
        const int q_max = *std::max_element(qs.begin(), qs.end());
        std::vector<Mat> refs(q_max);
        for (auto& z : refs) z = random_gaussian_matrix(rng, n, d);

        Mat w2(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = i; j < m; ++j) {
                w2(i, j) = w2(j, i) = w2_entropic(samples[i], samples[j], metric, 0.0);
            }
        }
        Mat w2_to_ref(m, q_max);
        for (int i = 0; i < m; ++i) {
            for (int r = 0; r < q_max; ++r) {
                w2_to_ref(i, r) = w2_entropic(samples[i], refs[r], metric, 0.0);
            }
        }

        std::vector<Mat> surrogate_sq(q_max, Mat(m, m));
        for (int r = 0; r < q_max; ++r) {
            for (int i = 0; i < m; ++i) {
                for (int j = i; j < m; ++j) {
                    const Scalar wz = w2_surrogate(samples[i], samples[j], refs[r], metric, 0.0);
                    surrogate_sq[r](i, j) = surrogate_sq[r](j, i) = wz * wz;

                    const Scalar lhs = std::abs(w2(i, j) - wz);
                    const Scalar rhs = 2.0 * std::min(w2_to_ref(i, r), w2_to_ref(j, r));
                    report.max_pair_slack = std::max(report.max_pair_slack, lhs - rhs);
                    ++report.pair_checks;
                    if (lhs - rhs > kSlack) ++report.violations;

                    // Diagnostic only: how far the glued plan sits from the direct one.
                    const Mat px =
                        min_cost_plan(metric.squared_distance(samples[i], refs[r]), 0.0, 0);
                    const Mat py =
                        min_cost_plan(metric.squared_distance(samples[j], refs[r]), 0.0, 0);
                    const Mat direct =
                        min_cost_plan(metric.squared_distance(samples[i], samples[j]), 0.0, 0);
                    const Scalar gap =
                        (static_cast<Scalar>(n) * px * py.transpose() - direct).norm();
                    report.max_plan_gap_fro = std::max(report.max_plan_gap_fro, gap);
                }
            }
        }

        for (int q : qs) {
            Scalar err_sq = 0;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) {
                    Scalar mean_sq = 0;
                    for (int rr = 0; rr < q; ++rr) mean_sq += surrogate_sq[rr](i, j);
                    const Scalar w2q = std::sqrt(mean_sq / q);
                    err_sq += (w2(i, j) - w2q) * (w2(i, j) - w2q);
                }
            }
            err_sq /= static_cast<Scalar>(m) * static_cast<Scalar>(m);
            Scalar rhs = 0;
            for (int i = 0; i < m; ++i) {
                for (int rr = 0; rr < q; ++rr) rhs += w2_to_ref(i, rr) * w2_to_ref(i, rr);
            }
            rhs *= 4.0 / (static_cast<Scalar>(m) * q);
            report.max_aggregate_slack = std::max(report.max_aggregate_slack, err_sq - rhs);
            if (err_sq - rhs > kSlack) ++report.violations;
        }
    }
    report.ok = report.violations == 0;
    return report;
}

GramMatrix gram(const std::vector<Mat>& sets, GramKind kind, const KernelSpec& spec,
                Scalar epsilon, int iters, const std::vector<Mat>* refs) {
    const Index m = static_cast<Index>(sets.size());
    if (m < 1) throw EmptyDataset("gram: no sets");
    if (m > 2000) throw TooLarge("gram: m > 2000");
    for (const Mat& s : sets) {
        if (s.rows() < 1) throw EmptySet("gram: empty set");
        if (s.cols() != sets.front().cols()) throw DimensionMismatch("gram: widths differ");
    }

    GramMatrix out;
    out.kind = kind;
    out.epsilon = epsilon;
    out.values.resize(m, m);

    switch (kind) {
        case GramKind::k_ot: {
            for (Index i = 0; i < m; ++i) {
                out.values(i, i) = kernel_eval(spec, sets[i], sets[i]).diagonal().mean();
            }
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
                for (Index j = static_cast<Index>(i) + 1; j < m; ++j) {
                    out.values(i, j) = k_ot(sets[i], sets[j], spec, epsilon, iters);
                }
            });
            for (Index i = 0; i < m; ++i) {
                for (Index j = i + 1; j < m; ++j) out.values(j, i) = out.values(i, j);
            }
            break;
        }
        case GramKind::k_z: {
            if (refs == nullptr || refs->empty()) throw Error("gram: k_z needs references");
            const Index q = static_cast<Index>(refs->size());
            const Index p = refs->front().rows();
            std::vector<std::vector<Mat>> plans(m, std::vector<Mat>(q));
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
                for (Index r = 0; r < q; ++r) {
                    plans[i][r] =
                        min_cost_plan(-kernel_eval(spec, sets[i], (*refs)[r]), epsilon, iters);
                }
            });
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
                for (Index j = static_cast<Index>(i); j < m; ++j) {
                    const Mat cross = kernel_eval(spec, sets[i], sets[j]);
                    Scalar total = 0;
                    for (Index r = 0; r < q; ++r) {
                        total += static_cast<Scalar>(p) *
                                 (plans[i][r].transpose() * cross * plans[j][r]).trace();
                    }
                    out.values(i, j) = total / static_cast<Scalar>(q);
                }
            });
            for (Index i = 0; i < m; ++i) {
                for (Index j = i + 1; j < m; ++j) out.values(j, i) = out.values(i, j);
            }
            break;
        }
        case GramKind::mean_pool: {
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
                for (Index j = static_cast<Index>(i); j < m; ++j) {
                    out.values(i, j) = kernel_eval(spec, sets[i], sets[j]).mean();
                }
            });
            for (Index i = 0; i < m; ++i) {
                for (Index j = i + 1; j < m; ++j) out.values(j, i) = out.values(i, j);
            }
            break;
        }
        case GramKind::flatten: {
            for (const Mat& s : sets) {
                if (s.size() != sets.front().size()) {
                    throw DimensionMismatch("gram: flatten needs equal-size sets");
                }
            }
            Mat flat(m, sets.front().size());
            for (Index i = 0; i < m; ++i) {
                Index at = 0;
                for (Index r = 0; r < sets[i].rows(); ++r) {
                    for (Index c = 0; c < sets[i].cols(); ++c) flat(i, at++) = sets[i](r, c);
                }
            }
            out.values = flat * flat.transpose();
            break;
        }
    }
    return out;
}

Scalar min_eigenvalue(const Mat& symmetric) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

const char* gram_kind_name(GramKind kind) {
    switch (kind) {
        case GramKind::k_ot: return "k_ot";
        case GramKind::k_z: return "k_z";
        case GramKind::mean_pool: return "mean_pool";
        case GramKind::flatten: return "flatten";
    }
    return "?";
}

void write_gram_csv(const GramMatrix& gram, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_gram_csv: cannot open " + path);
    char buf[40];
    out << "# kind=" << gram_kind_name(gram.kind) << " m=" << gram.values.rows();
    std::snprintf(buf, sizeof(buf), "%.17g", gram.epsilon);
    out << " epsilon=" << buf << '\n';
    for (Index i = 0; i < gram.values.rows(); ++i) {
        for (Index j = 0; j < gram.values.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", gram.values(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace otke
