#include "otke/ref_learn.hpp"

#include "otke/clustering.hpp"
#include "otke/rng.hpp"

#include <algorithm>
#include <numeric>

namespace otke {

namespace {

Mat squared_distance_matrix(const Mat& X, const Mat& Y) {
    Mat d2 = -2.0 * X * Y.transpose();
    d2.colwise() += X.rowwise().squaredNorm();
    d2.rowwise() += Y.rowwise().squaredNorm().transpose();
    return d2.cwiseMax(0.0);
}

Mat stack(const std::vector<Mat>& sets, const std::vector<Index>* pick = nullptr) {
    Index rows = 0;
    if (pick) {
        for (Index i : *pick) rows += sets[i].rows();
    } else {
        for (const Mat& s : sets) rows += s.rows();
    }
    Mat pool(rows, sets.front().cols());
    Index at = 0;
    auto append = [&](const Mat& s) {
        pool.middleRows(at, s.rows()) = s;
        at += s.rows();
    };
    if (pick) {
        for (Index i : *pick) append(sets[i]);
    } else {
        for (const Mat& s : sets) append(s);
    }
    return pool;
}

// A p-support summary of one member set, used to seed centroids.
Mat seed_centroid(const Mat& member, Index p, std::uint64_t seed) {
    if (member.rows() >= p) return kmeans(member, p, seed).centroids;
    // Fewer points than supports: cycle through the rows.
    Mat out(p, member.cols());
    for (Index r = 0; r < p; ++r) out.row(r) = member.row(r % member.rows());
    return out;
}

void check_members(const std::vector<Mat>& member_sets) {
    if (member_sets.empty()) throw InsufficientData("ref_learn: no member sets");
    for (const Mat& s : member_sets) {
        if (s.rows() < 1) throw EmptySet("ref_learn: empty member set");
        if (s.cols() != member_sets.front().cols()) {
            throw DimensionMismatch("ref_learn: member feature widths differ");
        }
    }
}

}  // namespace

void BarycenterProblem::validate() const {
    check_members(member_sets);
    if (p < 1) throw Error("ref_learn: p must be >= 1");
    if (!(epsilon > 0)) throw Error("ref_learn: epsilon must be positive");
    if (inner_iters < 1 || outer_iters < 1) throw Error("ref_learn: iteration counts must be >= 1");
}

Scalar entropic_w2_sq(const Mat& set, const Mat& supports, Scalar epsilon, int iters) {
    const Mat d2 = squared_distance_matrix(set, supports);
    const Mat plan = sinkhorn(CostContext::with_uniform_marginals(-d2, epsilon), iters).plan;
    return plan.cwiseProduct(d2).sum();
}

ReferenceBank fit_refs_kmeans(const std::vector<Mat>& member_sets, Index p, Index q,
                              std::uint64_t seed, Scalar epsilon, int inner_iters) {
    check_members(member_sets);
    if (p < 1 || q < 1) throw Error("fit_refs_kmeans: p and q must be >= 1");

    ReferenceBank bank;
    bank.epsilon = epsilon;
    bank.sinkhorn_iters = inner_iters;

    if (q == 1) {
        const Mat pool = stack(member_sets);
        if (pool.rows() < p) throw InsufficientData("fit_refs_kmeans: pool smaller than p");
        bank.refs.push_back(kmeans(pool, p, seed).centroids);
        return bank;
    }

    if (static_cast<Index>(member_sets.size()) < q) {
        throw InsufficientData("fit_refs_kmeans: fewer member sets than references");
    }
    // One round of W2 assignment against q seed centroids, then per-group
    // feature-level K-means.
    Rng rng(seed);
    std::vector<Index> order(member_sets.size());
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    std::vector<Mat> centroids(q);
    for (Index c = 0; c < q; ++c) {
        centroids[c] = seed_centroid(member_sets[order[c]], p, Rng::mix(seed, c));
    }
    std::vector<std::vector<Index>> groups(q);
    for (std::size_t i = 0; i < member_sets.size(); ++i) {
        Index arg = 0;
        Scalar best = entropic_w2_sq(member_sets[i], centroids[0], epsilon, inner_iters);
        for (Index c = 1; c < q; ++c) {
            const Scalar cost = entropic_w2_sq(member_sets[i], centroids[c], epsilon, inner_iters);
            if (cost < best) {
                best = cost;
                arg = c;
            }
        }
        groups[arg].push_back(static_cast<Index>(i));
    }
    for (Index c = 0; c < q; ++c) {
        if (groups[c].empty()) {
            // Borrow the largest group's farthest member.
            Index big = static_cast<Index>(std::max_element(groups.begin(), groups.end(),
                                                            [](const auto& a, const auto& b) {
                                                                return a.size() < b.size();
                                                            }) -
                                           groups.begin());
            Index far = groups[big].front();
            Scalar far_cost = -1;
            for (Index i : groups[big]) {
                const Scalar cost =
                    entropic_w2_sq(member_sets[i], centroids[big], epsilon, inner_iters);
                if (cost > far_cost) {
                    far_cost = cost;
                    far = i;
                }
            }
            groups[big].erase(std::find(groups[big].begin(), groups[big].end(), far));
            groups[c].push_back(far);
        }
        const Mat pool = stack(member_sets, &groups[c]);
        if (pool.rows() < p) throw InsufficientData("fit_refs_kmeans: group pool smaller than p");
        bank.refs.push_back(kmeans(pool, p, Rng::mix(seed, 1000 + c)).centroids);
    }
    return bank;
}

WassersteinFitResult fit_refs_wasserstein(const BarycenterProblem& problem, Index q,
                                          std::uint64_t seed) {
    problem.validate();
    if (q < 1) throw Error("fit_refs_wasserstein: q must be >= 1");
    const auto& members = problem.member_sets;
    const Index m = static_cast<Index>(members.size());
    if (m < q) throw InsufficientData("fit_refs_wasserstein: fewer member sets than references");

    Rng rng(seed);
    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    std::vector<Mat> centroids(q);
    for (Index c = 0; c < q; ++c) {
        centroids[c] = seed_centroid(members[order[c]], problem.p, Rng::mix(seed, c));
    }

    WassersteinFitResult out;
    out.assignment.assign(m, 0);
    std::vector<Mat> plans(m);  // plan against the assigned centroid
    for (int round = 0; round < problem.outer_iters; ++round) {
        // Assignment sweep; keep the winning plan for the update step.
        Scalar objective = 0;
        std::vector<std::vector<Index>> groups(q);
        for (Index i = 0; i < m; ++i) {
            Index arg = 0;
            Scalar best = 0;
            Mat best_plan;
            for (Index c = 0; c < q; ++c) {
                const Mat d2 = squared_distance_matrix(members[i], centroids[c]);
                const Mat plan =
                    sinkhorn(CostContext::with_uniform_marginals(-d2, problem.epsilon),
                             problem.inner_iters)
                        .plan;
                const Scalar cost = plan.cwiseProduct(d2).sum();
                if (c == 0 || cost < best) {
                    best = cost;
                    arg = c;
                    best_plan = plan;
                }
            }
            out.assignment[i] = arg;
            plans[i] = std::move(best_plan);
            objective += best;
            groups[arg].push_back(i);
        }
        out.objective_trace.push_back(objective);

        for (Index c = 0; c < q; ++c) {
            if (!groups[c].empty()) continue;
            Index big = static_cast<Index>(std::max_element(groups.begin(), groups.end(),
                                                            [](const auto& a, const auto& b) {
                                                                return a.size() < b.size();
                                                            }) -
                                           groups.begin());
            Index far = groups[big].front();
            Scalar far_cost = -1;
            for (Index i : groups[big]) {
                const Scalar cost = entropic_w2_sq(members[i], centroids[big], problem.epsilon,
                                                   problem.inner_iters);
                if (cost > far_cost) {
                    far_cost = cost;
                    far = i;
                }
            }
            groups[big].erase(std::find(groups[big].begin(), groups[big].end(), far));
            groups[c].push_back(far);
            out.assignment[far] = c;
            const Mat d2 = squared_distance_matrix(members[far], centroids[c]);
            plans[far] = sinkhorn(CostContext::with_uniform_marginals(-d2, problem.epsilon),
                                  problem.inner_iters)
                             .plan;
        }

        // Free-support update: each support moves to the transport-weighted
        // mean of the points sent to it.
        for (Index c = 0; c < q; ++c) {
            Mat weighted = Mat::Zero(problem.p, members.front().cols());
            Vec mass = Vec::Zero(problem.p);
            for (Index i : groups[c]) {
                weighted += plans[i].transpose() * members[i];
                mass += plans[i].colwise().sum().transpose();
            }
            for (Index s = 0; s < problem.p; ++s) {
                if (mass[s] > 0) centroids[c].row(s) = weighted.row(s) / mass[s];
            }
        }
    }

    out.bank.refs = std::move(centroids);
    out.bank.epsilon = problem.epsilon;
    out.bank.sinkhorn_iters = problem.inner_iters;
    return out;
}

Vec barycenter_objective(const ReferenceBank& bank, const std::vector<Mat>& member_sets,
                         Scalar epsilon, int iters) {
    bank.validate();
    check_members(member_sets);
    if (member_sets.front().cols() != bank.dim()) {
        throw DimensionMismatch("barycenter_objective: feature width does not match references");
    }
    Vec out(bank.q());
    for (Index c = 0; c < bank.q(); ++c) {
        Scalar total = 0;
        for (const Mat& member : member_sets) {
            total += entropic_w2_sq(member, bank.refs[c], epsilon, iters);
        }
        out[c] = total / static_cast<Scalar>(member_sets.size());
    }
    return out;
}

}  // namespace otke
