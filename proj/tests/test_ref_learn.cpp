#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otke/ref_learn.hpp"
#include "otke/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace otke;

namespace {

std::vector<Mat> family(Rng& rng, const Mat& base, int count, Scalar spread) {
    std::vector<Mat> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(base + random_gaussian_matrix(rng, base.rows(), base.cols(), spread));
    }
    return out;
}

}  // namespace

TEST_CASE("a pool of exactly p points becomes the reference verbatim") {
    Mat points(3, 2);
    points << 0, 0, 1, 5, 2, -1;
    const ReferenceBank bank = fit_refs_kmeans({points}, 3, 1, 0);
    REQUIRE(bank.q() == 1);
    // Canonical order sorts on the first coordinate.
    CHECK((bank.refs[0].row(0) - points.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((bank.refs[0].row(1) - points.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((bank.refs[0].row(2) - points.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clustered pools recover blob means") {
    Rng rng(1);
    std::vector<Mat> members;
    for (int i = 0; i < 10; ++i) {
        Mat set(4, 2);
        set.topRows(2) = Mat::Constant(2, 2, 4.0) + random_gaussian_matrix(rng, 2, 2, 0.01);
        set.bottomRows(2) = Mat::Constant(2, 2, -4.0) + random_gaussian_matrix(rng, 2, 2, 0.01);
        members.push_back(set);
    }
    const ReferenceBank bank = fit_refs_kmeans(members, 2, 1, 3);
    CHECK((bank.refs[0].row(0) - Mat::Constant(1, 2, -4.0)).norm() < 0.1);
    CHECK((bank.refs[0].row(1) - Mat::Constant(1, 2, 4.0)).norm() < 0.1);
}

TEST_CASE("reference fitting demands enough pooled points") {
    CHECK_THROWS_AS(fit_refs_kmeans({Mat::Ones(2, 2)}, 5, 1, 0), InsufficientData);
}

TEST_CASE("a single member set is its own barycenter") {
    Rng rng(2);
    Mat member = 3.0 * random_gaussian_matrix(rng, 4, 3);
    BarycenterProblem problem;
    problem.member_sets = {member};
    problem.p = 4;
    problem.epsilon = 0.01;
    problem.inner_iters = 500;
    problem.outer_iters = 10;
    const WassersteinFitResult fit = fit_refs_wasserstein(problem, 1, 0);
    // Each support should sit on one member point.
    for (Index s = 0; s < 4; ++s) {
        Scalar best = 1e30;
        for (Index r = 0; r < 4; ++r) {
            best = std::min(best, (fit.bank.refs[0].row(s) - member.row(r)).norm());
        }
        CHECK(best < 1e-2);
    }
}

TEST_CASE("identical members do no worse than one member as the reference") {
    Rng rng(3);
    const Mat member = 2.0 * random_gaussian_matrix(rng, 4, 3);
    BarycenterProblem problem;
    problem.member_sets = {member, member, member};
    problem.p = 4;
    problem.epsilon = 0.01;
    problem.inner_iters = 400;
    problem.outer_iters = 5;
    const WassersteinFitResult fit = fit_refs_wasserstein(problem, 1, 1);
    Scalar fitted = 0, candidate = 0;
    for (const Mat& x : problem.member_sets) {
        fitted += entropic_w2_sq(x, fit.bank.refs[0], 0.01, 400);
        candidate += entropic_w2_sq(x, member, 0.01, 400);
    }
    CHECK(fitted <= candidate + 1e-6);
}

TEST_CASE("two well-separated families are assigned to their own references") {
    Rng rng(4);
    const Mat t1 = 3.0 * random_gaussian_matrix(rng, 5, 3);
    const Mat t2 = -3.0 * random_gaussian_matrix(rng, 5, 3) + Mat::Constant(5, 3, 6.0);
    std::vector<Mat> members = family(rng, t1, 6, 0.05);
    const std::vector<Mat> second = family(rng, t2, 6, 0.05);
    members.insert(members.end(), second.begin(), second.end());

    BarycenterProblem problem;
    problem.member_sets = members;
    problem.p = 5;
    problem.epsilon = 0.1;
    problem.inner_iters = 200;
    problem.outer_iters = 6;
    const WassersteinFitResult fit = fit_refs_wasserstein(problem, 2, 7);
    REQUIRE(fit.assignment.size() == 12);
    for (int i = 1; i < 6; ++i) {
        CHECK(fit.assignment[i] == fit.assignment[0]);
        CHECK(fit.assignment[6 + i] == fit.assignment[6]);
    }
    CHECK(fit.assignment[0] != fit.assignment[6]);
}

TEST_CASE("the monitored objective never increases across rounds") {
    Rng rng(5);
    std::vector<Mat> members;
    for (int i = 0; i < 8; ++i) members.push_back(random_gaussian_matrix(rng, 6, 3));
    BarycenterProblem problem;
    problem.member_sets = members;
    problem.p = 4;
    problem.epsilon = 0.2;
    problem.inner_iters = 200;
    problem.outer_iters = 8;
    const WassersteinFitResult fit = fit_refs_wasserstein(problem, 2, 9);
    for (std::size_t r = 1; r < fit.objective_trace.size(); ++r) {
        CHECK(fit.objective_trace[r] <= fit.objective_trace[r - 1] + 1e-8);
    }
}

TEST_CASE("degenerate duplicate members still fill every reference") {
    Rng rng(6);
    const Mat member = random_gaussian_matrix(rng, 4, 2);
    BarycenterProblem problem;
    problem.member_sets = {member, member};
    problem.p = 2;
    problem.epsilon = 0.5;
    problem.inner_iters = 50;
    problem.outer_iters = 3;
    const WassersteinFitResult fit = fit_refs_wasserstein(problem, 2, 11);
    CHECK(fit.bank.q() == 2);
    CHECK(fit.bank.refs[0].allFinite());
    CHECK(fit.bank.refs[1].allFinite());
}

TEST_CASE("fitting is deterministic under a fixed seed") {
    Rng rng(7);
    std::vector<Mat> members;
    for (int i = 0; i < 6; ++i) members.push_back(random_gaussian_matrix(rng, 5, 3));
    const ReferenceBank a = fit_refs_kmeans(members, 3, 2, 21);
    const ReferenceBank b = fit_refs_kmeans(members, 3, 2, 21);
    REQUIRE(a.q() == b.q());
    for (Index j = 0; j < a.q(); ++j) {
        CHECK((a.refs[j] - b.refs[j]).cwiseAbs().maxCoeff() == 0.0);
    }
    BarycenterProblem problem;
    problem.member_sets = members;
    problem.p = 3;
    const WassersteinFitResult wa = fit_refs_wasserstein(problem, 2, 22);
    const WassersteinFitResult wb = fit_refs_wasserstein(problem, 2, 22);
    CHECK(wa.assignment == wb.assignment);
    for (Index j = 0; j < 2; ++j) {
        CHECK((wa.bank.refs[j] - wb.bank.refs[j]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("self transport keeps the objective near zero") {
    Rng rng(8);
    const Mat x = 2.0 * random_gaussian_matrix(rng, 5, 3);
    ReferenceBank bank;
    bank.refs.push_back(x);
    const Vec obj = barycenter_objective(bank, {x}, 0.01, 800);
    const Scalar scale = (x * x.transpose()).diagonal().maxCoeff();
    CHECK(obj[0] >= 0.0);
    CHECK(obj[0] <= 1e-3 * scale);
}

TEST_CASE("translated members transport at the squared shift") {
    Rng rng(9);
    Mat x(4, 3);
    x << 0, 0, 0, 3, 0, 0, 0, 3, 0, 0, 0, 3;  // well separated points
    RowVec shift(3);
    shift << 0.2, -0.1, 0.2;
    Mat z = x;
    z.rowwise() -= shift;
    ReferenceBank bank;
    bank.refs.push_back(z);
    const Vec obj = barycenter_objective(bank, {x}, 0.01, 800);
    const Scalar expected = shift.squaredNorm();
    CHECK(std::abs(obj[0] - expected) <= 0.05 * expected);
}

TEST_CASE("barycenter objective rejects mismatched widths") {
    ReferenceBank bank;
    bank.refs.push_back(Mat::Ones(2, 3));
    CHECK_THROWS_AS(barycenter_objective(bank, {Mat::Ones(2, 4)}, 0.5, 10), DimensionMismatch);
}
