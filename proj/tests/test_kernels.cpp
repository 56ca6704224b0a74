#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otke/clustering.hpp"
#include "otke/exact_kernels.hpp"
#include "otke/kernels.hpp"
#include "otke/rng.hpp"

#include <cmath>

using namespace otke;

TEST_CASE("gaussian kernel is one on coincident points") {
    Rng rng(1);
    const Mat x = random_gaussian_matrix(rng, 4, 3);
    const Mat k = kernel_eval(KernelSpec::gaussian(0.8), x, x);
    CHECK((k.diagonal().array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("linear kernel of orthogonal rows vanishes") {
    Mat x(2, 2);
    x << 1, 0, 0, 1;
    const Mat k = kernel_eval(KernelSpec::linear(), x, x);
    CHECK(k(0, 1) == 0.0);
    CHECK(k(1, 0) == 0.0);
}

TEST_CASE("gaussian value at unit distance and bandwidth one half") {
    Mat x(1, 2), y(1, 2);
    x << 0, 0;
    y << 1, 0;
    const Mat k = kernel_eval(KernelSpec::gaussian(0.5), x, y);
    CHECK(k(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("kernel_eval rejects mismatched widths") {
    CHECK_THROWS_AS(kernel_eval(KernelSpec::linear(), Mat::Ones(2, 3), Mat::Ones(2, 4)),
                    DimensionMismatch);
}

TEST_CASE("feature map is exact when every point is an anchor") {
    Rng rng(2);
    const Index n = 6;
    const Mat x = random_gaussian_matrix(rng, n, 3);
    const KernelSpec spec = KernelSpec::gaussian(1.5);
    const NystromMap map = fit_nystrom(x, n, spec, AnchorMethod::random, 0);
    const Mat psi = embed_features(map, x);
    const Mat gram = psi * psi.transpose();
    const Mat exact = kernel_eval(spec, x, x);
    CHECK((gram - exact).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("single gaussian anchor reduces the map to the kernel slice") {
    Rng rng(3);
    const Mat w = random_gaussian_matrix(rng, 1, 3);
    const Mat x = random_gaussian_matrix(rng, 5, 3);
    const KernelSpec spec = KernelSpec::gaussian(1.0);
    NystromMap map;
    map.anchors = w;
    map.spec = spec;
    map.ridge = 1e-6;
    map.refresh();
    const Mat psi = embed_features(map, x);
    const Mat direct = kernel_eval(spec, x, w);
    CHECK((psi - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("orthonormal anchors under the linear kernel whiten to the identity") {
    Mat w(2, 2);
    w << 1, 0, 0, 1;
    NystromMap map;
    map.anchors = w;
    map.spec = KernelSpec::linear();
    map.ridge = 1e-6;
    map.refresh();
    CHECK((map.whitener - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("embedding the anchors reproduces their kernel matrix") {
    Rng rng(4);
    const Mat w = random_gaussian_matrix(rng, 4, 4);
    NystromMap map;
    map.anchors = w;
    map.spec = KernelSpec::linear();
    map.ridge = 1e-9;
    map.refresh();
    const Mat psi = embed_features(map, w);
    CHECK((psi * psi.transpose() - kernel_eval(map.spec, w, w)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero vector maps to zero under the linear kernel") {
    Rng rng(5);
    NystromMap map;
    map.anchors = random_gaussian_matrix(rng, 3, 3);
    map.spec = KernelSpec::linear();
    map.ridge = 1e-6;
    map.refresh();
    const Mat psi = embed_features(map, Mat::Zero(1, 3));
    CHECK(psi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian feature rows stay inside the unit ball") {
    Rng rng(6);
    const Mat pool = random_gaussian_matrix(rng, 40, 4);
    const NystromMap map = fit_nystrom(pool, 8, KernelSpec::gaussian(1.2), AnchorMethod::kmeans, 0);
    const Mat psi = embed_features(map, random_gaussian_matrix(rng, 30, 4));
    CHECK(psi.rowwise().norm().maxCoeff() <= 1.0 + 1e-6);
}

TEST_CASE("linear feature map is positively homogeneous") {
    Rng rng(7);
    NystromMap map;
    map.anchors = random_gaussian_matrix(rng, 3, 4);
    map.spec = KernelSpec::linear();
    map.ridge = 1e-9;
    map.refresh();
    const Mat x = random_gaussian_matrix(rng, 5, 4);
    const Mat a = embed_features(map, 2.5 * x);
    const Mat b = 2.5 * embed_features(map, x);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("feature Gram matrices are positive semidefinite") {
    Rng rng(8);
    const Mat pool = random_gaussian_matrix(rng, 30, 3);
    const NystromMap map = fit_nystrom(pool, 6, KernelSpec::gaussian(1.0), AnchorMethod::kmeans, 1);
    const Mat psi = embed_features(map, random_gaussian_matrix(rng, 20, 3));
    CHECK(min_eigenvalue(psi * psi.transpose()) >= -1e-8);
}

TEST_CASE("approximation error shrinks as anchors grow") {
    Rng rng(9);
    const Index n = 24;
    const Mat x = random_gaussian_matrix(rng, n, 3);
    const KernelSpec spec = KernelSpec::gaussian(1.5);
    const Mat exact = kernel_eval(spec, x, x);
    auto worst_error = [&](Index k) {
        const NystromMap map = fit_nystrom(x, k, spec, AnchorMethod::kmeans, 3);
        const Mat psi = embed_features(map, x);
        return (psi * psi.transpose() - exact).cwiseAbs().maxCoeff();
    };
    const Scalar coarse = worst_error(4);
    const Scalar full = worst_error(n);
    CHECK(full < 1e-8);
    CHECK(full <= coarse);
}

TEST_CASE("insufficient distinct points are rejected") {
    Mat pool(4, 2);
    pool << 1, 2, 1, 2, 1, 2, 1, 2;
    CHECK_THROWS_AS(fit_nystrom(pool, 2, KernelSpec::linear(), AnchorMethod::random, 0),
                    InsufficientData);
}

TEST_CASE("kmer rows are one-hot for unit windows") {
    const Mat f = kmer_features("AB", {'A', 'B'}, 1);
    REQUIRE(f.rows() == 2);
    CHECK(f(0, 0) == 1.0);
    CHECK(f(0, 1) == 0.0);
    CHECK(f(1, 0) == 0.0);
    CHECK(f(1, 1) == 1.0);
}

TEST_CASE("repeated characters give identical kmer rows") {
    const Mat f = kmer_features("AAA", {'A', 'B'}, 2);
    REQUIRE(f.rows() == 2);
    CHECK((f.row(0) - f.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kmer windows hold k normalized entries") {
    const Mat f = kmer_features("ABAB", {'A', 'B'}, 2);
    REQUIRE(f.rows() == 3);
    REQUIRE(f.cols() == 4);
    for (Index i = 0; i < 3; ++i) {
        Index nonzero = 0;
        for (Index j = 0; j < 4; ++j) {
            if (f(i, j) != 0.0) {
                ++nonzero;
                CHECK(f(i, j) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
            }
        }
        CHECK(nonzero == 2);
    }
}

TEST_CASE("kmer errors: unknown token and short sequence") {
    CHECK_THROWS_AS(kmer_features("AxB", {'A', 'B'}, 1), UnknownToken);
    CHECK_THROWS_AS(kmer_features("AB", {'A', 'B'}, 3), SequenceTooShort);
}

TEST_CASE("kmeans recovers well-separated blobs") {
    Rng rng(10);
    Mat points(40, 2);
    for (Index i = 0; i < 20; ++i) {
        points.row(i) = Mat::Constant(1, 2, 5.0) + random_gaussian_matrix(rng, 1, 2, 0.01);
    }
    for (Index i = 20; i < 40; ++i) {
        points.row(i) = Mat::Constant(1, 2, -5.0) + random_gaussian_matrix(rng, 1, 2, 0.01);
    }
    const KmeansResult r = kmeans(points, 2, 0);
    CHECK((r.centroids.row(0) - Mat::Constant(1, 2, -5.0)).norm() < 0.1);
    CHECK((r.centroids.row(1) - Mat::Constant(1, 2, 5.0)).norm() < 0.1);
}

TEST_CASE("kmeans inertia is non-increasing and identical points collapse") {
    Rng rng(11);
    const Mat points = random_gaussian_matrix(rng, 50, 3);
    const KmeansResult r = kmeans(points, 5, 7);
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
        CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-12);
    }
    const KmeansResult same = kmeans(Mat::Ones(10, 2), 3, 0);
    CHECK(same.inertia_trace.back() == 0.0);
    CHECK((same.centroids.row(0) - same.centroids.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kmeans is deterministic under a fixed seed") {
    Rng rng(12);
    const Mat points = random_gaussian_matrix(rng, 60, 4);
    const KmeansResult a = kmeans(points, 6, 99);
    const KmeansResult b = kmeans(points, 6, 99);
    CHECK((a.centroids - b.centroids).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.assignment == b.assignment);
}
