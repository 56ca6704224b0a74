#include "otke/kernels.hpp"

#include "otke/clustering.hpp"
#include "otke/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_set>

namespace otke {

void KernelSpec::validate() const {
    if (kind == KernelKind::gaussian && !(bandwidth > 0)) {
        throw Error("kernel: gaussian bandwidth must be positive");
    }
}

Mat kernel_eval(const KernelSpec& spec, const Mat& X, const Mat& Y) {
    spec.validate();
    if (X.cols() != Y.cols()) throw DimensionMismatch("kernel_eval: feature widths differ");
    if (spec.kind == KernelKind::linear) return X * Y.transpose();
    Mat d2 = -2.0 * X * Y.transpose();
    d2.colwise() += X.rowwise().squaredNorm();
    d2.rowwise() += Y.rowwise().squaredNorm().transpose();
    return (d2.cwiseMax(0.0) / (-2.0 * spec.bandwidth * spec.bandwidth)).array().exp();
}

Mat inv_sqrt_psd(const Mat& A, Scalar ridge) {
    if (A.rows() != A.cols()) throw DimensionMismatch("inv_sqrt_psd: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success) throw NonFinite("inv_sqrt_psd: eigendecomposition failed");
    Vec scale = es.eigenvalues().cwiseMax(ridge).cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
}

void NystromMap::refresh() { whitener = inv_sqrt_psd(kernel_eval(spec, anchors, anchors), ridge); }

namespace {

Index count_distinct_rows(const Mat& m) {
    std::unordered_set<std::string> seen;
    std::string key(static_cast<std::size_t>(m.cols()) * sizeof(Scalar), '\0');
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            std::memcpy(key.data() + static_cast<std::size_t>(j) * sizeof(Scalar), &m(i, j),
                        sizeof(Scalar));
        }
        seen.insert(key);
    }
    return static_cast<Index>(seen.size());
}

}  // namespace

NystromMap fit_nystrom(const Mat& features, Index k, const KernelSpec& spec, AnchorMethod method,
                       std::uint64_t seed, Scalar ridge) {
    spec.validate();
    if (k < 1) throw Error("fit_nystrom: k must be >= 1");
    if (features.rows() < k || count_distinct_rows(features) < k) {
        throw InsufficientData("fit_nystrom: need at least k distinct feature vectors");
    }

    NystromMap map;
    map.spec = spec;
    map.ridge = ridge;
    if (method == AnchorMethod::kmeans) {
        map.anchors = kmeans(features, k, seed).centroids;
    } else {
        Rng rng(seed);
        std::vector<Index> order(features.rows());
        std::iota(order.begin(), order.end(), Index{0});
        rng.shuffle(order);
        map.anchors.resize(k, features.cols());
        for (Index i = 0; i < k; ++i) map.anchors.row(i) = features.row(order[i]);
    }
    map.refresh();
    return map;
}

Mat embed_features(const NystromMap& map, const Mat& X) {
    if (X.cols() != map.input_dim()) {
        throw DimensionMismatch("embed_features: input width does not match anchors");
    }
    return kernel_eval(map.spec, X, map.anchors) * map.whitener;
}

Mat kmer_features(const std::string& sequence, const std::vector<char>& alphabet, int kmer_size) {
    if (kmer_size < 1) throw Error("kmer_features: kmer size must be >= 1");
    if (static_cast<int>(sequence.size()) < kmer_size) {
        throw SequenceTooShort("kmer_features: sequence shorter than kmer size");
    }
    int lookup[256];
    std::fill(std::begin(lookup), std::end(lookup), -1);
    for (std::size_t i = 0; i < alphabet.size(); ++i) {
        lookup[static_cast<unsigned char>(alphabet[i])] = static_cast<int>(i);
    }
    const Index a = static_cast<Index>(alphabet.size());
    const Index n = static_cast<Index>(sequence.size()) - kmer_size + 1;
    Mat out = Mat::Zero(n, a * kmer_size);
    const Scalar unit = 1.0 / std::sqrt(static_cast<Scalar>(kmer_size));
    for (Index t = 0; t < n; ++t) {
        for (int j = 0; j < kmer_size; ++j) {
            const char c = sequence[static_cast<std::size_t>(t) + j];
            const int idx = lookup[static_cast<unsigned char>(c)];
            if (idx < 0) {
                throw UnknownToken(std::string("kmer_features: token '") + c + "' at position " +
                                   std::to_string(t + j) + " not in alphabet");
            }
            out(t, static_cast<Index>(j) * a + idx) = unit;
        }
    }
    return out;
}

}  // namespace otke
