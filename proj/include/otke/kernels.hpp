#pragma once

#include "otke/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace otke {

enum class KernelKind { gaussian, linear };

struct KernelSpec {
    KernelKind kind = KernelKind::gaussian;
    Scalar bandwidth = 1.0;  // gaussian only

    static KernelSpec gaussian(Scalar bandwidth) { return {KernelKind::gaussian, bandwidth}; }
    static KernelSpec linear() { return {KernelKind::linear, 0.0}; }
    void validate() const;
};

// Pairwise kernel values: gaussian exp(-|x - y|^2 / (2 sigma^2)) or plain dot
// products. X is n x d, Y is m x d, result n x m.
Mat kernel_eval(const KernelSpec& spec, const Mat& X, const Mat& Y);

// Inverse square root of a symmetric PSD matrix, eigenvalues clamped from
// below at `ridge` so near-null directions do not blow up.
Mat inv_sqrt_psd(const Mat& A, Scalar ridge);

// Finite-dimensional feature map psi(x) = kappa(w, w)^{-1/2} kappa(w, x)
// built on k anchor rows w.
struct NystromMap {
    Mat anchors;   // k x d
    KernelSpec spec;
    Mat whitener;  // k x k, symmetric
    Scalar ridge = 1e-6;

    Index dim() const { return anchors.rows(); }
    Index input_dim() const { return anchors.cols(); }
    // Recompute the whitener from the current anchors (after anchor updates).
    void refresh();
};

enum class AnchorMethod { random, kmeans };

NystromMap fit_nystrom(const Mat& features, Index k, const KernelSpec& spec, AnchorMethod method,
                       std::uint64_t seed, Scalar ridge = 1e-6);

// Rows are psi(x_i) for the rows of X.
Mat embed_features(const NystromMap& map, const Mat& X);

// Sliding-window one-hot encoding of a token string; rows L2-normalized.
// Output is (len - kmer_size + 1) x (alphabet size * kmer_size).
Mat kmer_features(const std::string& sequence, const std::vector<char>& alphabet, int kmer_size);

}  // namespace otke
