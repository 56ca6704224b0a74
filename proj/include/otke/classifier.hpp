#pragma once

#include "otke/types.hpp"

#include <vector>

namespace otke {

struct LinearClassifier {
    Mat W;     // C x D
    Vec bias;  // C
    Scalar lambda = 1e-4;  // L2 strength on W (bias unregularized)

    Index num_classes() const { return W.rows(); }
    Index input_dim() const { return W.cols(); }
    static LinearClassifier zeros(Index classes, Index dim, Scalar lambda);
    void validate() const;

    // N x C scores for N embedding rows.
    Mat logits(const Mat& embeddings) const;
};

// Mean cross entropy over rows plus (lambda/2) |W|^2.
Scalar cross_entropy_loss(const LinearClassifier& clf, const Mat& embeddings,
                          const std::vector<int>& labels);

struct GdReport {
    int iterations = 0;
    Scalar loss = 0;
    Scalar grad_norm = 0;
    std::vector<Scalar> loss_trace;
};

// Deterministic full-batch gradient descent with a fixed step below the
// curvature bound, stopping at the gradient-norm tolerance or the iteration
// cap. The step guarantee makes the loss non-increasing.
GdReport fit_classifier_gd(LinearClassifier& clf, const Mat& embeddings,
                           const std::vector<int>& labels, Scalar tol = 1e-6,
                           int max_iters = 2000);

}  // namespace otke
