#include "otke/classifier.hpp"

#include <cmath>

namespace otke {

LinearClassifier LinearClassifier::zeros(Index classes, Index dim, Scalar lambda) {
    LinearClassifier clf;
    clf.W = Mat::Zero(classes, dim);
    clf.bias = Vec::Zero(classes);
    clf.lambda = lambda;
    return clf;
}

void LinearClassifier::validate() const {
    if (W.rows() < 2) throw Error("classifier: need at least two classes");
    if (bias.size() != W.rows()) throw DimensionMismatch("classifier: bias length != classes");
    if (!W.allFinite() || !bias.allFinite()) throw NonFinite("classifier: non-finite parameters");
    if (lambda < 0) throw Error("classifier: lambda must be nonnegative");
}

Mat LinearClassifier::logits(const Mat& embeddings) const {
    if (embeddings.cols() != W.cols()) {
        throw DimensionMismatch("classifier: embedding width does not match weights");
    }
    Mat out = embeddings * W.transpose();
    out.rowwise() += bias.transpose();
    return out;
}

namespace {

// Row-wise log softmax normalizers.
Vec row_lse(const Mat& logits) {
    Vec out(logits.rows());
    for (Index i = 0; i < logits.rows(); ++i) {
        const Scalar m = logits.row(i).maxCoeff();
        out[i] = m + std::log((logits.row(i).array() - m).exp().sum());
    }
    return out;
}

Scalar loss_of(const Mat& logits, const Vec& lse, const std::vector<int>& labels, Scalar lambda,
               const Mat& W) {
    Scalar total = 0;
    for (Index i = 0; i < logits.rows(); ++i) total += lse[i] - logits(i, labels[i]);
    return total / static_cast<Scalar>(logits.rows()) + 0.5 * lambda * W.squaredNorm();
}

}  // namespace

Scalar cross_entropy_loss(const LinearClassifier& clf, const Mat& embeddings,
                          const std::vector<int>& labels) {
    const Mat logits = clf.logits(embeddings);
    return loss_of(logits, row_lse(logits), labels, clf.lambda, clf.W);
}

GdReport fit_classifier_gd(LinearClassifier& clf, const Mat& embeddings,
                           const std::vector<int>& labels, Scalar tol, int max_iters) {
    clf.validate();
    if (embeddings.rows() != static_cast<Index>(labels.size())) {
        throw DimensionMismatch("fit_classifier_gd: label count != embedding rows");
    }
    if (embeddings.rows() < 1) throw EmptyDataset("fit_classifier_gd: no rows");
    const Index n = embeddings.rows();
    const Index c = clf.num_classes();

    // Augment with a ones column so the bias shares the same update.
    Mat x(n, embeddings.cols() + 1);
    x.leftCols(embeddings.cols()) = embeddings;
    x.col(embeddings.cols()).setOnes();

    // Softmax curvature is at most 1/2, so the loss Hessian is bounded by
    // (1/2n) X^T X + lambda; a power iteration bounds the top eigenvalue.
    Vec pw = Vec::Ones(x.cols()).normalized();
    Scalar top = 1;
    for (int it = 0; it < 40; ++it) {
        pw = (x.transpose() * (x * pw)).eval();
        top = pw.norm();
        if (top == 0) break;
        pw /= top;
    }
    const Scalar step = 1.0 / (0.5 * top * 1.05 / static_cast<Scalar>(n) + clf.lambda + 1e-12);

    Mat wb(c, x.cols());
    wb.leftCols(embeddings.cols()) = clf.W;
    wb.col(embeddings.cols()) = clf.bias;

    GdReport report;
    for (int it = 0; it < max_iters; ++it) {
        Mat logits = x * wb.transpose();
        const Vec lse = row_lse(logits);
        Scalar data_loss = 0;
        for (Index i = 0; i < n; ++i) data_loss += lse[i] - logits(i, labels[i]);
        report.loss_trace.push_back(data_loss / static_cast<Scalar>(n) +
                                    0.5 * clf.lambda *
                                        wb.leftCols(embeddings.cols()).squaredNorm());
        // softmax(logits) - one_hot(labels), in place
        for (Index i = 0; i < n; ++i) {
            logits.row(i) = (logits.row(i).array() - lse[i]).exp();
            logits(i, labels[i]) -= 1.0;
        }
        Mat grad = (logits.transpose() * x) / static_cast<Scalar>(n);
        grad.leftCols(embeddings.cols()) += clf.lambda * wb.leftCols(embeddings.cols());

        report.grad_norm = grad.norm();
        report.iterations = it;
        if (report.grad_norm <= tol) break;
        wb -= step * grad;
    }

    clf.W = wb.leftCols(embeddings.cols());
    clf.bias = wb.col(embeddings.cols());
    report.loss = cross_entropy_loss(clf, embeddings, labels);
    return report;
}

}  // namespace otke
