#include "otke/embedding.hpp"

#include "otke/parallel.hpp"

#include <cmath>

namespace otke {

void ReferenceBank::validate() const {
    if (refs.empty()) throw Error("reference bank: need at least one reference");
    for (const Mat& z : refs) {
        if (z.rows() != p() || z.cols() != dim()) {
            throw DimensionMismatch("reference bank: references must share one shape");
        }
        if (z.rows() < 1 || z.cols() < 1) throw Error("reference bank: empty reference");
    }
    if (!(epsilon > 0)) throw Error("reference bank: epsilon must be positive");
    if (sinkhorn_iters < 1) throw Error("reference bank: iteration count must be >= 1");
    if (sigma_pos && !(*sigma_pos > 0)) throw Error("reference bank: sigma_pos must be positive");
}

Vec SetEmbedding::flatten() const {
    Index total = 0;
    for (const Mat& m : per_ref) total += m.size();
    Vec out(total);
    Index at = 0;
    for (const Mat& m : per_ref) {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
        }
    }
    return out;
}

Scalar SetEmbedding::squared_norm() const {
    Scalar total = 0;
    for (const Mat& m : per_ref) total += m.squaredNorm();
    return total;
}

Mat position_matrix(Index n, Index p, Scalar sigma_pos) {
    if (n < 1 || p < 1) throw Error("position_matrix: sizes must be >= 1");
    if (!(sigma_pos > 0)) throw Error("position_matrix: sigma_pos must be positive");
    Mat s(n, p);
    const Scalar inv = 1.0 / (sigma_pos * sigma_pos);
    for (Index i = 0; i < n; ++i) {
        const Scalar ri = static_cast<Scalar>(i + 1) / static_cast<Scalar>(n);
        for (Index j = 0; j < p; ++j) {
            const Scalar rj = static_cast<Scalar>(j + 1) / static_cast<Scalar>(p);
            s(i, j) = std::exp(-(ri - rj) * (ri - rj) * inv);
        }
    }
    return s;
}

Mat pooling_weights(const Mat& features, const Mat& ref, const ReferenceBank& bank,
                    PoolingKind pooling) {
    if (features.rows() < 1) throw EmptySet("pooling_weights: empty feature set");
    if (features.cols() != ref.cols()) {
        throw DimensionMismatch("pooling_weights: feature width does not match references");
    }
    const Mat similarity = features * ref.transpose();
    const Index n = features.rows();
    const Index p = ref.rows();

    Mat weights;
    if (pooling == PoolingKind::ot) {
        weights = sinkhorn(CostContext::with_uniform_marginals(similarity, bank.epsilon),
                           bank.sinkhorn_iters)
                      .plan;
    } else {
        // Column softmax of K / epsilon, scaled to the plan's column mass 1/p.
        weights.resize(n, p);
        const Mat scaled = similarity / bank.epsilon;
        for (Index j = 0; j < p; ++j) {
            const Scalar m = scaled.col(j).maxCoeff();
            Vec e = (scaled.col(j).array() - m).exp();
            weights.col(j) = e / (e.sum() * static_cast<Scalar>(p));
        }
    }
    if (bank.sigma_pos) weights = weights.cwiseProduct(position_matrix(n, p, *bank.sigma_pos));
    return weights;
}

namespace {

SetEmbedding embed_with(const Mat& features, const ReferenceBank& bank, PoolingKind pooling) {
    bank.validate();
    const Scalar scale =
        std::sqrt(static_cast<Scalar>(bank.p())) / std::sqrt(static_cast<Scalar>(bank.q()));
    SetEmbedding out;
    out.per_ref.reserve(bank.refs.size());
    for (const Mat& z : bank.refs) {
        const Mat weights = pooling_weights(features, z, bank, pooling);
        out.per_ref.push_back(scale * (weights.transpose() * features));
    }
    return out;
}

}  // namespace

SetEmbedding embed_set(const Mat& features, const ReferenceBank& bank) {
    return embed_with(features, bank, bank.pooling);
}

SetEmbedding dot_product_pool(const Mat& features, const ReferenceBank& bank) {
    return embed_with(features, bank, PoolingKind::dot_product);
}

std::vector<SetEmbedding> embed_batch(const PaddedBatch& batch, const NystromMap& nystrom,
                                      const ReferenceBank& bank) {
    std::vector<SetEmbedding> out(batch.lengths.size());
    parallel_for(batch.lengths.size(), [&](std::size_t i) {
        if (batch.lengths[i] < 1) {
            throw EmptySet("embed_batch: sample " + std::to_string(i) + " is empty");
        }
        out[i] = embed_set(embed_features(nystrom, batch.sample(static_cast<Index>(i))), bank);
    });
    return out;
}

std::vector<Mat> attention_scores(const Mat& features, const ReferenceBank& bank) {
    bank.validate();
    std::vector<Mat> out;
    out.reserve(bank.refs.size());
    for (const Mat& z : bank.refs) {
        const Mat weights = pooling_weights(features, z, bank, bank.pooling);
        out.push_back(weights * weights.transpose());
    }
    return out;
}

}  // namespace otke
