#pragma once

#include "otke/data_io.hpp"
#include "otke/kernels.hpp"
#include "otke/sinkhorn.hpp"
#include "otke/types.hpp"

#include <optional>
#include <vector>

namespace otke {

enum class PoolingKind { ot, dot_product };

// Trainable pooling supports. Each reference z^j is a p x k matrix in the
// embedded feature space; plans against it use the linear similarity on psi
// features with uniform marginals.
struct ReferenceBank {
    std::vector<Mat> refs;
    Scalar epsilon = 0.5;
    int sinkhorn_iters = 100;
    std::optional<Scalar> sigma_pos;
    PoolingKind pooling = PoolingKind::ot;

    Index q() const { return static_cast<Index>(refs.size()); }
    Index p() const { return refs.empty() ? 0 : refs.front().rows(); }
    Index dim() const { return refs.empty() ? 0 : refs.front().cols(); }
    Index flat_size() const { return q() * p() * dim(); }
    void validate() const;
};

// Pooled representation: one p x k slab per reference, already carrying the
// sqrt(p) and 1/sqrt(q) scalings.
struct SetEmbedding {
    std::vector<Mat> per_ref;

    Vec flatten() const;  // row-major per slab, slabs concatenated
    Scalar squared_norm() const;
};

// S_ij = exp(-(i/n - j/p)^2 / sigma^2) with 1-based indices.
Mat position_matrix(Index n, Index p, Scalar sigma_pos);

// Alignment weights of `features` against one reference: either the entropic
// transport plan, or the column-softmax surrogate scaled so each column sums
// to 1/p (matching the plan's column marginal). The positional factor, when
// set, multiplies the weights elementwise without renormalization.
Mat pooling_weights(const Mat& features, const Mat& ref, const ReferenceBank& bank,
                    PoolingKind pooling);

SetEmbedding embed_set(const Mat& features, const ReferenceBank& bank);

// Per-sample embeddings of a padded batch; each sample is trimmed to its true
// length before the Nystrom map and the positional factor are applied.
std::vector<SetEmbedding> embed_batch(const PaddedBatch& batch, const NystromMap& nystrom,
                                      const ReferenceBank& bank);

// Self-attention style diagnostics: P P^T per reference.
std::vector<Mat> attention_scores(const Mat& features, const ReferenceBank& bank);

// The dot-product ablation of embed_set, pooling kind forced.
SetEmbedding dot_product_pool(const Mat& features, const ReferenceBank& bank);

}  // namespace otke
