#pragma once

#include "otke/classifier.hpp"
#include "otke/data_io.hpp"
#include "otke/embedding.hpp"
#include "otke/kernels.hpp"
#include "otke/types.hpp"

#include <cstdint>
#include <vector>

namespace otke {

// Reverse-mode tape over the fixed primitive set of this model's graph
// (matrix products, elementwise exp/log/mul/div, broadcasts, reductions,
// log-sum-exp scalings, and the PSD inverse square root). Values are computed
// eagerly as nodes are built; backward walks the record in reverse.
class Tape {
public:
    using Id = int;

    Id constant(Mat value);
    Id param(Mat value);

    Id matmul(Id a, Id b);
    Id transpose(Id a);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id cmul(Id a, Id b);
    Id cdiv(Id a, Id b);
    Id exp(Id a);
    Id log(Id a);
    Id scale(Id a, Scalar factor);
    Id rep_col(Id a, Index cols);  // n x 1  ->  n x cols
    Id rep_row(Id a, Index rows);  // 1 x m  ->  rows x m
    Id row_sum(Id a);              // n x m  ->  n x 1
    Id col_sum(Id a);              // n x m  ->  1 x m
    Id lse_row(Id a);              // n x m  ->  n x 1
    Id lse_col(Id a);              // n x m  ->  1 x m
    Id flatten(Id a);              // row-major, p x k -> (p k) x 1
    Id vcat(Id a, Id b);
    Id sum_all(Id a);  // 1 x 1
    Id inv_sqrt_psd(Id a, Scalar ridge);

    const Mat& value(Id id) const { return nodes_[id].value; }
    const Mat& grad(Id id) const;

    void backward(Id root);

    // Recomputes every node from the leaves and compares with the recorded
    // values; replay of the same primitive sequence must be bit-identical.
    bool replay_matches() const;

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        constant, param, matmul, transpose, add, sub, cmul, cdiv, exp, log, scale,
        rep_col, rep_row, row_sum, col_sum, lse_row, lse_col, flatten, vcat, sum_all,
        inv_sqrt_psd
    };
    struct Node {
        Op op;
        Id a = -1, b = -1;
        Scalar factor = 0;
        Index extent = 0;
        Mat value;
        Mat grad;
        bool needs_grad = false;
        Mat eigvecs;  // inv_sqrt_psd only
        Vec eigvals;  // raw eigenvalues before clamping
    };

    Id push(Node node);
    bool tracked(Id id) const { return nodes_[id].needs_grad; }
    void accumulate(Id id, const Mat& g);
    static Mat compute(const Node& node, const Mat* a, const Mat* b);

    std::vector<Node> nodes_;
};

struct GradientBundle {
    std::vector<Mat> refs;  // one per reference
    Mat anchors;
    Mat weights;
    Vec bias;
};

enum class UnrollMode { auto_select, standard, log_domain };

struct ForwardResult {
    Tape tape;
    Tape::Id loss = -1;
    std::vector<Tape::Id> ref_ids;
    Tape::Id anchor_id = -1;
    Tape::Id weight_id = -1;
    Tape::Id bias_id = -1;

    Scalar loss_value() const { return tape.value(loss)(0, 0); }
};

// Builds the full training graph for one padded batch: Nystrom features from
// the anchors, the unrolled scaling iterations against every reference, the
// optional positional factor, pooling, and the regularized cross entropy.
// auto_select unrolls in log domain when epsilon < 0.1.
ForwardResult forward_loss(const PaddedBatch& batch, const NystromMap& nystrom,
                           const ReferenceBank& bank, const LinearClassifier& clf,
                           UnrollMode mode = UnrollMode::auto_select);

// Gradients of the recorded loss for the reference bank, the anchors and the
// classifier.
GradientBundle backward(ForwardResult& forward);

struct GradCheckConfig {
    Scalar h = 1e-5;
    int samples_per_block = 50;  // random coordinates per parameter block
    std::uint64_t seed = 0;
    UnrollMode mode = UnrollMode::auto_select;
};

// Central-difference validation of backward(); returns the worst relative
// error with denominator max(|analytic|, |numeric|, 1e-8).
Scalar grad_check(const PaddedBatch& batch, const NystromMap& nystrom, const ReferenceBank& bank,
                  const LinearClassifier& clf, const GradCheckConfig& config);

}  // namespace otke
