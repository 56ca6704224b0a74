#include "otke/autodiff.hpp"

#include "otke/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>

namespace otke {

namespace {

Vec lse_rows_of(const Mat& x) {
    Vec out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const Scalar m = x.row(i).maxCoeff();
        out[i] = m + std::log((x.row(i).array() - m).exp().sum());
    }
    return out;
}

RowVec lse_cols_of(const Mat& x) {
    RowVec out(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const Scalar m = x.col(j).maxCoeff();
        out[j] = m + std::log((x.col(j).array() - m).exp().sum());
    }
    return out;
}

}  // namespace

Tape::Id Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(Mat value) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Id Tape::param(Mat value) {
    Node n;
    n.op = Op::param;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

Mat Tape::compute(const Node& node, const Mat* a, const Mat* b) {
    switch (node.op) {
        case Op::constant:
        case Op::param:
            return node.value;
        case Op::matmul:
            return (*a) * (*b);
        case Op::transpose:
            return a->transpose();
        case Op::add:
            return (*a) + (*b);
        case Op::sub:
            return (*a) - (*b);
        case Op::cmul:
            return a->cwiseProduct(*b);
        case Op::cdiv:
            return a->cwiseQuotient(*b);
        case Op::exp:
            return a->array().exp();
        case Op::log:
            return a->array().log();
        case Op::scale:
            return node.factor * (*a);
        case Op::rep_col:
            return a->replicate(1, node.extent);
        case Op::rep_row:
            return a->replicate(node.extent, 1);
        case Op::row_sum:
            return a->rowwise().sum();
        case Op::col_sum:
            return a->colwise().sum();
        case Op::lse_row:
            return lse_rows_of(*a);
        case Op::lse_col:
            return lse_cols_of(*a);
        case Op::flatten: {
            Mat out(a->size(), 1);
            Index at = 0;
            for (Index r = 0; r < a->rows(); ++r)
                for (Index c = 0; c < a->cols(); ++c) out(at++, 0) = (*a)(r, c);
            return out;
        }
        case Op::vcat: {
            Mat out(a->rows() + b->rows(), a->cols());
            out.topRows(a->rows()) = *a;
            out.bottomRows(b->rows()) = *b;
            return out;
        }
        case Op::sum_all: {
            Mat out(1, 1);
            out(0, 0) = a->sum();
            return out;
        }
        case Op::inv_sqrt_psd: {
            Eigen::SelfAdjointEigenSolver<Mat> es(*a);
            const Vec scale = es.eigenvalues().cwiseMax(node.factor).cwiseSqrt().cwiseInverse();
            return es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
        }
    }
    throw Error("tape: unknown op");
}

#define OTKE_UNARY(name, check)                                    \
    Tape::Id Tape::name(Id a) {                                    \
        Node n;                                                    \
        n.op = Op::name;                                           \
        n.a = a;                                                   \
        n.needs_grad = tracked(a);                                 \
        check;                                                     \
        n.value = compute(n, &nodes_[a].value, nullptr);           \
        return push(std::move(n));                                 \
    }

OTKE_UNARY(transpose, )
OTKE_UNARY(exp, )
OTKE_UNARY(log, )
OTKE_UNARY(row_sum, )
OTKE_UNARY(col_sum, )
OTKE_UNARY(lse_row, )
OTKE_UNARY(lse_col, )
OTKE_UNARY(flatten, )
OTKE_UNARY(sum_all, )
#undef OTKE_UNARY

namespace {
void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string("tape: ") + what + ": shape mismatch");
    }
}
}  // namespace

Tape::Id Tape::matmul(Id a, Id b) {
    if (nodes_[a].value.cols() != nodes_[b].value.rows()) {
        throw DimensionMismatch("tape: matmul: inner dimensions differ");
    }
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.needs_grad = tracked(a) || tracked(b);
    n.value = compute(n, &nodes_[a].value, &nodes_[b].value);
    return push(std::move(n));
}

#define OTKE_BINARY(name)                                          \
    Tape::Id Tape::name(Id a, Id b) {                              \
        require_same_shape(nodes_[a].value, nodes_[b].value, #name); \
        Node n;                                                    \
        n.op = Op::name;                                           \
        n.a = a;                                                   \
        n.b = b;                                                   \
        n.needs_grad = tracked(a) || tracked(b);                   \
        n.value = compute(n, &nodes_[a].value, &nodes_[b].value);  \
        return push(std::move(n));                                 \
    }

OTKE_BINARY(add)
OTKE_BINARY(sub)
OTKE_BINARY(cmul)
OTKE_BINARY(cdiv)
#undef OTKE_BINARY

Tape::Id Tape::scale(Id a, Scalar factor) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.factor = factor;
    n.needs_grad = tracked(a);
    n.value = compute(n, &nodes_[a].value, nullptr);
    return push(std::move(n));
}

Tape::Id Tape::rep_col(Id a, Index cols) {
    if (nodes_[a].value.cols() != 1) throw DimensionMismatch("tape: rep_col needs a column vector");
    Node n;
    n.op = Op::rep_col;
    n.a = a;
    n.extent = cols;
    n.needs_grad = tracked(a);
    n.value = compute(n, &nodes_[a].value, nullptr);
    return push(std::move(n));
}

Tape::Id Tape::rep_row(Id a, Index rows) {
    if (nodes_[a].value.rows() != 1) throw DimensionMismatch("tape: rep_row needs a row vector");
    Node n;
    n.op = Op::rep_row;
    n.a = a;
    n.extent = rows;
    n.needs_grad = tracked(a);
    n.value = compute(n, &nodes_[a].value, nullptr);
    return push(std::move(n));
}

Tape::Id Tape::vcat(Id a, Id b) {
    if (nodes_[a].value.cols() != nodes_[b].value.cols()) {
        throw DimensionMismatch("tape: vcat: column counts differ");
    }
    Node n;
    n.op = Op::vcat;
    n.a = a;
    n.b = b;
    n.needs_grad = tracked(a) || tracked(b);
    n.value = compute(n, &nodes_[a].value, &nodes_[b].value);
    return push(std::move(n));
}

Tape::Id Tape::inv_sqrt_psd(Id a, Scalar ridge) {
    const Mat& A = nodes_[a].value;
    if (A.rows() != A.cols()) throw DimensionMismatch("tape: inv_sqrt_psd needs a square matrix");
    Node n;
    n.op = Op::inv_sqrt_psd;
    n.a = a;
    n.factor = ridge;
    n.needs_grad = tracked(a);
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success) throw NonFinite("tape: eigendecomposition failed");
    n.eigvecs = es.eigenvectors();
    n.eigvals = es.eigenvalues();
    const Vec scale = n.eigvals.cwiseMax(ridge).cwiseSqrt().cwiseInverse();
    n.value = n.eigvecs * scale.asDiagonal() * n.eigvecs.transpose();
    return push(std::move(n));
}

const Mat& Tape::grad(Id id) const {
    const Node& n = nodes_[id];
    if (!n.needs_grad) throw Error("tape: node does not carry a gradient");
    return n.grad;
}

void Tape::accumulate(Id id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

void Tape::backward(Id root) {
    if (root < 0 || root >= static_cast<Id>(nodes_.size())) throw Error("tape: bad root");
    if (nodes_[root].value.size() != 1) throw Error("tape: backward root must be scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[root].grad = Mat::Ones(1, 1);

    for (Id id = root; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::constant:
            case Op::param:
                break;
            case Op::matmul:
                accumulate(n.a, g * nodes_[n.b].value.transpose());
                accumulate(n.b, nodes_[n.a].value.transpose() * g);
                break;
            case Op::transpose:
                accumulate(n.a, g.transpose());
                break;
            case Op::add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case Op::sub:
                accumulate(n.a, g);
                accumulate(n.b, -g);
                break;
            case Op::cmul:
                accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
                accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
                break;
            case Op::cdiv:
                accumulate(n.a, g.cwiseQuotient(nodes_[n.b].value));
                accumulate(n.b, -g.cwiseProduct(n.value).cwiseQuotient(nodes_[n.b].value));
                break;
            case Op::exp:
                accumulate(n.a, g.cwiseProduct(n.value));
                break;
            case Op::log:
                accumulate(n.a, g.cwiseQuotient(nodes_[n.a].value));
                break;
            case Op::scale:
                accumulate(n.a, n.factor * g);
                break;
            case Op::rep_col:
                accumulate(n.a, g.rowwise().sum());
                break;
            case Op::rep_row:
                accumulate(n.a, g.colwise().sum());
                break;
            case Op::row_sum:
                accumulate(n.a, g.replicate(1, nodes_[n.a].value.cols()));
                break;
            case Op::col_sum:
                accumulate(n.a, g.replicate(nodes_[n.a].value.rows(), 1));
                break;
            case Op::lse_row: {
                const Mat& in = nodes_[n.a].value;
                const Mat soft = (in - n.value.replicate(1, in.cols())).array().exp();
                accumulate(n.a, soft.cwiseProduct(g.replicate(1, in.cols())));
                break;
            }
            case Op::lse_col: {
                const Mat& in = nodes_[n.a].value;
                const Mat soft = (in - n.value.replicate(in.rows(), 1)).array().exp();
                accumulate(n.a, soft.cwiseProduct(g.replicate(in.rows(), 1)));
                break;
            }
            case Op::flatten: {
                const Mat& in = nodes_[n.a].value;
                Mat back(in.rows(), in.cols());
                Index at = 0;
                for (Index r = 0; r < in.rows(); ++r)
                    for (Index c = 0; c < in.cols(); ++c) back(r, c) = g(at++, 0);
                accumulate(n.a, back);
                break;
            }
            case Op::vcat:
                accumulate(n.a, g.topRows(nodes_[n.a].value.rows()));
                accumulate(n.b, g.bottomRows(nodes_[n.b].value.rows()));
                break;
            case Op::sum_all:
                accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(),
                                              g(0, 0)));
                break;
            case Op::inv_sqrt_psd: {
                // Daleckii-Krein: for B = V g(L) V^T, the adjoint of A -> B is
                // V (F o (V^T G V)) V^T with F the divided differences of g.
                const Mat& V = n.eigvecs;
                const Vec& lam = n.eigvals;
                const Scalar ridge = n.factor;
                auto gfun = [&](Scalar l) { return 1.0 / std::sqrt(std::max(l, ridge)); };
                auto gprime = [&](Scalar l) {
                    return l > ridge ? -0.5 * std::pow(l, -1.5) : 0.0;
                };
                Mat S = V.transpose() * g * V;
                for (Index r = 0; r < lam.size(); ++r) {
                    for (Index c = 0; c < lam.size(); ++c) {
                        const Scalar lr = lam[r], lc = lam[c];
                        const Scalar tol =
                            1e-12 * std::max({Scalar(1), std::abs(lr), std::abs(lc)});
                        const Scalar f = std::abs(lr - lc) > tol
                                             ? (gfun(lr) - gfun(lc)) / (lr - lc)
                                             : gprime(0.5 * (lr + lc));
                        S(r, c) *= f;
                    }
                }
                accumulate(n.a, V * S * V.transpose());
                break;
            }
        }
    }

    // Tracked leaves that the root does not reach keep a zero gradient.
    for (auto& n : nodes_) {
        if (n.needs_grad && n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    }
}

bool Tape::replay_matches() const {
    std::vector<Mat> fresh(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        const Mat* a = n.a >= 0 ? &fresh[n.a] : nullptr;
        const Mat* b = n.b >= 0 ? &fresh[n.b] : nullptr;
        fresh[i] = compute(n, a, b);
        if (fresh[i].rows() != n.value.rows() || fresh[i].cols() != n.value.cols()) return false;
        for (Index r = 0; r < n.value.rows(); ++r) {
            for (Index c = 0; c < n.value.cols(); ++c) {
                if (fresh[i](r, c) != n.value(r, c)) return false;
            }
        }
    }
    return true;
}

namespace {

UnrollMode resolve_unroll(UnrollMode mode, Scalar epsilon) {
    if (mode != UnrollMode::auto_select) return mode;
    return epsilon < 0.1 ? UnrollMode::log_domain : UnrollMode::standard;
}

}  // namespace

ForwardResult forward_loss(const PaddedBatch& batch, const NystromMap& nystrom,
                           const ReferenceBank& bank, const LinearClassifier& clf,
                           UnrollMode mode) {
    bank.validate();
    clf.validate();
    nystrom.spec.validate();
    if (batch.batch_size() < 1) throw EmptyDataset("forward_loss: empty batch");
    if (batch.features.cols() != nystrom.input_dim()) {
        throw DimensionMismatch("forward_loss: batch width does not match anchors");
    }
    if (bank.dim() != nystrom.dim()) {
        throw DimensionMismatch("forward_loss: reference width does not match the feature map");
    }
    if (clf.input_dim() != bank.flat_size()) {
        throw DimensionMismatch("forward_loss: classifier width does not match the embedding");
    }
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        if (batch.labels[i] < 0 || batch.labels[i] >= clf.num_classes()) {
            throw Error("forward_loss: label out of range at sample " + std::to_string(i));
        }
        if (batch.lengths[i] < 1) throw EmptySet("forward_loss: empty sample in batch");
    }

    const UnrollMode unroll = resolve_unroll(mode, bank.epsilon);
    const bool gaussian = nystrom.spec.kind == KernelKind::gaussian;
    const Index k = nystrom.dim();
    const Index p = bank.p();
    const Scalar eps = bank.epsilon;
    const int iters = bank.sinkhorn_iters;

    ForwardResult fr;
    Tape& t = fr.tape;
    fr.anchor_id = t.param(nystrom.anchors);
    for (const Mat& z : bank.refs) fr.ref_ids.push_back(t.param(z));
    fr.weight_id = t.param(clf.W);
    fr.bias_id = t.param(clf.bias);

    const Tape::Id anchors_t = t.transpose(fr.anchor_id);
    Tape::Id gram, sqn_w_row = -1;
    if (gaussian) {
        const Tape::Id sqn_w = t.row_sum(t.cmul(fr.anchor_id, fr.anchor_id));
        sqn_w_row = t.transpose(sqn_w);
        const Tape::Id d = t.sub(t.add(t.rep_col(sqn_w, k), t.rep_row(sqn_w_row, k)),
                                 t.scale(t.matmul(fr.anchor_id, anchors_t), 2.0));
        gram = t.exp(t.scale(d, -1.0 / (2.0 * nystrom.spec.bandwidth * nystrom.spec.bandwidth)));
    } else {
        gram = t.matmul(fr.anchor_id, anchors_t);
    }
    const Tape::Id whitener = t.inv_sqrt_psd(gram, nystrom.ridge);

    std::vector<Tape::Id> ref_t(bank.refs.size());
    for (std::size_t j = 0; j < bank.refs.size(); ++j) ref_t[j] = t.transpose(fr.ref_ids[j]);

    Tape::Id total = -1;
    for (Index s = 0; s < batch.batch_size(); ++s) {
        const Index n = batch.lengths[s];
        const Tape::Id x = t.constant(batch.sample(s));

        Tape::Id kxw;
        if (gaussian) {
            const Tape::Id sqn_x = t.row_sum(t.cmul(x, x));
            const Tape::Id d = t.sub(t.add(t.rep_col(sqn_x, k), t.rep_row(sqn_w_row, n)),
                                     t.scale(t.matmul(x, anchors_t), 2.0));
            kxw = t.exp(
                t.scale(d, -1.0 / (2.0 * nystrom.spec.bandwidth * nystrom.spec.bandwidth)));
        } else {
            kxw = t.matmul(x, anchors_t);
        }
        const Tape::Id psi = t.matmul(kxw, whitener);

        Tape::Id cat = -1;
        for (std::size_t j = 0; j < bank.refs.size(); ++j) {
            const Tape::Id m = t.scale(t.matmul(psi, ref_t[j]), 1.0 / eps);
            Tape::Id plan;
            if (bank.pooling == PoolingKind::dot_product) {
                plan = t.scale(t.exp(t.sub(m, t.rep_row(t.lse_col(m), n))),
                               1.0 / static_cast<Scalar>(p));
            } else if (unroll == UnrollMode::standard) {
                const Tape::Id e = t.exp(m);
                const Tape::Id e_t = t.transpose(e);
                const Tape::Id a_w =
                    t.constant(Mat::Constant(n, 1, 1.0 / static_cast<Scalar>(n)));
                const Tape::Id b_w =
                    t.constant(Mat::Constant(p, 1, 1.0 / static_cast<Scalar>(p)));
                Tape::Id v = t.constant(Mat::Ones(p, 1));
                Tape::Id u = -1;
                for (int l = 0; l < iters; ++l) {
                    u = t.cdiv(a_w, t.matmul(e, v));
                    v = t.cdiv(b_w, t.matmul(e_t, u));
                }
                plan = t.cmul(t.cmul(t.rep_col(u, p), e), t.rep_row(t.transpose(v), n));
            } else {
                const Tape::Id la = t.constant(
                    Mat::Constant(n, 1, -std::log(static_cast<Scalar>(n))));
                const Tape::Id lb = t.constant(
                    Mat::Constant(p, 1, -std::log(static_cast<Scalar>(p))));
                Tape::Id lv = t.constant(Mat::Zero(p, 1));
                Tape::Id lu = -1;
                for (int l = 0; l < iters; ++l) {
                    lu = t.sub(la, t.lse_row(t.add(m, t.rep_row(t.transpose(lv), n))));
                    lv = t.sub(lb, t.transpose(t.lse_col(t.add(m, t.rep_col(lu, p)))));
                }
                plan = t.exp(t.add(t.add(m, t.rep_col(lu, p)), t.rep_row(t.transpose(lv), n)));
            }
            if (bank.sigma_pos) {
                plan = t.cmul(plan, t.constant(position_matrix(n, p, *bank.sigma_pos)));
            }
            const Tape::Id slab = t.scale(t.matmul(t.transpose(plan), psi),
                                          std::sqrt(static_cast<Scalar>(p)));
            const Tape::Id flat = t.flatten(slab);
            cat = cat < 0 ? flat : t.vcat(cat, flat);
        }
        const Tape::Id emb = t.scale(cat, 1.0 / std::sqrt(static_cast<Scalar>(bank.q())));
        const Tape::Id logits = t.add(t.matmul(fr.weight_id, emb), fr.bias_id);
        const Tape::Id lse = t.lse_row(t.transpose(logits));
        RowVec onehot = RowVec::Zero(clf.num_classes());
        onehot[batch.labels[s]] = 1.0;
        const Tape::Id picked = t.matmul(t.constant(onehot), logits);
        const Tape::Id ce = t.sub(lse, picked);
        total = total < 0 ? ce : t.add(total, ce);
    }

    const Tape::Id mean = t.scale(total, 1.0 / static_cast<Scalar>(batch.batch_size()));
    const Tape::Id reg =
        t.scale(t.sum_all(t.cmul(fr.weight_id, fr.weight_id)), 0.5 * clf.lambda);
    fr.loss = t.add(mean, reg);
    if (!std::isfinite(fr.loss_value())) {
        throw NonFinite("forward_loss: loss is not finite (try the log_domain unroll)");
    }
    return fr;
}

GradientBundle backward(ForwardResult& fr) {
    fr.tape.backward(fr.loss);
    GradientBundle out;
    for (Tape::Id id : fr.ref_ids) out.refs.push_back(fr.tape.grad(id));
    out.anchors = fr.tape.grad(fr.anchor_id);
    out.weights = fr.tape.grad(fr.weight_id);
    out.bias = fr.tape.grad(fr.bias_id).col(0);
    for (const Mat& g : out.refs) {
        if (!g.allFinite()) throw NonFinite("backward: non-finite reference gradient");
    }
    if (!out.anchors.allFinite() || !out.weights.allFinite() || !out.bias.allFinite()) {
        throw NonFinite("backward: non-finite gradient");
    }
    return out;
}

namespace {

std::vector<Index> pick_coordinates(Rng& rng, Index total, int want) {
    std::vector<Index> out;
    if (want >= total) {
        out.resize(total);
        for (Index i = 0; i < total; ++i) out[i] = i;
        return out;
    }
    std::set<Index> seen;
    while (static_cast<int>(seen.size()) < want) {
        seen.insert(static_cast<Index>(rng.uniform_index(total)));
    }
    out.assign(seen.begin(), seen.end());
    return out;
}

}  // namespace

Scalar grad_check(const PaddedBatch& batch, const NystromMap& nystrom, const ReferenceBank& bank,
                  const LinearClassifier& clf, const GradCheckConfig& config) {
    if (!(config.h >= 1e-6 && config.h <= 1e-4)) {
        throw Error("grad_check: step must lie in [1e-6, 1e-4]");
    }
    ForwardResult fr = forward_loss(batch, nystrom, bank, clf, config.mode);
    const GradientBundle analytic = backward(fr);

    Rng rng(config.seed);
    Scalar worst = 0;
    auto compare = [&](Scalar analytic_value, auto&& loss_at_offset) {
        const Scalar plus = loss_at_offset(config.h);
        const Scalar minus = loss_at_offset(-config.h);
        const Scalar numeric = (plus - minus) / (2.0 * config.h);
        const Scalar denom =
            std::max({std::abs(analytic_value), std::abs(numeric), Scalar(1e-8)});
        worst = std::max(worst, std::abs(analytic_value - numeric) / denom);
    };

    // Reference block: coordinates indexed across all references.
    {
        const Index per_ref = bank.p() * bank.dim();
        for (Index flat : pick_coordinates(rng, bank.q() * per_ref, config.samples_per_block)) {
            const Index j = flat / per_ref;
            const Index r = (flat % per_ref) / bank.dim();
            const Index c = flat % bank.dim();
            compare(analytic.refs[j](r, c), [&](Scalar delta) {
                ReferenceBank moved = bank;
                moved.refs[j](r, c) += delta;
                return forward_loss(batch, nystrom, moved, clf, config.mode).loss_value();
            });
        }
    }
    // Anchor block.
    for (Index flat :
         pick_coordinates(rng, nystrom.dim() * nystrom.input_dim(), config.samples_per_block)) {
        const Index r = flat / nystrom.input_dim();
        const Index c = flat % nystrom.input_dim();
        compare(analytic.anchors(r, c), [&](Scalar delta) {
            NystromMap moved = nystrom;
            moved.anchors(r, c) += delta;
            return forward_loss(batch, moved, bank, clf, config.mode).loss_value();
        });
    }
    // Classifier weights.
    for (Index flat :
         pick_coordinates(rng, clf.W.size(), config.samples_per_block)) {
        const Index r = flat / clf.W.cols();
        const Index c = flat % clf.W.cols();
        compare(analytic.weights(r, c), [&](Scalar delta) {
            LinearClassifier moved = clf;
            moved.W(r, c) += delta;
            return forward_loss(batch, nystrom, bank, moved, config.mode).loss_value();
        });
    }
    // Bias.
    for (Index flat : pick_coordinates(rng, clf.bias.size(), config.samples_per_block)) {
        compare(analytic.bias(flat), [&](Scalar delta) {
            LinearClassifier moved = clf;
            moved.bias(flat) += delta;
            return forward_loss(batch, nystrom, bank, moved, config.mode).loss_value();
        });
    }
    return worst;
}

}  // namespace otke
