#include "otke/train.hpp"

#include "otke/parallel.hpp"
#include "otke/ref_learn.hpp"
#include "otke/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace otke {

void TrainConfig::validate() const {
    if (epochs < 0) throw Error("train: epochs must be >= 0");
    if (batch_size < 1) throw Error("train: batch size must be >= 1");
    if (!(lr > 0) || lr_halving_patience < 1) throw Error("train: invalid learning-rate settings");
    if (lambda < 0) throw Error("train: lambda must be nonnegative");
    if (!(epsilon > 0)) throw Error("train: epsilon must be positive");
    if (p < 1 || q < 1 || k < 1) throw Error("train: p, q, k must be >= 1");
    if (sigma_pos && !(*sigma_pos > 0)) throw Error("train: sigma_pos must be positive");
    if (refit_period < 1) throw Error("train: refit period must be >= 1");
    kernel.validate();
}

namespace {

struct AdamState {
    Mat m, v;
    int t = 0;

    explicit AdamState(Index rows, Index cols) : m(Mat::Zero(rows, cols)), v(Mat::Zero(rows, cols)) {}

    void update(Mat& param, const Mat& grad, Scalar lr) {
        constexpr Scalar b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
        const Scalar c1 = 1 - std::pow(b1, t);
        const Scalar c2 = 1 - std::pow(b2, t);
        param -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
};

std::vector<int> labels_of(const Dataset& dataset) {
    std::vector<int> out;
    out.reserve(dataset.samples.size());
    for (const FeatureSet& s : dataset.samples) out.push_back(s.label);
    return out;
}

Mat pooled_rows(const Dataset& dataset, Index cap, std::uint64_t seed) {
    Index total = 0;
    for (const FeatureSet& s : dataset.samples) total += s.features.rows();
    Mat pool(total, dataset.dim());
    Index at = 0;
    for (const FeatureSet& s : dataset.samples) {
        pool.middleRows(at, s.features.rows()) = s.features;
        at += s.features.rows();
    }
    if (total <= cap) return pool;
    std::vector<Index> order(total);
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    rng.shuffle(order);
    Mat sub(cap, pool.cols());
    for (Index i = 0; i < cap; ++i) sub.row(i) = pool.row(order[i]);
    return sub;
}

std::vector<Mat> embedded_sets(const Dataset& dataset, const NystromMap& nystrom) {
    std::vector<Mat> out(dataset.samples.size());
    parallel_for(dataset.samples.size(), [&](std::size_t i) {
        out[i] = embed_features(nystrom, dataset.samples[i].features);
    });
    return out;
}

EvalResult evaluate_scores(const Mat& scores, const Dataset& dataset,
                           const std::vector<int>& topk) {
    EvalResult out;
    if (dataset.mode == LabelMode::multiclass) {
        const std::vector<int> labels = labels_of(dataset);
        for (int k : topk) out.topk[k] = topk_accuracy(scores, labels, k);
        return out;
    }
    // Multilabel: rank-based metrics per label, averaged where both classes occur.
    const Index m = scores.rows();
    Scalar roc_total = 0, pr_total = 0;
    int counted = 0;
    for (int label = 0; label < dataset.num_classes; ++label) {
        std::vector<int> truth(m, 0);
        for (Index i = 0; i < m; ++i) {
            const auto& ls = dataset.samples[i].labels;
            if (std::find(ls.begin(), ls.end(), label) != ls.end()) truth[i] = 1;
        }
        const int positives = std::accumulate(truth.begin(), truth.end(), 0);
        if (positives == 0 || positives == static_cast<int>(m)) continue;
        std::vector<Scalar> col(m);
        for (Index i = 0; i < m; ++i) col[i] = scores(i, label);
        roc_total += roc_auc(col, truth);
        pr_total += average_precision(col, truth);
        ++counted;
    }
    if (counted > 0) {
        out.auroc = roc_total / counted;
        out.auprc = pr_total / counted;
    }
    return out;
}

}  // namespace

Mat embed_dataset(const Dataset& dataset, const NystromMap& nystrom, const ReferenceBank& bank) {
    Mat out(dataset.size(), bank.flat_size());
    parallel_for(dataset.samples.size(), [&](std::size_t i) {
        out.row(static_cast<Index>(i)) =
            embed_set(embed_features(nystrom, dataset.samples[i].features), bank)
                .flatten()
                .transpose();
    });
    return out;
}

Scalar topk_accuracy(const Mat& scores, const std::vector<int>& labels, int k) {
    if (scores.rows() != static_cast<Index>(labels.size())) {
        throw DimensionMismatch("topk_accuracy: label count != score rows");
    }
    if (scores.rows() < 1) throw EmptyDataset("topk_accuracy: no rows");
    Index hits = 0;
    for (Index i = 0; i < scores.rows(); ++i) {
        const int y = labels[i];
        const Scalar own = scores(i, y);
        Index rank = 0;
        for (Index c = 0; c < scores.cols(); ++c) {
            if (scores(i, c) > own || (scores(i, c) == own && c < y)) ++rank;
        }
        if (rank < k) ++hits;
    }
    return static_cast<Scalar>(hits) / static_cast<Scalar>(scores.rows());
}

Scalar roc_auc(const std::vector<Scalar>& scores, const std::vector<int>& truth) {
    const std::size_t m = scores.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });
    // Average ranks over ties, then the Mann-Whitney statistic.
    std::vector<Scalar> rank(m);
    std::size_t i = 0;
    while (i < m) {
        std::size_t j = i;
        while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
        const Scalar avg = 0.5 * static_cast<Scalar>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    Scalar pos_ranks = 0;
    std::size_t n_pos = 0;
    for (std::size_t t = 0; t < m; ++t) {
        if (truth[t]) {
            pos_ranks += rank[t];
            ++n_pos;
        }
    }
    const std::size_t n_neg = m - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("roc_auc: need both classes");
    const Scalar u = pos_ranks - 0.5 * static_cast<Scalar>(n_pos) * (n_pos + 1);
    return u / (static_cast<Scalar>(n_pos) * static_cast<Scalar>(n_neg));
}

Scalar average_precision(const std::vector<Scalar>& scores, const std::vector<int>& truth) {
    const std::size_t m = scores.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    Scalar hits = 0, total = 0;
    for (std::size_t t = 0; t < m; ++t) {
        if (truth[order[t]]) {
            hits += 1;
            total += hits / static_cast<Scalar>(t + 1);
        }
    }
    if (hits == 0) throw Error("average_precision: no positives");
    return total / hits;
}

EvalResult evaluate(const Model& model, const Dataset& dataset, const std::vector<int>& topk) {
    if (dataset.size() < 1) throw EmptyDataset("evaluate: empty dataset");
    dataset.validate();
    const Mat embeddings = embed_dataset(dataset, model.nystrom, model.bank);
    return evaluate_scores(model.classifier.logits(embeddings), dataset, topk);
}

std::pair<Model, Metrics> train_unsupervised(const Dataset& dataset, const TrainConfig& config) {
    config.validate();
    dataset.validate();
    if (dataset.mode != LabelMode::multiclass) {
        throw Error("train_unsupervised: training needs a multiclass dataset");
    }
    const Dataset train = dataset.subset(Split::train);
    const Dataset val = dataset.subset(Split::val);
    const Dataset test = dataset.subset(Split::test);
    if (train.size() < 1) throw InsufficientData("train_unsupervised: no training samples");
    const int iters = config.resolved_iters(false);

    Model model;
    model.nystrom = fit_nystrom(pooled_rows(train, config.pool_cap, Rng::mix(config.seed, 1)),
                                config.k, config.kernel, config.anchor_method,
                                Rng::mix(config.seed, 2), config.ridge);

    const std::vector<Mat> psi_sets = embedded_sets(train, model.nystrom);
    if (config.ref_method == RefMethod::kmeans) {
        model.bank = fit_refs_kmeans(psi_sets, config.p, config.q, Rng::mix(config.seed, 3),
                                     config.epsilon, iters);
    } else {
        BarycenterProblem problem;
        problem.member_sets = psi_sets;
        problem.p = config.p;
        problem.epsilon = config.epsilon;
        problem.inner_iters = iters;
        problem.outer_iters = config.barycenter_outer_iters;
        model.bank = fit_refs_wasserstein(problem, config.q, Rng::mix(config.seed, 3)).bank;
    }
    model.bank.epsilon = config.epsilon;
    model.bank.sinkhorn_iters = iters;
    model.bank.sigma_pos = config.sigma_pos;
    model.bank.pooling = config.pooling;

    model.classifier =
        LinearClassifier::zeros(dataset.num_classes, model.bank.flat_size(), config.lambda);
    const Mat train_emb = embed_dataset(train, model.nystrom, model.bank);
    const GdReport gd = fit_classifier_gd(model.classifier, train_emb, labels_of(train),
                                          config.classifier_tol, config.classifier_max_iters);

    Metrics metrics;
    metrics.train_acc = topk_accuracy(model.classifier.logits(train_emb), labels_of(train), 1);
    EpochStats stats;
    stats.epoch = 0;
    stats.train_loss = gd.loss;
    stats.lr = 0;  // classifier refits use a fixed derived step
    if (val.size() > 0) {
        const Mat val_emb = embed_dataset(val, model.nystrom, model.bank);
        stats.val_loss = cross_entropy_loss(model.classifier, val_emb, labels_of(val));
        stats.val_acc = topk_accuracy(model.classifier.logits(val_emb), labels_of(val), 1);
        for (int k : {1, 5, 10}) {
            if (k <= dataset.num_classes) {
                metrics.val_topk[k] =
                    topk_accuracy(model.classifier.logits(val_emb), labels_of(val), k);
            }
        }
    }
    metrics.trace.push_back(stats);
    if (test.size() > 0) {
        const EvalResult r = evaluate(model, test, {1, 5, 10});
        metrics.test_topk = r.topk;
    }
    return {std::move(model), std::move(metrics)};
}

std::pair<Model, Metrics> train_supervised(const Dataset& dataset, const TrainConfig& config,
                                           const Model& init) {
    config.validate();
    dataset.validate();
    if (dataset.mode != LabelMode::multiclass) {
        throw Error("train_supervised: training needs a multiclass dataset");
    }
    const Dataset train = dataset.subset(Split::train);
    const Dataset val = dataset.subset(Split::val);
    const Dataset test = dataset.subset(Split::test);
    if (train.size() < 1) throw InsufficientData("train_supervised: no training samples");
    const std::vector<int> train_labels = labels_of(train);
    const std::vector<int> val_labels = labels_of(val);

    Metrics metrics;
    if (config.epochs == 0) {
        Model model = init;
        const Mat train_emb = embed_dataset(train, model.nystrom, model.bank);
        metrics.train_acc = topk_accuracy(model.classifier.logits(train_emb), train_labels, 1);
        if (val.size() > 0) {
            const EvalResult r = evaluate(model, val, {1, 5, 10});
            metrics.val_topk = r.topk;
        }
        if (test.size() > 0) {
            const EvalResult r = evaluate(model, test, {1, 5, 10});
            metrics.test_topk = r.topk;
        }
        return {std::move(model), std::move(metrics)};
    }

    Model model = init;
    model.bank.epsilon = config.epsilon;
    model.bank.sinkhorn_iters = config.resolved_iters(true);
    model.bank.sigma_pos = config.sigma_pos;
    model.bank.pooling = config.pooling;

    // Epoch-0 baseline and best-checkpoint seed.
    auto val_state = [&](const Model& m) -> std::pair<Scalar, Scalar> {
        if (val.size() < 1) return {0.0, 0.0};
        const Mat emb = embed_dataset(val, m.nystrom, m.bank);
        return {cross_entropy_loss(m.classifier, emb, val_labels),
                topk_accuracy(m.classifier.logits(emb), val_labels, 1)};
    };
    auto [best_val_loss, best_val_acc] = val_state(model);
    Model best = model;

    AdamState anchor_state(model.nystrom.anchors.rows(), model.nystrom.anchors.cols());
    std::vector<AdamState> ref_states;
    for (const Mat& z : model.bank.refs) ref_states.emplace_back(z.rows(), z.cols());
    AdamState weight_state(model.classifier.W.rows(), model.classifier.W.cols());
    AdamState bias_state(model.classifier.bias.size(), 1);

    Scalar lr = config.lr;
    Scalar halving_floor = best_val_loss;
    int stall = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<Scalar> batch_losses;
        try {
            for (const PaddedBatch& batch :
                 make_batches(train, config.batch_size, Rng::mix(config.seed, 100 + epoch), true)) {
                ForwardResult fr = forward_loss(batch, model.nystrom, model.bank, model.classifier);
                const GradientBundle g = backward(fr);
                batch_losses.push_back(fr.loss_value());
                for (std::size_t j = 0; j < model.bank.refs.size(); ++j) {
                    ref_states[j].update(model.bank.refs[j], g.refs[j], lr);
                }
                anchor_state.update(model.nystrom.anchors, g.anchors, lr);
                if (config.schedule == Schedule::joint) {
                    weight_state.update(model.classifier.W, g.weights, lr);
                    Mat b = model.classifier.bias;
                    bias_state.update(b, g.bias, lr);
                    model.classifier.bias = b.col(0);
                }
            }
        } catch (const NonFinite& e) {
            throw NonFinite(std::string(e.what()) + " (diverged in epoch " +
                            std::to_string(epoch) + "; last finite epoch " +
                            std::to_string(epoch - 1) + ")");
        }
        model.nystrom.refresh();

        if (config.schedule == Schedule::alternating && epoch % config.refit_period == 0) {
            const Mat train_emb = embed_dataset(train, model.nystrom, model.bank);
            fit_classifier_gd(model.classifier, train_emb, train_labels, config.classifier_tol,
                              config.classifier_max_iters);
        }

        const auto [val_loss, val_acc] = val_state(model);
        EpochStats stats;
        stats.epoch = epoch;
        // Median over the epoch's batch losses: robust to one or two hard batches.
        std::sort(batch_losses.begin(), batch_losses.end());
        const std::size_t mid = batch_losses.size() / 2;
        stats.train_loss = batch_losses.empty()
                               ? 0
                               : (batch_losses.size() % 2 == 1
                                      ? batch_losses[mid]
                                      : 0.5 * (batch_losses[mid - 1] + batch_losses[mid]));
        stats.val_loss = val_loss;
        stats.val_acc = val_acc;
        stats.lr = lr;
        metrics.trace.push_back(stats);

        if (val.size() > 0) {
            if (val_loss < halving_floor - 1e-12) {
                halving_floor = val_loss;
                stall = 0;
            } else if (++stall >= config.lr_halving_patience) {
                lr *= 0.5;
                stall = 0;
            }
            if (val_acc > best_val_acc) {
                best_val_acc = val_acc;
                best_val_loss = val_loss;
                best = model;
            }
        } else {
            best = model;
        }
    }

    model = best;
    const Mat train_emb = embed_dataset(train, model.nystrom, model.bank);
    metrics.train_acc = topk_accuracy(model.classifier.logits(train_emb), train_labels, 1);
    if (val.size() > 0) {
        const EvalResult r = evaluate(model, val, {1, 5, 10});
        metrics.val_topk = r.topk;
    }
    if (test.size() > 0) {
        const EvalResult r = evaluate(model, test, {1, 5, 10});
        metrics.test_topk = r.topk;
    }
    return {std::move(model), std::move(metrics)};
}

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ofstream& out, Scalar v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_mat(std::ofstream& out, const Mat& m) {
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw ParseError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

Scalar get_f64(std::ifstream& in) {
    const std::uint64_t bits = get_u64(in);
    Scalar v;
    std::memcpy(&v, &bits, 8);
    return v;
}

Mat get_mat(std::ifstream& in, Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = get_f64(in);
    return m;
}

constexpr char kMagic[9] = "OTKE0001";

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_checkpoint: cannot open " + path);
    out.write(kMagic, 8);
    put_u64(out, static_cast<std::uint64_t>(model.nystrom.input_dim()));
    put_u64(out, static_cast<std::uint64_t>(model.nystrom.dim()));
    put_u64(out, static_cast<std::uint64_t>(model.bank.p()));
    put_u64(out, static_cast<std::uint64_t>(model.bank.q()));
    put_u64(out, static_cast<std::uint64_t>(model.classifier.num_classes()));
    put_u64(out, model.nystrom.spec.kind == KernelKind::gaussian ? 1 : 0);
    put_f64(out, model.nystrom.spec.bandwidth);
    put_f64(out, model.nystrom.ridge);
    put_f64(out, model.bank.epsilon);
    put_f64(out, model.bank.sigma_pos ? *model.bank.sigma_pos : 0.0);
    put_u64(out, static_cast<std::uint64_t>(model.bank.sinkhorn_iters));
    put_u64(out, model.bank.pooling == PoolingKind::dot_product ? 1 : 0);
    put_f64(out, model.classifier.lambda);
    put_mat(out, model.nystrom.anchors);
    put_mat(out, model.nystrom.whitener);
    for (const Mat& z : model.bank.refs) put_mat(out, z);
    put_mat(out, model.classifier.W);
    put_mat(out, model.classifier.bias);
    if (!out) throw Error("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError("load_checkpoint: bad magic in " + path);
    }
    const Index d = static_cast<Index>(get_u64(in));
    const Index k = static_cast<Index>(get_u64(in));
    const Index p = static_cast<Index>(get_u64(in));
    const Index q = static_cast<Index>(get_u64(in));
    const Index classes = static_cast<Index>(get_u64(in));
    Model model;
    model.nystrom.spec.kind = get_u64(in) == 1 ? KernelKind::gaussian : KernelKind::linear;
    model.nystrom.spec.bandwidth = get_f64(in);
    model.nystrom.ridge = get_f64(in);
    model.bank.epsilon = get_f64(in);
    const Scalar sigma_pos = get_f64(in);
    if (sigma_pos > 0) model.bank.sigma_pos = sigma_pos;
    model.bank.sinkhorn_iters = static_cast<int>(get_u64(in));
    model.bank.pooling = get_u64(in) == 1 ? PoolingKind::dot_product : PoolingKind::ot;
    model.classifier.lambda = get_f64(in);
    model.nystrom.anchors = get_mat(in, k, d);
    model.nystrom.whitener = get_mat(in, k, k);
    for (Index j = 0; j < q; ++j) model.bank.refs.push_back(get_mat(in, p, k));
    model.classifier.W = get_mat(in, classes, q * p * k);
    model.classifier.bias = get_mat(in, classes, 1);
    return model;
}

}  // namespace otke
