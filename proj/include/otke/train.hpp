#pragma once

#include "otke/autodiff.hpp"
#include "otke/classifier.hpp"
#include "otke/data_io.hpp"
#include "otke/embedding.hpp"
#include "otke/kernels.hpp"
#include "otke/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace otke {

enum class Schedule { joint, alternating };
enum class RefMethod { kmeans, wasserstein };

struct TrainConfig {
    int epochs = 10;
    Index batch_size = 32;
    Scalar lr = 0.01;
    int lr_halving_patience = 5;  // epochs without val-loss decrease before halving
    Scalar lambda = 1e-4;
    Scalar epsilon = 0.5;
    int sinkhorn_iters = 0;  // 0 = mode default: 100 unsupervised, 10 supervised
    std::optional<Scalar> sigma_pos;
    Index p = 10;
    Index q = 1;
    Index k = 32;
    KernelSpec kernel = KernelSpec::gaussian(2.5);
    Scalar ridge = 1e-6;
    AnchorMethod anchor_method = AnchorMethod::kmeans;
    RefMethod ref_method = RefMethod::kmeans;
    PoolingKind pooling = PoolingKind::ot;
    std::uint64_t seed = 0;
    Schedule schedule = Schedule::alternating;
    int refit_period = 1;  // epochs of (z, w) updates per classifier refit
    int classifier_max_iters = 2000;
    Scalar classifier_tol = 1e-6;
    Index pool_cap = 100000;  // subsample cap for anchor/reference K-means pools
    int barycenter_outer_iters = 10;

    void validate() const;
    int resolved_iters(bool supervised) const {
        return sinkhorn_iters > 0 ? sinkhorn_iters : (supervised ? 10 : 100);
    }
};

struct Model {
    NystromMap nystrom;
    ReferenceBank bank;
    LinearClassifier classifier;
};

struct EpochStats {
    int epoch = 0;
    Scalar train_loss = 0;
    Scalar val_loss = 0;
    Scalar val_acc = 0;
    Scalar lr = 0;
};

struct Metrics {
    std::vector<EpochStats> trace;
    std::map<int, Scalar> val_topk;
    std::map<int, Scalar> test_topk;
    Scalar train_acc = 0;
};

// Anchors and references fitted without labels (K-means by default), then a
// linear classifier trained on the frozen embeddings.
std::pair<Model, Metrics> train_unsupervised(const Dataset& dataset, const TrainConfig& config);

// End-to-end training from an unsupervised initialization: Adam on the
// references and anchors with the classifier frozen, interleaved with
// deterministic full-batch classifier refits; the learning rate halves after
// `lr_halving_patience` epochs without validation-loss decrease and the
// best-validation checkpoint is returned.
std::pair<Model, Metrics> train_supervised(const Dataset& dataset, const TrainConfig& config,
                                           const Model& init);

struct EvalResult {
    std::map<int, Scalar> topk;   // multiclass
    Scalar auroc = 0;             // multilabel, averaged over labels
    Scalar auprc = 0;
};

EvalResult evaluate(const Model& model, const Dataset& dataset, const std::vector<int>& topk);

// One flattened embedding row per sample.
Mat embed_dataset(const Dataset& dataset, const NystromMap& nystrom, const ReferenceBank& bank);

// Fraction of rows whose label scores within the k best (ties broken by
// class index).
Scalar topk_accuracy(const Mat& scores, const std::vector<int>& labels, int k);
Scalar roc_auc(const std::vector<Scalar>& scores, const std::vector<int>& truth);
Scalar average_precision(const std::vector<Scalar>& scores, const std::vector<int>& truth);

// Versioned little-endian container ("OTKE0001"): dimension header, kernel
// spec, epsilon, positional bandwidth, iteration/pooling settings, anchors,
// whitener, references, classifier.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace otke
