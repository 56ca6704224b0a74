// Acceptance runner: one line per criterion, nonzero exit on any failure.

#include "otke/cli_commands.hpp"
#include "otke/selfcheck.hpp"
#include "otke/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

using namespace otke;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_index = 0;

void report(const std::string& name, bool pass, const std::string& detail, double seconds) {
    ++g_index;
    if (!pass) ++g_failures;
    std::printf("[%d/8] %-22s %s (%s, %.1fs)\n", g_index, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
}

void report(const SuiteResult& result, double budget_seconds) {
    report(result.name, result.pass && result.seconds < budget_seconds, result.detail,
           result.seconds);
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

TrainConfig desk_config(std::uint64_t seed) {
    TrainConfig config;
    config.p = 10;
    config.q = 1;
    config.k = 32;
    config.epsilon = 0.5;
    // Motif vectors act as pre-embedded features, so the set kernel is linear,
    // and the one-support run degrades the pipeline to exact mean pooling.
    config.kernel = KernelSpec::linear();
    config.lambda = 1e-4;
    config.seed = seed;
    config.epochs = 10;
    config.batch_size = 32;
    config.pool_cap = 20000;
    return config;
}

void desk_scale_experiment() {
    const auto start = std::chrono::steady_clock::now();
    Scalar otke_total = 0, mean_total = 0, sup_total = 0;
    const int seeds = 5;
    for (int seed = 0; seed < seeds; ++seed) {
        SynthSpec spec;  // C=5, d=16, n in [20,100], 3 motifs/class, 2-5 per sample
        spec.seed = static_cast<std::uint64_t>(seed);
        const Dataset data = generate_synthetic(spec, 1000, 200, 500);

        TrainConfig config = desk_config(static_cast<std::uint64_t>(seed));
        const auto [unsup, unsup_metrics] = train_unsupervised(data, config);
        otke_total += unsup_metrics.test_topk.at(1);

        TrainConfig pooled = config;
        pooled.p = 1;  // a single support makes the plan the row marginal: mean pooling
        const auto [mean_model, mean_metrics] = train_unsupervised(data, pooled);
        mean_total += mean_metrics.test_topk.at(1);

        const auto [sup, sup_metrics] = train_supervised(data, config, unsup);
        sup_total += sup_metrics.test_topk.at(1);
    }
    const Scalar otke_acc = 100.0 * otke_total / seeds;
    const Scalar mean_acc = 100.0 * mean_total / seeds;
    const Scalar sup_acc = 100.0 * sup_total / seeds;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "otke=%.2f mean_pool=%.2f supervised=%.2f (gap=%.2f, sup_drop=%.2f)", otke_acc,
                  mean_acc, sup_acc, otke_acc - mean_acc, otke_acc - sup_acc);
    const bool pass =
        otke_acc - mean_acc >= 5.0 && sup_acc >= otke_acc - 0.5 && seconds < 600.0;
    report("desk-scale", pass, detail, seconds);
}

void determinism_experiment() {
    const auto start = std::chrono::steady_clock::now();
    const fs::path root = fs::path("acceptance_work");
    fs::remove_all(root);
    bool pass = true;
    std::string detail = "synth, fit, embed, gram byte-identical across reruns";
    try {
        std::ostringstream sink;
        std::string ckpt[2], metrics[2], emb[2], gram_csv[2], train_file[2];
        for (int run = 0; run < 2; ++run) {
            const fs::path dir = root / ("run" + std::to_string(run));
            fs::create_directories(dir);
            cli::SynthArgs synth;
            synth.spec.classes = 3;
            synth.spec.motif_dim = 8;
            synth.spec.n_min = 8;
            synth.spec.n_max = 20;
            synth.spec.seed = 17;
            synth.m_train = 60;
            synth.m_val = 20;
            synth.m_test = 20;
            synth.out_dir = dir.string();
            cli::run_synth(synth, sink);
            train_file[run] = (dir / "train.jsonl").string();

            cli::FitArgs fit;
            fit.data_dir = dir.string();
            fit.out_checkpoint = (dir / "model.ckpt").string();
            fit.config.p = 3;
            fit.config.q = 1;
            fit.config.k = 8;
            fit.config.kernel = KernelSpec::gaussian(2.5);
            fit.config.seed = 17;
            fit.config.classifier_max_iters = 300;
            cli::run_fit(fit, sink);
            ckpt[run] = fit.out_checkpoint;
            metrics[run] = fit.out_checkpoint + ".metrics.csv";

            cli::EmbedArgs embed;
            embed.checkpoint = fit.out_checkpoint;
            embed.data_path = (dir / "test.jsonl").string();
            embed.out_path = (dir / "emb.csv").string();
            cli::run_embed(embed, sink);
            emb[run] = embed.out_path;

            cli::GramArgs gram;
            gram.data_path = (dir / "test.jsonl").string();
            gram.out_path = (dir / "gram.csv").string();
            gram.kind = "k_z";
            gram.checkpoint = fit.out_checkpoint;
            cli::run_gram(gram, sink);
            gram_csv[run] = gram.out_path;
        }
        pass = file_bytes(train_file[0]) == file_bytes(train_file[1]) &&
               file_bytes(ckpt[0]) == file_bytes(ckpt[1]) &&
               file_bytes(metrics[0]) == file_bytes(metrics[1]) &&
               file_bytes(emb[0]) == file_bytes(emb[1]) &&
               file_bytes(gram_csv[0]) == file_bytes(gram_csv[1]);
        if (!pass) detail = "outputs differ between identically seeded reruns";
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    fs::remove_all(root);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report("determinism", pass, detail, seconds);
}

}  // namespace

int main() {
    report(check_sinkhorn_feasibility(200), 10.0);
    report(check_kernel_identity(100), 10.0);

    {  // pairwise bound plus the aggregate barycenter bounds share one line
        const SuiteResult lemma = check_lemma_bound(100);
        const SuiteResult agg = check_barycenter_bounds(20);
        SuiteResult joint;
        joint.name = "transport-bounds";
        joint.pass = lemma.pass && agg.pass;
        joint.detail = lemma.detail + "; " + agg.detail;
        joint.seconds = lemma.seconds + agg.seconds;
        report(joint, 30.0);
    }

    report(check_gradients(42), 60.0);
    report(check_gram_psd_and_cost(50), 60.0);
    report(check_multireference(), 60.0);
    desk_scale_experiment();
    determinism_experiment();

    if (g_failures > 0) {
        std::printf("acceptance: %d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("acceptance: all criteria passed\n");
    return 0;
}
