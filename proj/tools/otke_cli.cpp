#include "otke/cli_commands.hpp"
#include "otke/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace otke;

void add_train_flags(CLI::App* cmd, TrainConfig& config, std::string& kernel_name,
                     std::string& anchors_name, std::string& refs_name, std::string& pooling_name,
                     std::string& schedule_name, double& sigma, double& sigma_pos) {
    cmd->add_option("--epochs", config.epochs)->check(CLI::NonNegativeNumber);
    cmd->add_option("--batch-size", config.batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--lr", config.lr)->check(CLI::PositiveNumber);
    cmd->add_option("--patience", config.lr_halving_patience)->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", config.lambda)->check(CLI::NonNegativeNumber);
    cmd->add_option("--epsilon", config.epsilon)->check(CLI::PositiveNumber);
    cmd->add_option("--sinkhorn-iters", config.sinkhorn_iters)->check(CLI::NonNegativeNumber);
    cmd->add_option("--sigma-pos", sigma_pos)->check(CLI::PositiveNumber);
    cmd->add_option("--p", config.p)->check(CLI::PositiveNumber);
    cmd->add_option("--q", config.q)->check(CLI::PositiveNumber);
    cmd->add_option("--k", config.k)->check(CLI::PositiveNumber);
    cmd->add_option("--kernel", kernel_name)->check(CLI::IsMember({"gaussian", "linear"}));
    cmd->add_option("--sigma", sigma)->check(CLI::PositiveNumber);
    cmd->add_option("--ridge", config.ridge)->check(CLI::NonNegativeNumber);
    cmd->add_option("--anchors", anchors_name)->check(CLI::IsMember({"kmeans", "random"}));
    cmd->add_option("--refs", refs_name)->check(CLI::IsMember({"kmeans", "wasserstein"}));
    cmd->add_option("--pooling", pooling_name)->check(CLI::IsMember({"ot", "dot"}));
    cmd->add_option("--seed", config.seed);
    cmd->add_option("--schedule", schedule_name)->check(CLI::IsMember({"alternating", "joint"}));
    cmd->add_option("--refit-period", config.refit_period)->check(CLI::PositiveNumber);
    cmd->add_option("--classifier-max-iters", config.classifier_max_iters)
        ->check(CLI::PositiveNumber);
    cmd->add_option("--classifier-tol", config.classifier_tol)->check(CLI::PositiveNumber);
    cmd->add_option("--pool-cap", config.pool_cap)->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-transport pooling of feature sets: fit, embed, Gram export, self checks"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker cap for batched operations")
        ->check(CLI::PositiveNumber);

    cli::SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic motif dataset");
    synth_cmd->add_option("--classes", synth.spec.classes)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--motifs-per-class", synth.spec.motifs_per_class)
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--dim", synth.spec.motif_dim)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--motif-count-min", synth.spec.motif_count_min)
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--motif-count-max", synth.spec.motif_count_max)
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n-min", synth.spec.n_min)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n-max", synth.spec.n_max)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--background-std", synth.spec.background_std)
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--motif-std", synth.spec.motif_std)->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--motif-radius", synth.spec.motif_radius)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.spec.seed);
    synth_cmd->add_option("--m-train", synth.m_train)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--m-val", synth.m_val)->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--m-test", synth.m_test)->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();

    cli::FitArgs fit;
    std::string fit_mode = "unsup";
    std::string kernel_name = "gaussian", anchors_name = "kmeans", refs_name = "kmeans";
    std::string pooling_name = "ot", schedule_name = "alternating";
    double sigma = fit.config.kernel.bandwidth;
    double sigma_pos = 0;
    std::string fit_config_path;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model on train/val/test JSONL files");
    fit_cmd->add_option("--config", fit_config_path,
                        "INI config file (key = value); flags override it");
    fit_cmd->add_option("--mode", fit_mode)->check(CLI::IsMember({"unsup", "sup"}));
    fit_cmd->add_option("--data", fit.data_dir, "directory with train/val/test.jsonl")->required();
    fit_cmd->add_option("--out", fit.out_checkpoint, "checkpoint path")->required();
    fit_cmd->add_option("--init", fit.init_checkpoint, "initial checkpoint (sup mode)");
    fit_cmd->add_option("--metrics", fit.metrics_path, "metrics CSV path");
    add_train_flags(fit_cmd, fit.config, kernel_name, anchors_name, refs_name, pooling_name,
                    schedule_name, sigma, sigma_pos);

    cli::EmbedArgs embed;
    CLI::App* embed_cmd = app.add_subcommand("embed", "write one embedding row per sample");
    embed_cmd->add_option("--ckpt", embed.checkpoint)->required();
    embed_cmd->add_option("--data", embed.data_path)->required();
    embed_cmd->add_option("--out", embed.out_path)->required();

    cli::GramArgs gram;
    std::string gram_kernel = "gaussian";
    double gram_sigma = 1.0;
    CLI::App* gram_cmd = app.add_subcommand("gram", "pairwise kernel matrix as CSV");
    gram_cmd->add_option("--data", gram.data_path)->required();
    gram_cmd->add_option("--out", gram.out_path)->required();
    gram_cmd->add_option("--kind", gram.kind)
        ->check(CLI::IsMember({"k_ot", "k_z", "mean_pool", "flatten"}));
    gram_cmd->add_option("--ckpt", gram.checkpoint, "model checkpoint (k_z)");
    gram_cmd->add_option("--kernel", gram_kernel)->check(CLI::IsMember({"gaussian", "linear"}));
    gram_cmd->add_option("--sigma", gram_sigma)->check(CLI::PositiveNumber);
    gram_cmd->add_option("--epsilon", gram.epsilon)->check(CLI::NonNegativeNumber);
    gram_cmd->add_option("--iters", gram.iters)->check(CLI::PositiveNumber);

    cli::CheckArgs check;
    CLI::App* check_cmd = app.add_subcommand("check", "run the numerical verification suites");
    check_cmd->add_option("--suite", check.suite,
                          "all|sinkhorn|identity|lemma1|bounds|gradcheck|psd|multiref");
    check_cmd->add_option("--trials", check.trials)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) otke::set_max_threads(threads);

    try {
        if (synth_cmd->parsed()) return cli::run_synth(synth, std::cout);
        if (fit_cmd->parsed()) {
            if (!fit_config_path.empty()) {
                for (const auto& [key, value] : cli::read_ini(fit_config_path)) {
                    CLI::Option* option = fit_cmd->get_option_no_throw("--" + key);
                    if (option == nullptr || key == "config") {
                        std::cerr << "error: unknown config key '" << key << "' in "
                                  << fit_config_path << '\n';
                        return 2;
                    }
                    if (option->count() > 0) continue;  // explicit flags win
                    try {
                        option->add_result(value);
                        option->run_callback();
                    } catch (const CLI::Error& e) {
                        std::cerr << "error: config key '" << key << "': " << e.what() << '\n';
                        return 2;
                    }
                }
            }
            fit.supervised = fit_mode == "sup";
            fit.config.kernel = kernel_name == "linear" ? KernelSpec::linear()
                                                        : KernelSpec::gaussian(sigma);
            fit.config.anchor_method =
                anchors_name == "random" ? AnchorMethod::random : AnchorMethod::kmeans;
            fit.config.ref_method =
                refs_name == "wasserstein" ? RefMethod::wasserstein : RefMethod::kmeans;
            fit.config.pooling =
                pooling_name == "dot" ? PoolingKind::dot_product : PoolingKind::ot;
            fit.config.schedule =
                schedule_name == "joint" ? Schedule::joint : Schedule::alternating;
            if (sigma_pos > 0) fit.config.sigma_pos = sigma_pos;
            return cli::run_fit(fit, std::cout);
        }
        if (embed_cmd->parsed()) return cli::run_embed(embed, std::cout);
        if (gram_cmd->parsed()) {
            gram.spec = gram_kernel == "linear" ? KernelSpec::linear()
                                                : KernelSpec::gaussian(gram_sigma);
            return cli::run_gram(gram, std::cout);
        }
        if (check_cmd->parsed()) return cli::run_check(check, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
    return 2;
}
