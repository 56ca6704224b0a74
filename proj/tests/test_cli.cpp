#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otke/cli_commands.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace otke;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("cli_work") / name) {
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path.string() : (path / child).string();
    }
};

cli::SynthArgs tiny_synth(const TempDir& dir, std::uint64_t seed) {
    cli::SynthArgs args;
    args.spec.classes = 3;
    args.spec.motif_dim = 6;
    args.spec.n_min = 8;
    args.spec.n_max = 16;
    args.spec.seed = seed;
    args.m_train = 45;
    args.m_val = 15;
    args.m_test = 15;
    args.out_dir = dir.str();
    return args;
}

cli::FitArgs tiny_fit(const TempDir& data_dir, const TempDir& out_dir) {
    cli::FitArgs fit;
    fit.data_dir = data_dir.str();
    fit.out_checkpoint = out_dir.str("model.ckpt");
    fit.config.p = 3;
    fit.config.q = 1;
    fit.config.k = 6;
    fit.config.kernel = KernelSpec::gaussian(2.5);
    fit.config.lambda = 1e-5;
    fit.config.seed = 11;
    fit.config.classifier_max_iters = 500;
    return fit;
}

}  // namespace

TEST_CASE("synth writes three deterministic split files") {
    TempDir a("synth_a"), b("synth_b");
    std::ostringstream out_a, out_b;
    CHECK(cli::run_synth(tiny_synth(a, 7), out_a) == 0);
    CHECK(cli::run_synth(tiny_synth(b, 7), out_b) == 0);
    CHECK(out_a.str() == "synth m=75 C=3 seed=7\n");
    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
        CHECK(file_bytes(a.str(name)) == file_bytes(b.str(name)));
    }
    TempDir c("synth_c");
    std::ostringstream out_c;
    cli::run_synth(tiny_synth(c, 8), out_c);
    CHECK(file_bytes(a.str("train.jsonl")) != file_bytes(c.str("train.jsonl")));
}

TEST_CASE("fit produces byte-identical checkpoints and metrics under one seed") {
    TempDir data("fit_data");
    std::ostringstream sink;
    cli::run_synth(tiny_synth(data, 3), sink);

    TempDir out_a("fit_a"), out_b("fit_b");
    std::ostringstream log_a, log_b;
    CHECK(cli::run_fit(tiny_fit(data, out_a), log_a) == 0);
    CHECK(cli::run_fit(tiny_fit(data, out_b), log_b) == 0);
    CHECK(file_bytes(out_a.str("model.ckpt")) == file_bytes(out_b.str("model.ckpt")));
    CHECK(file_bytes(out_a.str("model.ckpt.metrics.csv")) ==
          file_bytes(out_b.str("model.ckpt.metrics.csv")));
    CHECK(log_a.str() == log_b.str());
    CHECK(log_a.str().find("epoch=0") != std::string::npos);
    CHECK(log_a.str().find("final test_top1=") != std::string::npos);
}

TEST_CASE("supervised fit resumes from a checkpoint") {
    TempDir data("sup_data");
    std::ostringstream sink;
    cli::run_synth(tiny_synth(data, 5), sink);
    TempDir out("sup_out");
    cli::FitArgs unsup = tiny_fit(data, out);
    CHECK(cli::run_fit(unsup, sink) == 0);

    cli::FitArgs sup = unsup;
    sup.supervised = true;
    sup.init_checkpoint = unsup.out_checkpoint;
    sup.out_checkpoint = out.str("model_sup.ckpt");
    sup.config.epochs = 1;
    std::ostringstream log;
    CHECK(cli::run_fit(sup, log) == 0);
    CHECK(log.str().find("epoch=1") != std::string::npos);
    CHECK(fs::exists(out.str("model_sup.ckpt")));
}

TEST_CASE("embed writes one row per sample and repeats exactly") {
    TempDir data("embed_data");
    std::ostringstream sink;
    cli::run_synth(tiny_synth(data, 9), sink);
    TempDir out("embed_out");
    cli::FitArgs fit = tiny_fit(data, out);
    cli::run_fit(fit, sink);

    cli::EmbedArgs embed;
    embed.checkpoint = fit.out_checkpoint;
    embed.data_path = data.str("test.jsonl");
    embed.out_path = out.str("emb_a.csv");
    CHECK(cli::run_embed(embed, sink) == 0);
    embed.out_path = out.str("emb_b.csv");
    CHECK(cli::run_embed(embed, sink) == 0);
    const std::string bytes = file_bytes(out.str("emb_a.csv"));
    CHECK(bytes == file_bytes(out.str("emb_b.csv")));
    CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 15);

    // Width mismatch between data and checkpoint is a shape error (exit 5).
    cli::SynthArgs other = tiny_synth(data, 9);
    other.spec.motif_dim = 4;
    TempDir narrow("embed_narrow");
    other.out_dir = narrow.str();
    cli::run_synth(other, sink);
    embed.data_path = narrow.str("test.jsonl");
    try {
        cli::run_embed(embed, sink);
        FAIL("expected a shape error");
    } catch (const std::exception& e) {
        CHECK(cli::exit_code_for(e) == 5);
    }
}

TEST_CASE("gram exports kernels and reports the smallest eigenvalue for k_z") {
    TempDir data("gram_data");
    std::ostringstream sink;
    cli::SynthArgs synth = tiny_synth(data, 13);
    synth.m_train = 10;
    synth.m_val = 0;
    synth.m_test = 0;
    cli::run_synth(synth, sink);
    TempDir out("gram_out");

    cli::GramArgs gram;
    gram.data_path = data.str("train.jsonl");
    gram.out_path = out.str("gram_ot.csv");
    gram.kind = "k_ot";
    gram.spec = KernelSpec::gaussian(3.0);
    gram.epsilon = 0.5;
    gram.iters = 50;
    CHECK(cli::run_gram(gram, sink) == 0);
    const std::string header = file_bytes(out.str("gram_ot.csv")).substr(0, 30);
    CHECK(header.find("# kind=k_ot m=10") != std::string::npos);

    cli::FitArgs fit = tiny_fit(data, out);
    fit.config.classifier_max_iters = 50;
    cli::run_fit(fit, sink);
    gram.kind = "k_z";
    gram.checkpoint = fit.out_checkpoint;
    gram.out_path = out.str("gram_kz.csv");
    std::ostringstream log;
    CHECK(cli::run_gram(gram, log) == 0);
    CHECK(log.str().find("min_eig=") != std::string::npos);
}

TEST_CASE("named check suites run and pass") {
    std::ostringstream log;
    cli::CheckArgs check;
    check.suite = "identity";
    check.trials = 20;
    CHECK(cli::run_check(check, log) == 0);
    CHECK(log.str().rfind("PASS", 0) == 0);
}

TEST_CASE("exit codes sort exception families") {
    CHECK(cli::exit_code_for(TooLarge("")) == 6);
    CHECK(cli::exit_code_for(DimensionMismatch("")) == 5);
    CHECK(cli::exit_code_for(InconsistentDimension("")) == 5);
    CHECK(cli::exit_code_for(NonFinite("")) == 4);
    CHECK(cli::exit_code_for(ParseError("")) == 3);
    CHECK(cli::exit_code_for(UnknownToken("")) == 3);
    CHECK(cli::exit_code_for(Error("")) == 3);
}

TEST_CASE("split directories require the training file") {
    TempDir empty("no_train");
    CHECK_THROWS_AS(cli::load_split_dir(empty.str()), Error);
}

TEST_CASE("shipped presets only use known fit keys") {
    const std::set<std::string> known{
        "mode",        "kernel",   "sigma",          "epsilon",
        "p",           "q",        "k",              "sinkhorn-iters",
        "sigma-pos",   "lambda",   "epochs",         "lr",
        "patience",    "batch-size", "seed",         "ridge",
        "anchors",     "refs",     "pooling",        "schedule",
        "refit-period", "classifier-max-iters", "classifier-tol", "pool-cap"};
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(OTKE_PRESET_DIR)) {
        if (entry.path().extension() != ".ini") continue;
        ++seen;
        for (const auto& [key, value] : cli::read_ini(entry.path().string())) {
            INFO(entry.path().string() << ": " << key);
            CHECK(known.count(key) == 1);
            CHECK(!value.empty());
        }
    }
    CHECK(seen >= 5);
}

TEST_CASE("ini files parse key-value pairs and reject malformed lines") {
    TempDir dir("ini");
    {
        std::ofstream out(dir.str("good.ini"));
        out << "# comment\n"
            << "epsilon = 0.5\n"
            << "kernel = gaussian  ; trailing note\n"
            << "\n"
            << "p=10\n";
    }
    const auto pairs = cli::read_ini(dir.str("good.ini"));
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0] == std::pair<std::string, std::string>{"epsilon", "0.5"});
    CHECK(pairs[1] == std::pair<std::string, std::string>{"kernel", "gaussian"});
    CHECK(pairs[2] == std::pair<std::string, std::string>{"p", "10"});
    {
        std::ofstream out(dir.str("bad.ini"));
        out << "epsilon 0.5\n";
    }
    CHECK_THROWS_AS(cli::read_ini(dir.str("bad.ini")), ParseError);
    CHECK_THROWS_AS(cli::read_ini(dir.str("missing.ini")), Error);
}
