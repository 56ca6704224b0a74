#include "otke/cli_commands.hpp"

#include "otke/exact_kernels.hpp"
#include "otke/selfcheck.hpp"

#include <cstdio>
#include <fstream>

namespace otke::cli {

namespace {

std::string num(Scalar v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_metrics(const Metrics& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("metrics: cannot open " + path);
    out << "epoch,train_loss,val_loss,val_acc,lr\n";
    for (const EpochStats& s : metrics.trace) {
        out << s.epoch << ',' << num(s.train_loss) << ',' << num(s.val_loss) << ','
            << num(s.val_acc) << ',' << num(s.lr) << '\n';
    }
    out << "final,train_acc," << num(metrics.train_acc) << '\n';
    for (const auto& [k, v] : metrics.val_topk) out << "final,val_top" << k << ',' << num(v) << '\n';
    for (const auto& [k, v] : metrics.test_topk)
        out << "final,test_top" << k << ',' << num(v) << '\n';
}

void print_epochs(const Metrics& metrics, std::ostream& out) {
    for (const EpochStats& s : metrics.trace) {
        out << "epoch=" << s.epoch << " train_loss=" << num(s.train_loss)
            << " val_acc=" << num(s.val_acc) << " lr=" << num(s.lr) << '\n';
    }
}

}  // namespace

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const TooLarge*>(&error)) return 6;
    if (dynamic_cast<const DimensionMismatch*>(&error) ||
        dynamic_cast<const InconsistentDimension*>(&error)) {
        return 5;
    }
    if (dynamic_cast<const NonFinite*>(&error)) return 4;
    if (dynamic_cast<const Error*>(&error)) return 3;  // I/O, parse, data problems
    return 3;
}

std::vector<std::pair<std::string, std::string>> read_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    auto trim = [](std::string s) {
        const auto from = s.find_first_not_of(" \t\r");
        const auto to = s.find_last_not_of(" \t\r");
        return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.resize(comment);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config: line " + std::to_string(line_no) +
                             ": expected 'key = value'");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParseError("config: line " + std::to_string(line_no) + ": empty key or value");
        }
        out.emplace_back(key, value);
    }
    return out;
}

Dataset load_split_dir(const std::string& dir) {
    Dataset merged;
    bool first = true;
    for (const auto& [name, split] :
         {std::pair<const char*, Split>{"train.jsonl", Split::train},
          std::pair<const char*, Split>{"val.jsonl", Split::val},
          std::pair<const char*, Split>{"test.jsonl", Split::test}}) {
        const std::string path = dir + "/" + name;
        std::ifstream probe(path);
        if (!probe) {
            if (split != Split::train) continue;  // val/test files are optional
            throw Error("load_split_dir: missing " + path);
        }
        probe.close();
        Dataset part = load_jsonl(path);
        if (first) {
            merged.mode = part.mode;
            first = false;
        } else if (merged.mode != part.mode) {
            throw ParseError("load_split_dir: mixed label modes across split files");
        }
        for (std::size_t i = 0; i < part.samples.size(); ++i) {
            merged.samples.push_back(std::move(part.samples[i]));
            merged.split.push_back(split);
        }
        merged.num_classes = std::max(merged.num_classes, part.num_classes);
    }
    merged.validate();
    return merged;
}

int run_synth(const SynthArgs& args, std::ostream& out) {
    const Dataset data = generate_synthetic(args.spec, args.m_train, args.m_val, args.m_test);
    write_jsonl(data, Split::train, args.out_dir + "/train.jsonl");
    write_jsonl(data, Split::val, args.out_dir + "/val.jsonl");
    write_jsonl(data, Split::test, args.out_dir + "/test.jsonl");
    out << "synth m=" << data.size() << " C=" << data.num_classes << " seed=" << args.spec.seed
        << '\n';
    return 0;
}

int run_fit(const FitArgs& args, std::ostream& out) {
    const Dataset data = load_split_dir(args.data_dir);
    const std::string metrics_path =
        args.metrics_path.empty() ? args.out_checkpoint + ".metrics.csv" : args.metrics_path;

    Model model;
    Metrics metrics;
    if (args.supervised) {
        Model init;
        if (!args.init_checkpoint.empty()) {
            init = load_checkpoint(args.init_checkpoint);
        } else {
            std::tie(init, std::ignore) = train_unsupervised(data, args.config);
        }
        std::tie(model, metrics) = train_supervised(data, args.config, init);
    } else {
        std::tie(model, metrics) = train_unsupervised(data, args.config);
    }
    print_epochs(metrics, out);
    save_checkpoint(model, args.out_checkpoint);
    write_metrics(metrics, metrics_path);
    if (!metrics.val_topk.empty()) out << "final val_top1=" << num(metrics.val_topk.at(1)) << '\n';
    if (!metrics.test_topk.empty()) {
        out << "final test_top1=" << num(metrics.test_topk.at(1)) << '\n';
    }
    return 0;
}

int run_embed(const EmbedArgs& args, std::ostream& out) {
    const Model model = load_checkpoint(args.checkpoint);
    const Dataset data = load_jsonl(args.data_path);
    if (data.dim() != model.nystrom.input_dim()) {
        throw DimensionMismatch("embed: dataset width " + std::to_string(data.dim()) +
                                " does not match checkpoint width " +
                                std::to_string(model.nystrom.input_dim()));
    }
    const Mat embeddings = embed_dataset(data, model.nystrom, model.bank);
    std::ofstream file(args.out_path);
    if (!file) throw Error("embed: cannot open " + args.out_path);
    for (Index i = 0; i < embeddings.rows(); ++i) {
        for (Index j = 0; j < embeddings.cols(); ++j) {
            file << (j ? "," : "") << num(embeddings(i, j));
        }
        file << '\n';
    }
    out << "embed m=" << embeddings.rows() << " width=" << embeddings.cols() << '\n';
    return 0;
}

int run_gram(const GramArgs& args, std::ostream& out) {
    const Dataset data = load_jsonl(args.data_path);
    std::vector<Mat> sets;
    sets.reserve(data.samples.size());
    for (const FeatureSet& s : data.samples) sets.push_back(s.features);

    GramMatrix result;
    if (args.kind == "k_z") {
        if (args.checkpoint.empty()) throw Error("gram: k_z needs --ckpt");
        const Model model = load_checkpoint(args.checkpoint);
        if (data.dim() != model.nystrom.input_dim()) {
            throw DimensionMismatch("gram: dataset width does not match checkpoint");
        }
        for (Mat& s : sets) s = embed_features(model.nystrom, s);
        result = gram(sets, GramKind::k_z, KernelSpec::linear(), model.bank.epsilon,
                      model.bank.sinkhorn_iters, &model.bank.refs);
        out << "gram kind=k_z m=" << result.values.rows()
            << " min_eig=" << num(min_eigenvalue(result.values)) << '\n';
    } else {
        GramKind kind;
        if (args.kind == "k_ot") {
            kind = GramKind::k_ot;
        } else if (args.kind == "mean_pool") {
            kind = GramKind::mean_pool;
        } else if (args.kind == "flatten") {
            kind = GramKind::flatten;
        } else {
            throw Error("gram: unknown kind " + args.kind);
        }
        result = gram(sets, kind, args.spec, args.epsilon, args.iters);
        out << "gram kind=" << args.kind << " m=" << result.values.rows() << '\n';
    }
    write_gram_csv(result, args.out_path);
    return 0;
}

int run_check(const CheckArgs& args, std::ostream& out) {
    std::vector<SuiteResult> results;
    if (args.suite == "all") {
        results = run_all_checks();
    } else {
        results.push_back(run_named_check(args.suite, args.trials));
    }
    bool all_pass = true;
    for (const SuiteResult& r : results) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s %s %s (%.2fs)", r.pass ? "PASS" : "FAIL",
                      r.name.c_str(), r.detail.c_str(), r.seconds);
        out << line << '\n';
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

}  // namespace otke::cli
