#pragma once

#include "otke/data_io.hpp"
#include "otke/train.hpp"

#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace otke::cli {

// Exit codes shared by every subcommand:
// 0 success, 1 check failure, 2 usage, 3 I/O or data, 4 divergence,
// 5 shape mismatch, 6 size guard.
int exit_code_for(const std::exception& error);

struct SynthArgs {
    SynthSpec spec;
    Index m_train = 1000;
    Index m_val = 200;
    Index m_test = 500;
    std::string out_dir;
};
int run_synth(const SynthArgs& args, std::ostream& out);

struct FitArgs {
    bool supervised = false;
    std::string data_dir;
    std::string init_checkpoint;
    std::string out_checkpoint;
    std::string metrics_path;  // defaults to out_checkpoint + ".metrics.csv"
    TrainConfig config;
};
int run_fit(const FitArgs& args, std::ostream& out);

struct EmbedArgs {
    std::string checkpoint;
    std::string data_path;
    std::string out_path;
};
int run_embed(const EmbedArgs& args, std::ostream& out);

struct GramArgs {
    std::string data_path;
    std::string out_path;
    std::string kind = "k_ot";
    std::string checkpoint;  // k_z embeds the sets through this model
    KernelSpec spec = KernelSpec::gaussian(1.0);
    Scalar epsilon = 0.5;
    int iters = 100;
};
int run_gram(const GramArgs& args, std::ostream& out);

struct CheckArgs {
    std::string suite = "all";
    int trials = 0;  // 0 = suite default
};
int run_check(const CheckArgs& args, std::ostream& out);

// train/val/test.jsonl from one directory, merged with split tags.
Dataset load_split_dir(const std::string& dir);

// Ordered key/value pairs from an INI-style file ("key = value", comments
// start with '#' or ';'). Malformed lines raise ParseError with the line.
std::vector<std::pair<std::string, std::string>> read_ini(const std::string& path);

}  // namespace otke::cli
