#pragma once

#include "otke/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace otke {

enum class Split { train, val, test };
enum class LabelMode { multiclass, multilabel };

struct FeatureSet {
    Mat features;             // n x d, n >= 1
    int label = -1;           // multiclass
    std::vector<int> labels;  // multilabel
};

struct Dataset {
    std::vector<FeatureSet> samples;
    std::vector<Split> split;  // parallel to samples
    int num_classes = 0;
    LabelMode mode = LabelMode::multiclass;

    Index size() const { return static_cast<Index>(samples.size()); }
    Index dim() const { return samples.empty() ? 0 : samples.front().features.cols(); }
    Dataset subset(Split which) const;
    void validate() const;
};

// Batch of sets stacked into one dense (batch * n_max) x d block; rows past
// each sample's length are zero padding.
struct PaddedBatch {
    Mat features;
    Index n_max = 0;
    std::vector<Index> lengths;
    std::vector<int> labels;

    Index batch_size() const { return static_cast<Index>(lengths.size()); }
    auto sample(Index i) const { return features.middleRows(i * n_max, lengths[i]); }
};

// One JSON object per line: {"label": <int or [ints]>, "features": [[..]..]}.
Dataset load_jsonl(const std::string& path);
void write_jsonl(const Dataset& dataset, Split which, const std::string& path);

// Header lines "><label>" followed by sequence body lines; the alphabet file
// lists one single-character token per line. Sequences are converted to
// normalized k-mer one-hot rows.
Dataset load_sequences(const std::string& path, const std::string& alphabet_path, int kmer_size);
std::vector<char> load_alphabet(const std::string& path);

std::vector<PaddedBatch> make_batches(const Dataset& dataset, Index batch_size, std::uint64_t seed,
                                      bool shuffle);

struct SynthSpec {
    int classes = 5;
    int motifs_per_class = 3;
    Index motif_dim = 16;
    int motif_count_min = 2;
    int motif_count_max = 5;
    Index n_min = 20;
    Index n_max = 100;
    Scalar background_std = 1.0;
    Scalar motif_std = 0.1;
    Scalar motif_radius = 5.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Labeled sets of background noise with a few class-motif rows inserted at
// random positions; fully determined by the seed.
Dataset generate_synthetic(const SynthSpec& spec, Index m_train, Index m_val, Index m_test);

}  // namespace otke
