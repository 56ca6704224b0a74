#include "otke/data_io.hpp"

#include "otke/kernels.hpp"
#include "otke/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

namespace otke {

using nlohmann::json;

Dataset Dataset::subset(Split which) const {
    Dataset out;
    out.num_classes = num_classes;
    out.mode = mode;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (split[i] == which) {
            out.samples.push_back(samples[i]);
            out.split.push_back(which);
        }
    }
    return out;
}

void Dataset::validate() const {
    if (samples.size() != split.size()) throw Error("dataset: split tags out of sync");
    const Index d = dim();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const FeatureSet& s = samples[i];
        if (s.features.rows() < 1) {
            throw EmptySample("dataset: sample " + std::to_string(i) + " is empty");
        }
        if (s.features.cols() != d) {
            throw InconsistentDimension("dataset: sample " + std::to_string(i) +
                                        " has feature width " + std::to_string(s.features.cols()) +
                                        ", expected " + std::to_string(d));
        }
        if (mode == LabelMode::multiclass && (s.label < 0 || s.label >= num_classes)) {
            throw Error("dataset: sample " + std::to_string(i) + " label out of range");
        }
    }
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_jsonl: cannot open " + path);

    Dataset out;
    std::string line;
    Index line_no = 0;
    Index d = -1;
    int max_label = -1;
    bool multilabel = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("load_jsonl: line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!rec.contains("label") || !rec.contains("features")) {
            throw ParseError("load_jsonl: line " + std::to_string(line_no) +
                             ": record needs 'label' and 'features'");
        }
        const json& feats = rec["features"];
        if (!feats.is_array() || feats.empty()) {
            throw EmptySample("load_jsonl: line " + std::to_string(line_no) + ": empty features");
        }
        const Index n = static_cast<Index>(feats.size());
        const Index width = static_cast<Index>(feats[0].size());
        if (width < 1) {
            throw EmptySample("load_jsonl: line " + std::to_string(line_no) + ": empty feature row");
        }
        if (d < 0) d = width;
        if (width != d) {
            throw InconsistentDimension("load_jsonl: line " + std::to_string(line_no) +
                                        ": feature width " + std::to_string(width) + " != " +
                                        std::to_string(d));
        }
        FeatureSet s;
        s.features.resize(n, d);
        for (Index i = 0; i < n; ++i) {
            const json& row = feats[static_cast<std::size_t>(i)];
            if (static_cast<Index>(row.size()) != d) {
                throw InconsistentDimension("load_jsonl: line " + std::to_string(line_no) +
                                            ": ragged feature rows");
            }
            for (Index j = 0; j < d; ++j) s.features(i, j) = row[static_cast<std::size_t>(j)];
        }
        const json& label = rec["label"];
        if (label.is_array()) {
            multilabel = true;
            for (const auto& l : label) {
                s.labels.push_back(l.get<int>());
                max_label = std::max(max_label, s.labels.back());
            }
        } else {
            s.label = label.get<int>();
            max_label = std::max(max_label, s.label);
        }
        out.samples.push_back(std::move(s));
        out.split.push_back(Split::train);
    }
    out.mode = multilabel ? LabelMode::multilabel : LabelMode::multiclass;
    out.num_classes = max_label + 1;
    out.validate();
    return out;
}

void write_jsonl(const Dataset& dataset, Split which, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw Error("write_jsonl: cannot open " + path);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        if (dataset.split[i] != which) continue;
        const FeatureSet& s = dataset.samples[i];
        json rec;
        if (dataset.mode == LabelMode::multilabel) {
            rec["label"] = s.labels;
        } else {
            rec["label"] = s.label;
        }
        json rows = json::array();
        for (Index r = 0; r < s.features.rows(); ++r) {
            json row = json::array();
            for (Index c = 0; c < s.features.cols(); ++c) row.push_back(s.features(r, c));
            rows.push_back(std::move(row));
        }
        rec["features"] = std::move(rows);
        outf << rec.dump() << '\n';
    }
}

std::vector<char> load_alphabet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_alphabet: cannot open " + path);
    std::vector<char> alphabet;
    std::set<char> seen;
    std::string line;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line.size() != 1) {
            throw ParseError("load_alphabet: line " + std::to_string(line_no) +
                             ": tokens must be single characters");
        }
        if (seen.insert(line[0]).second) alphabet.push_back(line[0]);
    }
    if (alphabet.empty()) throw ParseError("load_alphabet: no tokens in " + path);
    return alphabet;
}

Dataset load_sequences(const std::string& path, const std::string& alphabet_path, int kmer_size) {
    const std::vector<char> alphabet = load_alphabet(alphabet_path);
    std::ifstream in(path);
    if (!in) throw Error("load_sequences: cannot open " + path);

    std::vector<std::pair<int, std::string>> records;
    std::string line;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            try {
                records.emplace_back(std::stoi(line.substr(1)), "");
            } catch (const std::exception&) {
                throw ParseError("load_sequences: line " + std::to_string(line_no) +
                                 ": header needs an integer label");
            }
        } else {
            if (records.empty()) {
                throw ParseError("load_sequences: line " + std::to_string(line_no) +
                                 ": sequence body before any '>' header");
            }
            records.back().second += line;
        }
    }

    Dataset out;
    int max_label = -1;
    for (std::size_t i = 0; i < records.size(); ++i) {
        FeatureSet s;
        s.label = records[i].first;
        max_label = std::max(max_label, s.label);
        try {
            s.features = kmer_features(records[i].second, alphabet, kmer_size);
        } catch (const SequenceTooShort&) {
            throw SequenceTooShort("load_sequences: sequence " + std::to_string(i) +
                                   " is shorter than the kmer size");
        } catch (const UnknownToken& e) {
            throw UnknownToken("load_sequences: sequence " + std::to_string(i) + ": " + e.what());
        }
        out.samples.push_back(std::move(s));
        out.split.push_back(Split::train);
    }
    out.num_classes = max_label + 1;
    out.validate();
    return out;
}

std::vector<PaddedBatch> make_batches(const Dataset& dataset, Index batch_size, std::uint64_t seed,
                                      bool shuffle) {
    if (batch_size < 1) throw Error("make_batches: batch size must be >= 1");
    std::vector<Index> order(dataset.samples.size());
    std::iota(order.begin(), order.end(), Index{0});
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(order);
    }

    std::vector<PaddedBatch> out;
    const Index d = dataset.dim();
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        PaddedBatch batch;
        Index n_max = 0;
        for (std::size_t i = start; i < stop; ++i) {
            n_max = std::max(n_max, dataset.samples[order[i]].features.rows());
        }
        batch.n_max = n_max;
        batch.features = Mat::Zero(static_cast<Index>(stop - start) * n_max, d);
        for (std::size_t i = start; i < stop; ++i) {
            const FeatureSet& s = dataset.samples[order[i]];
            batch.features.middleRows(static_cast<Index>(i - start) * n_max, s.features.rows()) =
                s.features;
            batch.lengths.push_back(s.features.rows());
            batch.labels.push_back(s.label);
        }
        out.push_back(std::move(batch));
    }
    return out;
}

void SynthSpec::validate() const {
    if (classes < 1 || motifs_per_class < 1 || motif_dim < 1) {
        throw Error("synth: classes, motifs and dimension must be positive");
    }
    if (motif_count_min < 1 || motif_count_max < motif_count_min) {
        throw Error("synth: invalid motif count range");
    }
    if (n_min < 1 || n_max < n_min) throw Error("synth: invalid length range");
    if (n_min < motif_count_max) throw Error("synth: n_min must cover the max motif count");
    if (background_std < 0 || motif_std < 0) throw Error("synth: stds must be nonnegative");
}

Dataset generate_synthetic(const SynthSpec& spec, Index m_train, Index m_val, Index m_test) {
    spec.validate();
    Rng rng(spec.seed);

    // Class motifs: random directions scaled to a fixed radius.
    std::vector<Mat> motifs(spec.classes);
    for (int c = 0; c < spec.classes; ++c) {
        Mat m = random_gaussian_matrix(rng, spec.motifs_per_class, spec.motif_dim);
        for (Index r = 0; r < m.rows(); ++r) {
            const Scalar norm = m.row(r).norm();
            m.row(r) *= spec.motif_radius / (norm > 0 ? norm : 1.0);
        }
        motifs[c] = std::move(m);
    }

    Dataset out;
    const Index total = m_train + m_val + m_test;
    for (Index i = 0; i < total; ++i) {
        const int c = static_cast<int>(rng.uniform_index(spec.classes));
        const Index n = spec.n_min + static_cast<Index>(rng.uniform_index(spec.n_max - spec.n_min + 1));
        const int count = spec.motif_count_min +
                          static_cast<int>(rng.uniform_index(spec.motif_count_max -
                                                             spec.motif_count_min + 1));
        FeatureSet s;
        s.label = c;
        s.features = random_gaussian_matrix(rng, n, spec.motif_dim, spec.background_std);
        std::vector<Index> positions(n);
        std::iota(positions.begin(), positions.end(), Index{0});
        rng.shuffle(positions);
        for (int j = 0; j < count; ++j) {
            const Index row = positions[j];
            const Index which = static_cast<Index>(rng.uniform_index(spec.motifs_per_class));
            s.features.row(row) =
                motifs[c].row(which) +
                random_gaussian_matrix(rng, 1, spec.motif_dim, spec.motif_std).row(0);
        }
        out.samples.push_back(std::move(s));
        out.split.push_back(i < m_train ? Split::train
                                        : (i < m_train + m_val ? Split::val : Split::test));
    }
    out.num_classes = spec.classes;
    out.validate();
    return out;
}

}  // namespace otke
