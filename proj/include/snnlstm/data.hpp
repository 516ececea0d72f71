// Dataset loaders and encoders: rate-coded spike trains, one-hot symbols,
// IDX images, text corpora, feature CSVs, the toy sinusoid, and the
// word-embedding pretrainer.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "snnlstm/adam.hpp"
#include "snnlstm/numerics.hpp"

namespace snnlstm {

// Time-major binary tensor: T steps x batch x features.
struct SpikeTrain {
    std::size_t steps = 0;
    std::size_t batch = 0;
    std::size_t features = 0;
    std::vector<double> data;  // values strictly in {0,1}

    SpikeTrain() = default;
    SpikeTrain(std::size_t t, std::size_t b, std::size_t f)
        : steps(t), batch(b), features(f), data(t * b * f, 0.0) {}

    double& at(std::size_t t, std::size_t b, std::size_t f) {
        return data[(t * batch + b) * features + f];
    }
    double at(std::size_t t, std::size_t b, std::size_t f) const {
        return data[(t * batch + b) * features + f];
    }

    Vector step_slice(std::size_t t, std::size_t b) const {
        Vector v(features);
        const double* src = data.data() + (t * batch + b) * features;
        std::copy(src, src + features, v.begin());
        return v;
    }
};

// Each value in [0,1] is a per-step spike probability (rate coding).
inline SpikeTrain bernoulli_spike_encode(const Vector& values, std::size_t steps,
                                         RngStream& rng) {
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::domain_error("bernoulli_spike_encode: value outside [0,1]");
    SpikeTrain train(steps, 1, values.size());
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t f = 0; f < values.size(); ++f)
            train.at(t, 0, f) = rng.uniform() < values[f] ? 1.0 : 0.0;
    return train;
}

inline Vector one_hot_encode(std::size_t id, std::size_t n) {
    if (id >= n) throw std::out_of_range("one_hot_encode: id >= n");
    Vector v(n, 0.0);
    v[id] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// IDX (MNIST-style) container

struct IdxImages {
    std::size_t count = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // count*rows*cols

    const std::uint8_t* image(std::size_t i) const { return pixels.data() + i * rows * cols; }
};

struct IdxDataset {
    IdxImages images;
    std::vector<std::uint8_t> labels;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const char* what) {
    std::uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw format_error(std::string("idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

inline IdxImages load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("idx: cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (detail::read_be32(in, "magic") != 0x00000803u)
        throw format_error("idx: bad image magic in " + path);
    IdxImages out;
    out.count = detail::read_be32(in, "count");
    out.rows = detail::read_be32(in, "rows");
    out.cols = detail::read_be32(in, "cols");
    const std::uint64_t body =
        std::uint64_t(out.count) * std::uint64_t(out.rows) * std::uint64_t(out.cols);
    if (file_size < 16 || body != file_size - 16)
        throw format_error("idx: header/body size mismatch in " + path);
    out.pixels.resize(out.count * out.rows * out.cols);
    if (!in.read(reinterpret_cast<char*>(out.pixels.data()),
                 static_cast<std::streamsize>(out.pixels.size())))
        throw format_error("idx: truncated pixel data in " + path);
    return out;
}

inline std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("idx: cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (detail::read_be32(in, "magic") != 0x00000801u)
        throw format_error("idx: bad label magic in " + path);
    const std::uint32_t count = detail::read_be32(in, "count");
    if (file_size < 8 || count != file_size - 8)
        throw format_error("idx: header/body size mismatch in " + path);
    std::vector<std::uint8_t> labels(count);
    if (!in.read(reinterpret_cast<char*>(labels.data()),
                 static_cast<std::streamsize>(labels.size())))
        throw format_error("idx: truncated label data in " + path);
    return labels;
}

inline IdxDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    IdxDataset ds;
    ds.images = load_idx_images(images_path);
    ds.labels = load_idx_labels(labels_path);
    if (ds.images.count != ds.labels.size())
        throw format_error("idx: image/label count mismatch (" +
                           std::to_string(ds.images.count) + " vs " +
                           std::to_string(ds.labels.size()) + ")");
    return ds;
}

inline void write_idx_images(const std::string& path, const IdxImages& imgs) {
    std::ofstream out(path, std::ios::binary);
    auto be32 = [&](std::uint32_t v) {
        std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 8), std::uint8_t(v)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    be32(0x00000803u);
    be32(static_cast<std::uint32_t>(imgs.count));
    be32(static_cast<std::uint32_t>(imgs.rows));
    be32(static_cast<std::uint32_t>(imgs.cols));
    out.write(reinterpret_cast<const char*>(imgs.pixels.data()),
              static_cast<std::streamsize>(imgs.pixels.size()));
    if (!out) throw format_error("idx: failed writing " + path);
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    auto be32 = [&](std::uint32_t v) {
        std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 8), std::uint8_t(v)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    be32(0x00000801u);
    be32(static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw format_error("idx: failed writing " + path);
}

// ---------------------------------------------------------------------------
// Text corpora

struct Vocab {
    std::unordered_map<std::string, std::size_t> to_id;
    std::vector<std::string> to_symbol;

    std::size_t size() const { return to_symbol.size(); }

    std::size_t add(const std::string& sym) {
        auto it = to_id.find(sym);
        if (it != to_id.end()) return it->second;
        const std::size_t id = to_symbol.size();
        to_id.emplace(sym, id);
        to_symbol.push_back(sym);
        return id;
    }

    std::size_t id_of(const std::string& sym) const {
        auto it = to_id.find(sym);
        if (it == to_id.end()) throw std::out_of_range("vocab: unknown symbol '" + sym + "'");
        return it->second;
    }
};

struct CharCorpus {
    Vocab vocab;
    std::vector<std::size_t> ids;
};

// Lowercased character stream; ids assigned by first occurrence.
inline CharCorpus char_corpus_from_text(const std::string& text) {
    if (text.empty()) throw format_error("char corpus: empty text");
    CharCorpus c;
    c.ids.reserve(text.size());
    for (char raw : text) {
        const char ch = static_cast<char>(
            std::tolower(static_cast<unsigned char>(raw)));
        c.ids.push_back(c.vocab.add(std::string(1, ch)));
    }
    return c;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open text file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CharCorpus char_corpus(const std::string& path, std::size_t max_chars = 0) {
    std::string text = read_text_file(path);
    if (max_chars > 0 && text.size() > max_chars) text.resize(max_chars);
    return char_corpus_from_text(text);
}

struct WordCorpus {
    Vocab vocab;
    std::vector<std::size_t> ids;
};

inline WordCorpus word_corpus_from_text(const std::string& text) {
    WordCorpus c;
    std::string tok;
    auto flush = [&] {
        if (!tok.empty()) {
            c.ids.push_back(c.vocab.add(tok));
            tok.clear();
        }
    };
    for (char raw : text) {
        const unsigned char u = static_cast<unsigned char>(raw);
        if (std::isalnum(u) || raw == '\'')
            tok.push_back(static_cast<char>(std::tolower(u)));
        else
            flush();
    }
    flush();
    if (c.ids.empty()) throw format_error("word corpus: no tokens");
    return c;
}

// ---------------------------------------------------------------------------
// Word embeddings

struct EmbeddingTable {
    Vocab vocab;
    std::size_t dim = 0;
    Matrix vectors;  // vocab.size() x dim

    Vector row(std::size_t id) const {
        Vector v(dim);
        std::copy(vectors.row(id), vectors.row(id) + dim, v.begin());
        return v;
    }

    // Index of the embedding closest in Euclidean distance.
    std::size_t nearest(const Vector& query) const {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < vectors.rows; ++i) {
            double d = 0.0;
            const double* r = vectors.row(i);
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = r[k] - query[k];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }
};

// One-hidden-layer predictive network over (context word -> center word)
// pairs, window of 5 on each side, full softmax output. The embedding for a
// word is its row of the input-to-hidden weights.
inline EmbeddingTable train_word_embeddings(const WordCorpus& corpus, std::size_t window,
                                            std::size_t dim, std::size_t epochs,
                                            RngStream& rng, double lr = 0.05) {
    const std::size_t V = corpus.vocab.size();
    if (V < 2) throw std::invalid_argument("train_word_embeddings: vocab size < 2");
    Matrix w1(V, dim);   // input one-hot -> hidden (rows are embeddings)
    Matrix w2(dim, V);   // hidden -> logits
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : w1.data) v = rng.normal() * scale;
    for (double& v : w2.data) v = rng.normal() * scale;

    const std::size_t N = corpus.ids.size();
    Vector logits(V), probs(V), dhid(dim);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t center = 0; center < N; ++center) {
            const std::size_t lo = center >= window ? center - window : 0;
            const std::size_t hi = std::min(N - 1, center + window);
            for (std::size_t pos = lo; pos <= hi; ++pos) {
                if (pos == center) continue;
                const std::size_t ctx = corpus.ids[pos];
                const std::size_t tgt = corpus.ids[center];
                const double* hid = w1.row(ctx);
                for (std::size_t j = 0; j < V; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < dim; ++k) acc += hid[k] * w2(k, j);
                    logits[j] = acc;
                }
                const Vector p = softmax(logits);
                // dlogits = p - onehot(tgt)
                std::fill(dhid.begin(), dhid.end(), 0.0);
                for (std::size_t j = 0; j < V; ++j) {
                    const double d = p[j] - (j == tgt ? 1.0 : 0.0);
                    for (std::size_t k = 0; k < dim; ++k) {
                        dhid[k] += d * w2(k, j);
                        w2(k, j) -= lr * d * hid[k];
                    }
                }
                double* hid_mut = w1.row(ctx);
                for (std::size_t k = 0; k < dim; ++k) hid_mut[k] -= lr * dhid[k];
            }
        }
    }
    EmbeddingTable table;
    table.vocab = corpus.vocab;
    table.dim = dim;
    table.vectors = std::move(w1);
    return table;
}

// ---------------------------------------------------------------------------
// Toy sinusoid

struct SinusoidDataset {
    Vector values;        // raw f samples, the regression target
    Vector probabilities; // values / 2, in [0,1]
    std::size_t input_size = 0;
    std::size_t steps = 0;

    // Fresh Bernoulli sample: input_size parallel spike channels per step,
    // each firing with the step's probability.
    std::vector<Vector> encode(RngStream& rng) const {
        std::vector<Vector> inputs(steps, Vector(input_size, 0.0));
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t f = 0; f < input_size; ++f)
                inputs[t][f] = rng.uniform() < probabilities[t] ? 1.0 : 0.0;
        return inputs;
    }
};

// f(x) = 0.5 sin(3x) + 0.5 sin(6x) + 1 on a uniform grid over [0, 2*pi),
// normalized to [0,1] by its analytic bound of 2.
inline SinusoidDataset sinusoid_dataset(std::size_t steps = 100,
                                        std::size_t input_size = 20) {
    SinusoidDataset ds;
    ds.steps = steps;
    ds.input_size = input_size;
    ds.values.resize(steps);
    ds.probabilities.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double x =
            2.0 * 3.14159265358979323846 * static_cast<double>(t) / static_cast<double>(steps);
        const double f = 0.5 * std::sin(3.0 * x) + 0.5 * std::sin(6.0 * x) + 1.0;
        ds.values[t] = f;
        ds.probabilities[t] = f / 2.0;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Feature CSV (header row; `label` column plus numeric feature columns)

struct FeatureDataset {
    std::vector<Vector> vectors;
    std::vector<std::size_t> labels;
};

inline FeatureDataset load_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error("csv: empty file " + path);

    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    const std::vector<std::string> header = split(line);
    std::ptrdiff_t label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == "label") label_col = static_cast<std::ptrdiff_t>(c);
    if (label_col < 0) throw format_error("csv: no `label` column in " + path);

    FeatureDataset ds;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size())
            throw format_error("csv: ragged row at line " + std::to_string(lineno));
        Vector vec;
        vec.reserve(header.size() - 1);
        std::size_t label = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::size_t consumed = 0;
            double value;
            try {
                value = std::stod(cells[c], &consumed);
            } catch (const std::exception&) {
                throw format_error("csv: non-numeric cell at line " + std::to_string(lineno));
            }
            if (consumed != cells[c].size())
                throw format_error("csv: non-numeric cell at line " + std::to_string(lineno));
            if (static_cast<std::ptrdiff_t>(c) == label_col)
                label = static_cast<std::size_t>(value);
            else
                vec.push_back(value);
        }
        ds.vectors.push_back(std::move(vec));
        ds.labels.push_back(label);
    }
    if (ds.vectors.empty()) throw format_error("csv: no data rows in " + path);

    // Min-max normalize each feature column to [0,1].
    const std::size_t n_feat = ds.vectors.front().size();
    for (std::size_t f = 0; f < n_feat; ++f) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const Vector& v : ds.vectors) {
            lo = std::min(lo, v[f]);
            hi = std::max(hi, v[f]);
        }
        const double span = hi - lo;
        for (Vector& v : ds.vectors) v[f] = span > 0.0 ? (v[f] - lo) / span : 0.0;
    }
    return ds;
}

// Zero-pads the vector to chunk*chunks and splits it into per-step inputs.
inline std::vector<Vector> chunk_features(const Vector& vec, std::size_t chunk = 48,
                                          std::size_t chunks = 8) {
    if (vec.size() > chunk * chunks)
        throw std::invalid_argument("chunk_features: vector longer than chunk*chunks");
    std::vector<Vector> out(chunks, Vector(chunk, 0.0));
    for (std::size_t k = 0; k < vec.size(); ++k) out[k / chunk][k % chunk] = vec[k];
    return out;
}

}  // namespace snnlstm
