// Experiment harness: config parsing, per-task data pipelines, the training
// loop (encode -> forward -> loss -> bptt -> adam), evaluation, text
// generation and the alpha sweep.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "snnlstm/adam.hpp"
#include "snnlstm/checkpoint.hpp"
#include "snnlstm/data.hpp"
#include "snnlstm/model.hpp"

namespace snnlstm {

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Task { toy, seq_image_classify, char_lm, word_lm, chunk_classify };

inline Task task_from_string(const std::string& s) {
    if (s == "toy") return Task::toy;
    if (s == "seq-image-classify") return Task::seq_image_classify;
    if (s == "char-lm") return Task::char_lm;
    if (s == "word-lm") return Task::word_lm;
    if (s == "chunk-classify") return Task::chunk_classify;
    throw config_error("unknown task: " + s);
}

struct ExperimentConfig {
    std::string task = "toy";
    std::uint64_t seed = 1;

    // architecture
    std::size_t input_size = 0;   // 0 = task default
    std::size_t hidden_size = 100;
    std::size_t output_size = 0;  // 0 = task default
    std::size_t steps = 0;        // sequence length T; 0 = task default

    // training
    std::size_t batch = 0;  // 0 = task default
    std::size_t iterations = 1000;
    std::size_t eval_every = 50;

    SurrogateConfig surrogate;
    double lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    // data
    std::string train_images, train_labels, test_images, test_labels;
    std::string corpus, test_corpus, feature_csv, test_feature_csv;
    std::size_t train_limit = 0;   // 0 = all
    std::size_t test_limit = 0;
    std::size_t corpus_limit = 52000;
    std::size_t eval_stream = 2000;  // LM evaluation stream length

    // word embeddings
    std::size_t embedding_dim = 100;
    std::size_t embedding_window = 5;
    std::size_t embedding_epochs = 2;
    std::string embeddings_path;

    double temperature = 1.0;

    std::string checkpoint = "model.ckpt";
    std::string metrics = "metrics.csv";

    Task task_kind() const { return task_from_string(task); }

    void set(const std::string& key, const std::string& value) {
        auto szv = [&] { return static_cast<std::size_t>(std::stoull(value)); };
        auto dv = [&] { return std::stod(value); };
        if (key == "task") task = value;
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "input_size") input_size = szv();
        else if (key == "hidden_size") hidden_size = szv();
        else if (key == "output_size") output_size = szv();
        else if (key == "steps") steps = szv();
        else if (key == "batch") batch = szv();
        else if (key == "iterations") iterations = szv();
        else if (key == "eval_every") eval_every = szv();
        else if (key == "theta1") surrogate.theta1 = dv();
        else if (key == "theta2") surrogate.theta2 = dv();
        else if (key == "alpha1") surrogate.alpha1 = dv();
        else if (key == "alpha2") surrogate.alpha2 = dv();
        else if (key == "gamma2") surrogate.gamma2 = dv();
        else if (key == "lr") lr = dv();
        else if (key == "beta1") beta1 = dv();
        else if (key == "beta2") beta2 = dv();
        else if (key == "eps") eps = dv();
        else if (key == "train_images") train_images = value;
        else if (key == "train_labels") train_labels = value;
        else if (key == "test_images") test_images = value;
        else if (key == "test_labels") test_labels = value;
        else if (key == "corpus") corpus = value;
        else if (key == "test_corpus") test_corpus = value;
        else if (key == "feature_csv") feature_csv = value;
        else if (key == "test_feature_csv") test_feature_csv = value;
        else if (key == "train_limit") train_limit = szv();
        else if (key == "test_limit") test_limit = szv();
        else if (key == "corpus_limit") corpus_limit = szv();
        else if (key == "eval_stream") eval_stream = szv();
        else if (key == "embedding_dim") embedding_dim = szv();
        else if (key == "embedding_window") embedding_window = szv();
        else if (key == "embedding_epochs") embedding_epochs = szv();
        else if (key == "embeddings_path") embeddings_path = value;
        else if (key == "temperature") temperature = dv();
        else if (key == "checkpoint") checkpoint = value;
        else if (key == "metrics") metrics = value;
        else throw config_error("unknown config key: " + key);
    }
};

// Flat key=value file; '#' starts a comment, blank lines ignored.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config: " + path);
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline double pearson_correlation(const Vector& a, const Vector& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t k = 0; k < n; ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t k = 0; k < n; ++k) {
        cov += (a[k] - ma) * (b[k] - mb);
        va += (a[k] - ma) * (a[k] - ma);
        vb += (b[k] - mb) * (b[k] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

// Append-only metrics CSV, one flushed row per report.
class MetricsWriter {
  public:
    MetricsWriter() = default;
    explicit MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw config_error("cannot open metrics file: " + path);
        out_ << "iter,wall_ms,train_loss,train_metric,eval_metric\n";
        out_.flush();
        start_ = std::chrono::steady_clock::now();
    }

    void row(std::size_t iter, double train_loss, double train_metric,
             double eval_metric) {
        const auto now = std::chrono::steady_clock::now();
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - start_).count();
        out_ << iter << ',' << ms << ',' << format(train_loss) << ','
             << format(train_metric) << ',' << format(eval_metric) << '\n';
        out_.flush();
    }

  private:
    static std::string format(double v) {
        if (!std::isfinite(v)) return "nan";
        std::ostringstream os;
        os.precision(10);
        os << v;
        return os.str();
    }
    std::ofstream out_;
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------

struct ImageSequenceSet {
    IdxDataset data;
    std::size_t limit = 0;

    std::size_t size() const { return limit ? std::min(limit, data.images.count) : data.images.count; }

    // One 28-pixel row per timestep, rate-coded; fresh draw per presentation.
    std::vector<Vector> encode(std::size_t idx, RngStream& rng) const {
        const std::size_t rows = data.images.rows, cols = data.images.cols;
        const std::uint8_t* px = data.images.image(idx);
        std::vector<Vector> seq(rows, Vector(cols, 0.0));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double p = px[r * cols + c] / 255.0;
                seq[r][c] = rng.uniform() < p ? 1.0 : 0.0;
            }
        return seq;
    }
};

class Trainer {
  public:
    explicit Trainer(ExperimentConfig cfg)
        : cfg_(std::move(cfg)),
          rng_init_(cfg_.seed),
          rng_data_(cfg_.seed ^ 0x6a09e667f3bcc909ULL) {
        cfg_.surrogate.validate();
        task_ = cfg_.task_kind();
        load_data();
        resolve_defaults();
        model_ = init_model(cfg_.input_size, cfg_.hidden_size, cfg_.output_size,
                            head_kind(), rng_init_);
        adam_ = AdamState::zeros(cfg_.input_size, cfg_.hidden_size, cfg_.output_size);
        adam_.lr = cfg_.lr;
        adam_.beta1 = cfg_.beta1;
        adam_.beta2 = cfg_.beta2;
        adam_.eps = cfg_.eps;
    }

    Model& model() { return model_; }
    const ExperimentConfig& config() const { return cfg_; }

    void load_model(const Model& m) {
        if (m.input_size() != cfg_.input_size || m.hidden_size() != cfg_.hidden_size ||
            m.output_size() != cfg_.output_size)
            throw config_error("checkpoint dimensions (" + std::to_string(m.input_size()) +
                               "," + std::to_string(m.hidden_size()) + "," +
                               std::to_string(m.output_size()) +
                               ") do not match the config");
        model_ = m;
    }

    // Runs the full loop; writes metrics rows and a final checkpoint.
    void train() {
        MetricsWriter metrics(cfg_.metrics);
        save_checkpoint(cfg_.checkpoint, model_, &adam_);  // iteration-0 state
        for (std::size_t iter = 1; iter <= cfg_.iterations; ++iter) {
            auto [loss, train_metric] = train_iteration();
            if (!std::isfinite(loss)) {
                metrics.row(iter, loss, train_metric, std::nan(""));
                throw numerical_error("non-finite training loss at iteration " +
                                      std::to_string(iter) +
                                      "; last-good checkpoint kept at " + cfg_.checkpoint);
            }
            last_train_loss_ = loss;
            if (iter % cfg_.eval_every == 0 || iter == cfg_.iterations) {
                const double ev = evaluate();
                metrics.row(iter, loss, train_metric, ev);
                save_checkpoint(cfg_.checkpoint, model_, &adam_);
            }
        }
        save_checkpoint(cfg_.checkpoint, model_, &adam_);
    }

    // One optimizer step over a batch; returns (mean loss, train metric).
    std::pair<double, double> train_iteration() {
        const std::size_t B = cfg_.batch;
        GradientSet acc = GradientSet::zeros(cfg_.input_size, cfg_.hidden_size,
                                             cfg_.output_size);
        double loss_sum = 0.0;
        double metric_sum = 0.0;
        std::size_t metric_count = 0;
        for (std::size_t b = 0; b < B; ++b) {
            auto [inputs, targets, mode] = sample_training_sequence();
            SequenceResult res = model_sequence_backward(model_, cfg_.surrogate, inputs,
                                                         targets, mode);
            loss_sum += res.loss;
            acc.add_scaled(res.grads, 1.0 / static_cast<double>(B));
            metric_sum += sequence_metric(res, targets, mode);
            ++metric_count;
        }
        adam_step(adam_, model_, acc);
        return {loss_sum / static_cast<double>(B),
                metric_sum / static_cast<double>(metric_count)};
    }

    double last_train_loss() const { return last_train_loss_; }

    // Task evaluation metric: accuracy for classification, perplexity for
    // language modeling, Pearson correlation for the toy task.
    double evaluate() {
        switch (task_) {
            case Task::toy: {
                RngStream rng(cfg_.seed ^ 0xa5a5a5a5ULL);
                const auto inputs = toy_.encode(rng);
                const auto caches = forward_sequence(model_.layer, cfg_.surrogate, inputs);
                Vector pred(caches.size());
                for (std::size_t t = 0; t < caches.size(); ++t)
                    pred[t] = linear_forward(LinearHead{model_.w_y, model_.b_y},
                                             caches[t].h)[0];
                return pearson_correlation(pred, toy_.values);
            }
            case Task::seq_image_classify:
                return classification_accuracy_images();
            case Task::chunk_classify:
                return classification_accuracy_chunks();
            case Task::char_lm:
                return lm_perplexity(eval_char_ids_);
            case Task::word_lm:
                return word_lm_perplexity();
        }
        return std::nan("");
    }

    // Autoregressive generation from a seed string (char or word task).
    std::string generate(const std::string& seed_text, std::size_t length,
                         std::uint64_t sample_seed) {
        RngStream rng(sample_seed);
        if (task_ == Task::char_lm) return generate_chars(seed_text, length, rng);
        if (task_ == Task::word_lm) return generate_words(seed_text, length);
        throw config_error("generate requires a language-modeling task");
    }

    const Vocab& vocab() const { return char_corpus_.vocab; }
    const EmbeddingTable& embeddings() const { return embeddings_; }

    std::vector<Vector> preview_encoding() {
        RngStream rng(cfg_.seed ^ 0x5bd1e995ULL);
        auto [inputs, targets, mode] = sample_training_sequence_with(rng);
        (void)targets;
        (void)mode;
        return inputs;
    }

  private:
    HeadKind head_kind() const {
        return (task_ == Task::toy || task_ == Task::word_lm) ? HeadKind::linear
                                                              : HeadKind::softmax;
    }

    void load_data() {
        switch (task_) {
            case Task::toy:
                break;
            case Task::seq_image_classify:
                if (cfg_.train_images.empty() || cfg_.train_labels.empty())
                    throw config_error("seq-image-classify requires train_images/train_labels");
                train_images_.data = load_idx(cfg_.train_images, cfg_.train_labels);
                train_images_.limit = cfg_.train_limit;
                if (!cfg_.test_images.empty()) {
                    test_images_.data = load_idx(cfg_.test_images, cfg_.test_labels);
                    test_images_.limit = cfg_.test_limit;
                }
                break;
            case Task::char_lm: {
                if (cfg_.corpus.empty()) throw config_error("char-lm requires corpus");
                char_corpus_ = char_corpus(cfg_.corpus, cfg_.corpus_limit);
                if (!cfg_.test_corpus.empty()) {
                    // Shared vocab: extend from the training corpus.
                    std::string text = read_text_file(cfg_.test_corpus);
                    eval_char_ids_.clear();
                    for (char raw : text) {
                        const char ch = static_cast<char>(
                            std::tolower(static_cast<unsigned char>(raw)));
                        eval_char_ids_.push_back(char_corpus_.vocab.add(std::string(1, ch)));
                    }
                } else {
                    // Hold out the tail of the training stream.
                    const std::size_t hold =
                        std::min(cfg_.eval_stream, char_corpus_.ids.size() / 5);
                    eval_char_ids_.assign(char_corpus_.ids.end() - hold,
                                          char_corpus_.ids.end());
                    char_corpus_.ids.resize(char_corpus_.ids.size() - hold);
                }
                break;
            }
            case Task::word_lm: {
                if (cfg_.corpus.empty()) throw config_error("word-lm requires corpus");
                std::string text = read_text_file(cfg_.corpus);
                if (cfg_.corpus_limit && text.size() > cfg_.corpus_limit)
                    text.resize(cfg_.corpus_limit);
                word_corpus_ = word_corpus_from_text(text);
                if (!cfg_.embeddings_path.empty()) {
                    std::ifstream probe(cfg_.embeddings_path, std::ios::binary);
                    if (probe) {
                        embeddings_ = load_embeddings(cfg_.embeddings_path);
                    }
                }
                if (embeddings_.dim == 0) {
                    RngStream erng(cfg_.seed ^ 0x243f6a8885a308d3ULL);
                    embeddings_ =
                        train_word_embeddings(word_corpus_, cfg_.embedding_window,
                                              cfg_.embedding_dim, cfg_.embedding_epochs, erng);
                    if (!cfg_.embeddings_path.empty())
                        save_embeddings(cfg_.embeddings_path, embeddings_);
                }
                const std::size_t hold =
                    std::min(cfg_.eval_stream, word_corpus_.ids.size() / 5);
                eval_word_ids_.assign(word_corpus_.ids.end() - hold, word_corpus_.ids.end());
                word_corpus_.ids.resize(word_corpus_.ids.size() - hold);
                break;
            }
            case Task::chunk_classify: {
                if (cfg_.feature_csv.empty())
                    throw config_error("chunk-classify requires feature_csv");
                features_ = load_feature_csv(cfg_.feature_csv);
                if (!cfg_.test_feature_csv.empty())
                    test_features_ = load_feature_csv(cfg_.test_feature_csv);
                break;
            }
        }
        toy_ = sinusoid_dataset(cfg_.steps ? cfg_.steps : 100,
                                cfg_.input_size ? cfg_.input_size : 20);
    }

    void resolve_defaults() {
        switch (task_) {
            case Task::toy:
                if (!cfg_.input_size) cfg_.input_size = 20;
                if (!cfg_.output_size) cfg_.output_size = 1;
                if (!cfg_.steps) cfg_.steps = 100;
                if (!cfg_.batch) cfg_.batch = 1;
                break;
            case Task::seq_image_classify:
                if (!cfg_.input_size) cfg_.input_size = train_images_.data.images.cols;
                if (!cfg_.output_size) cfg_.output_size = 10;
                if (!cfg_.steps) cfg_.steps = train_images_.data.images.rows;
                if (!cfg_.batch) cfg_.batch = 128;
                break;
            case Task::char_lm:
                if (!cfg_.input_size) cfg_.input_size = char_corpus_.vocab.size();
                if (!cfg_.output_size) cfg_.output_size = char_corpus_.vocab.size();
                if (!cfg_.steps) cfg_.steps = 50;
                if (!cfg_.batch) cfg_.batch = 16;
                break;
            case Task::word_lm:
                if (!cfg_.input_size) cfg_.input_size = embeddings_.dim;
                if (!cfg_.output_size) cfg_.output_size = embeddings_.dim;
                if (!cfg_.steps) cfg_.steps = 20;
                if (!cfg_.batch) cfg_.batch = 16;
                break;
            case Task::chunk_classify: {
                if (!cfg_.input_size) cfg_.input_size = 48;
                if (!cfg_.steps) cfg_.steps = 8;
                if (!cfg_.output_size) {
                    std::size_t classes = 0;
                    for (std::size_t l : features_.labels) classes = std::max(classes, l + 1);
                    cfg_.output_size = classes;
                }
                if (!cfg_.batch) cfg_.batch = 32;
                break;
            }
        }
        if (cfg_.input_size == 0 || cfg_.hidden_size == 0 || cfg_.output_size == 0 ||
            cfg_.steps == 0 || cfg_.batch == 0)
            throw config_error("all sizes must be >= 1");
    }

    std::tuple<std::vector<Vector>, SequenceTargets, LossMode>
    sample_training_sequence() {
        return sample_training_sequence_with(rng_data_);
    }

    std::tuple<std::vector<Vector>, SequenceTargets, LossMode>
    sample_training_sequence_with(RngStream& rng) {
        switch (task_) {
            case Task::toy: {
                SequenceTargets tgt;
                tgt.values.resize(toy_.steps);
                for (std::size_t t = 0; t < toy_.steps; ++t)
                    tgt.values[t] = Vector{toy_.values[t]};
                return {toy_.encode(rng), std::move(tgt), LossMode::every_step};
            }
            case Task::seq_image_classify: {
                const std::size_t idx = rng.below(train_images_.size());
                SequenceTargets tgt;
                tgt.class_ids = {train_images_.data.labels[idx]};
                return {train_images_.encode(idx, rng), std::move(tgt),
                        LossMode::final_step};
            }
            case Task::char_lm: {
                const std::size_t T = cfg_.steps;
                const std::size_t start = rng.below(char_corpus_.ids.size() - T - 1);
                std::vector<Vector> inputs(T);
                SequenceTargets tgt;
                tgt.class_ids.resize(T);
                for (std::size_t t = 0; t < T; ++t) {
                    inputs[t] =
                        one_hot_encode(char_corpus_.ids[start + t], cfg_.input_size);
                    tgt.class_ids[t] = char_corpus_.ids[start + t + 1];
                }
                return {std::move(inputs), std::move(tgt), LossMode::every_step};
            }
            case Task::word_lm: {
                const std::size_t T = cfg_.steps;
                const std::size_t start = rng.below(word_corpus_.ids.size() - T - 1);
                std::vector<Vector> inputs(T);
                SequenceTargets tgt;
                tgt.values.resize(T);
                for (std::size_t t = 0; t < T; ++t) {
                    inputs[t] = embeddings_.row(word_corpus_.ids[start + t]);
                    tgt.values[t] = embeddings_.row(word_corpus_.ids[start + t + 1]);
                }
                return {std::move(inputs), std::move(tgt), LossMode::every_step};
            }
            case Task::chunk_classify: {
                const std::size_t n = cfg_.train_limit
                                          ? std::min(cfg_.train_limit, features_.vectors.size())
                                          : features_.vectors.size();
                const std::size_t idx = rng.below(n);
                std::vector<Vector> chunks =
                    chunk_features(features_.vectors[idx], cfg_.input_size, cfg_.steps);
                // Rate-code each chunk value at its timestep.
                for (Vector& step : chunks)
                    for (double& v : step) v = rng.uniform() < v ? 1.0 : 0.0;
                SequenceTargets tgt;
                tgt.class_ids = {features_.labels[idx]};
                return {std::move(chunks), std::move(tgt), LossMode::final_step};
            }
        }
        throw config_error("unreachable task");
    }

    double sequence_metric(const SequenceResult& res, const SequenceTargets& targets,
                           LossMode mode) const {
        if (model_.head == HeadKind::softmax && mode == LossMode::final_step) {
            const Vector& y = res.outputs.back();
            const std::size_t pred =
                std::max_element(y.begin(), y.end()) - y.begin();
            return pred == targets.class_ids[0] ? 1.0 : 0.0;
        }
        if (model_.head == HeadKind::softmax) {  // per-step LM: batch perplexity
            std::vector<double> probs;
            probs.reserve(res.outputs.size());
            for (std::size_t t = 0; t < res.outputs.size(); ++t)
                probs.push_back(std::max(res.outputs[t][targets.class_ids[t]], kProbFloor));
            return perplexity(probs);
        }
        return res.loss;
    }

    double classification_accuracy_images() {
        if (test_images_.data.images.count == 0) return std::nan("");
        RngStream rng(cfg_.seed ^ 0x13198a2e03707344ULL);
        const std::size_t n = test_images_.size();
        std::size_t correct = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            const auto inputs = test_images_.encode(idx, rng);
            const auto caches = forward_sequence(model_.layer, cfg_.surrogate, inputs);
            const Vector y = softmax(head_logits(model_.w_y, model_.b_y, caches.back().h));
            const std::size_t pred = std::max_element(y.begin(), y.end()) - y.begin();
            if (pred == test_images_.data.labels[idx]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(n);
    }

    double classification_accuracy_chunks() {
        const FeatureDataset& ds =
            test_features_.vectors.empty() ? features_ : test_features_;
        RngStream rng(cfg_.seed ^ 0x13198a2e03707344ULL);
        const std::size_t n =
            cfg_.test_limit ? std::min(cfg_.test_limit, ds.vectors.size()) : ds.vectors.size();
        std::size_t correct = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            std::vector<Vector> chunks =
                chunk_features(ds.vectors[idx], cfg_.input_size, cfg_.steps);
            for (Vector& step : chunks)
                for (double& v : step) v = rng.uniform() < v ? 1.0 : 0.0;
            const auto caches = forward_sequence(model_.layer, cfg_.surrogate, chunks);
            const Vector y = softmax(head_logits(model_.w_y, model_.b_y, caches.back().h));
            const std::size_t pred = std::max_element(y.begin(), y.end()) - y.begin();
            if (pred == ds.labels[idx]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(n);
    }

    // Teacher-forced perplexity over a held-out id stream.
    double lm_perplexity(const std::vector<std::size_t>& ids) {
        if (ids.size() < 2) return std::nan("");
        Vector h(cfg_.hidden_size, 0.0), c(cfg_.hidden_size, 0.0);
        std::vector<double> probs;
        probs.reserve(ids.size() - 1);
        for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       one_hot_encode(ids[t], cfg_.input_size), h, c);
            const Vector y = softmax(head_logits(model_.w_y, model_.b_y, s.h));
            probs.push_back(std::max(y[ids[t + 1]], kProbFloor));
            h = s.h;
            c = s.c;
        }
        return perplexity(probs);
    }

    // Word-level probabilities via softmax over negative squared distances
    // between the predicted embedding and the table.
    double word_lm_perplexity() {
        const std::vector<std::size_t>& ids = eval_word_ids_;
        if (ids.size() < 2) return std::nan("");
        Vector h(cfg_.hidden_size, 0.0), c(cfg_.hidden_size, 0.0);
        std::vector<double> probs;
        const std::size_t V = embeddings_.vectors.rows;
        for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       embeddings_.row(ids[t]), h, c);
            const Vector y = head_logits(model_.w_y, model_.b_y, s.h);
            Vector neg_d2(V);
            for (std::size_t w = 0; w < V; ++w) {
                double d2 = 0.0;
                const double* e = embeddings_.vectors.row(w);
                for (std::size_t k = 0; k < y.size(); ++k)
                    d2 += (y[k] - e[k]) * (y[k] - e[k]);
                neg_d2[w] = -0.5 * d2;
            }
            const Vector p = softmax(neg_d2);
            probs.push_back(std::max(p[ids[t + 1]], kProbFloor));
            h = s.h;
            c = s.c;
        }
        return perplexity(probs);
    }

    std::string generate_chars(const std::string& seed_text, std::size_t length,
                               RngStream& rng) {
        if (seed_text.empty()) throw config_error("generate: seed text must be non-empty");
        Vector h(cfg_.hidden_size, 0.0), c(cfg_.hidden_size, 0.0);
        std::size_t last_id = 0;
        for (char raw : seed_text) {
            const char ch = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
            last_id = char_corpus_.vocab.id_of(std::string(1, ch));
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       one_hot_encode(last_id, cfg_.input_size), h, c);
            h = s.h;
            c = s.c;
        }
        std::string out = seed_text;
        for (std::size_t k = 0; k < length; ++k) {
            Vector logits = head_logits(model_.w_y, model_.b_y, h);
            for (double& z : logits) z /= cfg_.temperature;
            const Vector p = softmax(logits);
            // inverse-CDF sampling on the fixed stream
            double u = rng.uniform(), acc = 0.0;
            std::size_t pick = p.size() - 1;
            for (std::size_t j = 0; j < p.size(); ++j) {
                acc += p[j];
                if (u < acc) {
                    pick = j;
                    break;
                }
            }
            out += char_corpus_.vocab.to_symbol[pick];
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       one_hot_encode(pick, cfg_.input_size), h, c);
            h = s.h;
            c = s.c;
        }
        return out;
    }

    std::string generate_words(const std::string& seed_text, std::size_t length) {
        WordCorpus seed = word_corpus_from_text(seed_text);
        Vector h(cfg_.hidden_size, 0.0), c(cfg_.hidden_size, 0.0);
        std::string out;
        std::size_t last_id = 0;
        for (std::size_t k = 0; k < seed.ids.size(); ++k) {
            const std::string& w = seed.vocab.to_symbol[seed.ids[k]];
            last_id = embeddings_.vocab.id_of(w);  // throws on unknown word
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       embeddings_.row(last_id), h, c);
            h = s.h;
            c = s.c;
            out += (k ? " " : "") + w;
        }
        for (std::size_t k = 0; k < length; ++k) {
            const Vector y = head_logits(model_.w_y, model_.b_y, h);
            const std::size_t pick = embeddings_.nearest(y);
            out += " " + embeddings_.vocab.to_symbol[pick];
            StepCache s = forward_step(model_.layer, cfg_.surrogate,
                                       embeddings_.row(pick), h, c);
            h = s.h;
            c = s.c;
        }
        return out;
    }

  public:
    static void save_embeddings(const std::string& path, const EmbeddingTable& t) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw format_error("embeddings: cannot write " + path);
        const std::uint32_t magic = 0x31424D45u;  // "EMB1"
        const std::uint32_t vocab = static_cast<std::uint32_t>(t.vocab.size());
        const std::uint32_t dim = static_cast<std::uint32_t>(t.dim);
        out.write(reinterpret_cast<const char*>(&magic), 4);
        out.write(reinterpret_cast<const char*>(&vocab), 4);
        out.write(reinterpret_cast<const char*>(&dim), 4);
        for (const std::string& w : t.vocab.to_symbol) {
            const std::uint32_t len = static_cast<std::uint32_t>(w.size());
            out.write(reinterpret_cast<const char*>(&len), 4);
            out.write(w.data(), len);
        }
        out.write(reinterpret_cast<const char*>(t.vectors.data.data()),
                  static_cast<std::streamsize>(t.vectors.data.size() * 8));
        if (!out) throw format_error("embeddings: write failed " + path);
    }

    static EmbeddingTable load_embeddings(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw format_error("embeddings: cannot open " + path);
        auto rd = [&](void* p, std::size_t n) {
            if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
                throw format_error("embeddings: truncated " + path);
        };
        std::uint32_t magic, vocab, dim;
        rd(&magic, 4);
        rd(&vocab, 4);
        rd(&dim, 4);
        if (magic != 0x31424D45u) throw format_error("embeddings: bad magic " + path);
        EmbeddingTable t;
        t.dim = dim;
        for (std::uint32_t i = 0; i < vocab; ++i) {
            std::uint32_t len;
            rd(&len, 4);
            std::string w(len, '\0');
            rd(w.data(), len);
            t.vocab.add(w);
        }
        t.vectors = Matrix(vocab, dim);
        rd(t.vectors.data.data(), t.vectors.data.size() * 8);
        return t;
    }

  private:
    ExperimentConfig cfg_;
    Task task_ = Task::toy;
    RngStream rng_init_, rng_data_;
    Model model_;
    AdamState adam_;
    double last_train_loss_ = std::nan("");

    SinusoidDataset toy_;
    ImageSequenceSet train_images_, test_images_;
    CharCorpus char_corpus_;
    std::vector<std::size_t> eval_char_ids_;
    WordCorpus word_corpus_;
    std::vector<std::size_t> eval_word_ids_;
    EmbeddingTable embeddings_;
    FeatureDataset features_, test_features_;
};

}  // namespace snnlstm
