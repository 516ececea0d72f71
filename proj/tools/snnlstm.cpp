// Command-line harness: train / eval / generate / sweep-alpha / gradcheck /
// encode-preview.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure,
// 4 gradcheck failure.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snnlstm/checkpoint.hpp"
#include "snnlstm/gradcheck.hpp"
#include "snnlstm/train.hpp"

namespace {

using namespace snnlstm;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides
    // flag overrides; empty/negative = not given
    std::string checkpoint, metrics;
    long long seed = -1, iterations = -1;
    double alpha1 = -1, alpha2 = -1, temperature = -1;
};

ExperimentConfig build_config(const CommonOpts& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = parse_config_file(o.config_path);
    for (const std::string& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw config_error("--set expects key=value, got " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (o.iterations >= 0) cfg.iterations = static_cast<std::size_t>(o.iterations);
    if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
    if (!o.metrics.empty()) cfg.metrics = o.metrics;
    if (o.alpha1 > 0) cfg.surrogate.alpha1 = o.alpha1;
    if (o.alpha2 > 0) cfg.surrogate.alpha2 = o.alpha2;
    if (o.temperature > 0) cfg.temperature = o.temperature;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    cmd->add_option("--set", o.sets, "config override key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--iterations", o.iterations, "optimizer iterations");
    cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
    cmd->add_option("--metrics", o.metrics, "metrics CSV path");
    cmd->add_option("--alpha1", o.alpha1, "surrogate width for sigma_1'");
    cmd->add_option("--alpha2", o.alpha2, "surrogate width for sigma_2'");
    cmd->add_option("--temperature", o.temperature, "sampling temperature");
}

int run_train(const CommonOpts& o, int repeats) {
    ExperimentConfig base = build_config(o);
    std::vector<double> finals;
    for (int r = 0; r < std::max(repeats, 1); ++r) {
        ExperimentConfig cfg = base;
        if (repeats > 1) {
            cfg.seed = base.seed + static_cast<std::uint64_t>(r);
            cfg.checkpoint = base.checkpoint + ".seed" + std::to_string(cfg.seed);
            cfg.metrics = base.metrics + ".seed" + std::to_string(cfg.seed);
        }
        Trainer trainer(cfg);
        trainer.train();
        const double ev = trainer.evaluate();
        finals.push_back(ev);
        std::cout << "seed " << cfg.seed << ": final eval metric " << ev
                  << ", checkpoint " << cfg.checkpoint << "\n";
    }
    if (repeats > 1) {
        double mean = 0;
        for (double v : finals) mean += v;
        mean /= finals.size();
        double var = 0;
        for (double v : finals) var += (v - mean) * (v - mean);
        var /= finals.size();
        std::cout << "eval metric over " << finals.size() << " seeds: mean " << mean
                  << " +- " << std::sqrt(var) << "\n";
    }
    return 0;
}

int run_eval(const CommonOpts& o) {
    ExperimentConfig cfg = build_config(o);
    Trainer trainer(cfg);
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    trainer.load_model(ck.model);
    std::cout << "eval metric: " << trainer.evaluate() << "\n";
    return 0;
}

int run_generate(const CommonOpts& o, const std::string& seed_text, std::size_t length) {
    ExperimentConfig cfg = build_config(o);
    Trainer trainer(cfg);
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    trainer.load_model(ck.model);
    std::cout << trainer.generate(seed_text, length, cfg.seed) << "\n";
    return 0;
}

int run_sweep(const CommonOpts& o, const std::vector<double>& alpha1s,
              const std::vector<double>& alpha2s) {
    if (alpha1s.empty() || alpha2s.empty())
        throw config_error("sweep-alpha: alpha lists must be non-empty");
    ExperimentConfig base = build_config(o);
    for (double a1 : alpha1s)
        for (double a2 : alpha2s) {
            ExperimentConfig cfg = base;
            cfg.surrogate.alpha1 = a1;
            cfg.surrogate.alpha2 = a2;
            char tag[64];
            std::snprintf(tag, sizeof tag, ".a1_%g.a2_%g", a1, a2);
            cfg.metrics = base.metrics + tag + ".csv";
            cfg.checkpoint = base.checkpoint + tag;
            Trainer trainer(cfg);
            trainer.train();
            std::cout << "alpha1=" << a1 << " alpha2=" << a2
                      << ": final train loss " << trainer.last_train_loss()
                      << ", curve " << cfg.metrics << "\n";
        }
    return 0;
}

int run_gradcheck(std::size_t max_input, std::size_t max_hidden, std::size_t max_T,
                  std::size_t trials, std::uint64_t seed, const std::string& corrupt_table) {
    RngStream rng(seed);
    double worst = 0.0;
    std::string worst_table = "-";
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t input = 1 + rng.below(max_input);
        const std::size_t hidden = 1 + rng.below(max_hidden);
        const std::size_t T = 1 + rng.below(max_T);
        const bool use_softmax = trial % 2 == 0;
        const std::size_t output = use_softmax ? 2 + rng.below(3) : 1 + rng.below(2);

        Model m = init_model(input, hidden, output,
                             use_softmax ? HeadKind::softmax : HeadKind::linear, rng);
        // init_model leaves the head at zero; gradcheck wants a generic one
        for (double& v : m.w_y.data) v = rng.normal();
        for (double& v : m.b_y) v = rng.normal() * 0.1;
        SurrogateConfig cfg;
        std::vector<Vector> inputs(T, Vector(input, 0.0));
        for (auto& x : inputs)
            for (double& v : x) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        SequenceTargets tgt;
        LossMode mode = use_softmax && trial % 4 == 2 ? LossMode::final_step
                                                      : LossMode::every_step;
        if (use_softmax) {
            const std::size_t n = mode == LossMode::final_step ? 1 : T;
            for (std::size_t t = 0; t < n; ++t) tgt.class_ids.push_back(rng.below(output));
        } else {
            for (std::size_t t = 0; t < T; ++t) {
                Vector v(output);
                for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
                tgt.values.push_back(std::move(v));
            }
        }

        SequenceResult impl = model_sequence_backward(m, cfg, inputs, tgt, mode);
        if (!corrupt_table.empty()) {
            if (corrupt_table == "w_f,h") impl.grads.f.w_h.data[0] += 1e-3;
            else if (corrupt_table == "w_y") impl.grads.w_y.data[0] += 1e-3;
            else throw config_error("unknown --corrupt-table: " + corrupt_table);
        }
        GradientSet ref = reference_gradient(m, cfg, inputs, tgt, mode);
        CompareReport rep = compare_gradients(impl.grads, ref);
        if (rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_table = rep.by_table.empty() ? "-" : rep.by_table.front().table;
        }
        std::cout << "trial " << trial << ": input=" << input << " hidden=" << hidden
                  << " T=" << T << " head=" << (use_softmax ? "softmax" : "linear")
                  << " max_rel_err=" << rep.max_rel_err << "\n";
    }
    std::cout << "gradcheck: " << trials << " trials, worst max_rel_err=" << worst
              << " (table " << worst_table << ")\n";
    if (trials > 0 && worst > 1e-10) {
        std::cout << "gradcheck: FAILED (tolerance 1e-10)\n";
        return 4;
    }
    std::cout << "gradcheck: OK\n";
    return 0;
}

int run_encode_preview(const CommonOpts& o, std::size_t max_steps) {
    ExperimentConfig cfg = build_config(o);
    Trainer trainer(cfg);
    const std::vector<Vector> inputs = trainer.preview_encoding();
    const std::size_t T = std::min(max_steps, inputs.size());
    for (std::size_t t = 0; t < T; ++t) {
        std::string line;
        for (double v : inputs[t]) line += v > 0.5 ? '#' : '.';
        std::cout << line << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM spiking network trainer"};
    app.require_subcommand(1);

    CommonOpts train_o, eval_o, gen_o, sweep_o, prev_o;
    int repeats = 1;
    auto* train_cmd = app.add_subcommand("train", "train a model from a config");
    add_common(train_cmd, train_o);
    train_cmd->add_option("--repeats", repeats, "train over consecutive seeds, report mean +- std");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, eval_o);

    std::string seed_text = " ";
    std::size_t gen_length = 100;
    auto* gen_cmd = app.add_subcommand("generate", "sample text from a trained LM checkpoint");
    add_common(gen_cmd, gen_o);
    gen_cmd->add_option("--seed-text", seed_text, "text used to warm up the state");
    gen_cmd->add_option("--length", gen_length, "number of symbols to generate");

    std::vector<double> alpha1s, alpha2s;
    auto* sweep_cmd = app.add_subcommand("sweep-alpha", "train one model per (alpha1, alpha2)");
    add_common(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--alpha1-list", alpha1s, "alpha1 values")->required();
    sweep_cmd->add_option("--alpha2-list", alpha2s, "alpha2 values")->required();

    std::size_t gc_input = 4, gc_hidden = 6, gc_T = 5, gc_trials = 20;
    std::uint64_t gc_seed = 7;
    std::string corrupt_table;
    auto* gc_cmd = app.add_subcommand("gradcheck", "compare BPTT against the reference engine");
    gc_cmd->add_option("--max-input", gc_input, "max input size");
    gc_cmd->add_option("--max-hidden", gc_hidden, "max hidden size");
    gc_cmd->add_option("--max-steps", gc_T, "max sequence length");
    gc_cmd->add_option("--trials", gc_trials, "number of random instances");
    gc_cmd->add_option("--seed", gc_seed, "RNG seed");
    gc_cmd->add_option("--corrupt-table", corrupt_table)->group("");  // test hook

    std::size_t prev_steps = 40;
    auto* prev_cmd = app.add_subcommand("encode-preview", "print a spike raster for one sample");
    add_common(prev_cmd, prev_o);
    prev_cmd->add_option("--max-steps", prev_steps, "rows to print");

    try {
        app.parse(argc, argv);
        if (*train_cmd) return run_train(train_o, repeats);
        if (*eval_cmd) return run_eval(eval_o);
        if (*gen_cmd) return run_generate(gen_o, seed_text, gen_length);
        if (*sweep_cmd) return run_sweep(sweep_o, alpha1s, alpha2s);
        if (*gc_cmd)
            return run_gradcheck(gc_input, gc_hidden, gc_T, gc_trials, gc_seed, corrupt_table);
        if (*prev_cmd) return run_encode_preview(prev_o, prev_steps);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const snnlstm::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const snnlstm::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const snnlstm::format_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
