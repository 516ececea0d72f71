// One recurrent spiking layer plus an output head, with the combined
// loss/gradient computation used by training and by the gradient checker.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "snnlstm/heads.hpp"
#include "snnlstm/lstm.hpp"
#include "snnlstm/numerics.hpp"
#include "snnlstm/spike.hpp"

namespace snnlstm {

enum class HeadKind { softmax, linear };

// Loss placement: per-step for language modeling and the toy task, final
// timestep only for sequence classification.
enum class LossMode { every_step, final_step };

struct Model {
    LayerParams layer;
    Matrix w_y;
    Vector b_y;
    HeadKind head = HeadKind::softmax;

    std::size_t input_size() const { return layer.input_size; }
    std::size_t hidden_size() const { return layer.hidden_size; }
    std::size_t output_size() const { return w_y.rows; }
};

// Layer weights first (init_params order), then w_y row-major; biases zero.
inline Model init_model(std::size_t input_size, std::size_t hidden_size,
                        std::size_t output_size, HeadKind head, RngStream& rng) {
    if (output_size == 0) throw std::invalid_argument("init_model: output_size must be >= 1");
    Model m;
    m.layer = init_params(input_size, hidden_size, rng);
    // Head weights start at zero so an untrained softmax model is exactly
    // uniform over the classes; the recurrent layer carries the random init.
    m.w_y = Matrix(output_size, hidden_size);
    m.b_y = Vector(output_size, 0.0);
    m.head = head;
    return m;
}

// Targets for one sequence: class ids when the head is softmax, real vectors
// when it is linear. Only the fields matching the head are read.
struct SequenceTargets {
    std::vector<std::size_t> class_ids;   // per step, or a single final label
    std::vector<Vector> values;           // per step
};

struct SequenceResult {
    double loss = 0.0;
    GradientSet grads;
    std::vector<Vector> outputs;  // head outputs per step (probabilities or values)
};

// Forward + loss + full backward for one sequence. Head cotangents at each
// loss-bearing step are y - y_true (the same form for both head types).
inline SequenceResult model_sequence_backward(const Model& m, const SurrogateConfig& cfg,
                                              const std::vector<Vector>& inputs,
                                              const SequenceTargets& targets,
                                              LossMode loss_mode) {
    const std::size_t T = inputs.size();
    const std::size_t hidden = m.hidden_size();
    std::vector<StepCache> caches = forward_sequence(m.layer, cfg, inputs);

    SequenceResult res;
    res.grads = GradientSet::zeros(m.input_size(), hidden, m.output_size());
    res.outputs.resize(T);
    std::vector<Vector> dL_dh_seq(T, Vector(hidden, 0.0));

    auto step_has_loss = [&](std::size_t t) {
        return loss_mode == LossMode::every_step || t + 1 == T;
    };

    for (std::size_t t = 0; t < T; ++t) {
        const Vector& h = caches[t].h;
        Vector dL_dy;
        if (m.head == HeadKind::softmax) {
            Vector y = softmax(head_logits(m.w_y, m.b_y, h));
            if (step_has_loss(t)) {
                const std::size_t label = loss_mode == LossMode::final_step
                                              ? targets.class_ids.at(0)
                                              : targets.class_ids.at(t);
                res.loss += cross_entropy(y, label);
                dL_dy = y;
                dL_dy[label] -= 1.0;
            }
            res.outputs[t] = std::move(y);
        } else {
            Vector y = head_logits(m.w_y, m.b_y, h);
            if (step_has_loss(t)) {
                const Vector& tgt = loss_mode == LossMode::final_step
                                        ? targets.values.at(0)
                                        : targets.values.at(t);
                if (tgt.size() != y.size()) throw shape_error("target length mismatch");
                dL_dy.resize(y.size());
                for (std::size_t k = 0; k < y.size(); ++k) {
                    dL_dy[k] = y[k] - tgt[k];
                    res.loss += 0.5 * dL_dy[k] * dL_dy[k];
                }
            }
            res.outputs[t] = std::move(y);
        }
        if (!dL_dy.empty()) {
            HeadBackwardResult hb = head_backward(m.w_y, h, dL_dy);
            dL_dh_seq[t] = std::move(hb.dL_dh);
            for (std::size_t k = 0; k < res.grads.w_y.data.size(); ++k)
                res.grads.w_y.data[k] += hb.dw_y.data[k];
            for (std::size_t k = 0; k < res.grads.b_y.size(); ++k)
                res.grads.b_y[k] += hb.db_y[k];
        }
    }

    GradientSet layer_grads = bptt(m.layer, cfg, caches, dL_dh_seq, m.output_size());
    // Merge: bptt leaves the head tables zero, so a plain add is exact.
    res.grads.add_scaled(layer_grads, 1.0);
    return res;
}

}  // namespace snnlstm
