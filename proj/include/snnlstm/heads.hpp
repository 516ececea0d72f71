// Output heads (softmax classifier, linear regressor), their losses and
// gradients, and the perplexity metric.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "snnlstm/numerics.hpp"

namespace snnlstm {

constexpr double kProbFloor = 1e-12;

struct SoftmaxHead {
    Matrix w_y;  // output x hidden
    Vector b_y;
};

struct LinearHead {
    Matrix w_y;
    Vector b_y;
};

inline Vector head_logits(const Matrix& w_y, const Vector& b_y, const Vector& h) {
    Vector z = matvec(w_y, h);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += b_y[i];
    return z;
}

inline Vector softmax(const Vector& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double z : logits) mx = std::max(mx, z);
    Vector p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

inline Vector softmax_forward(const SoftmaxHead& head, const Vector& h) {
    return softmax(head_logits(head.w_y, head.b_y, h));
}

inline Vector linear_forward(const LinearHead& head, const Vector& h) {
    return head_logits(head.w_y, head.b_y, h);
}

// dL/dy for cross entropy through softmax: y - y_true.
inline Vector ce_output_grad(const Vector& y, const Vector& y_true) {
    if (y.size() != y_true.size()) throw shape_error("ce_output_grad: length mismatch");
    Vector g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] - y_true[i];
    return g;
}

// Cross entropy of a predicted distribution against a one-hot target,
// floored so early-training zeros do not produce infinities.
inline double cross_entropy(const Vector& y, std::size_t true_id) {
    if (true_id >= y.size()) throw shape_error("cross_entropy: label out of range");
    return -std::log(std::max(y[true_id], kProbFloor));
}

struct HeadBackwardResult {
    Vector dL_dh;
    Matrix dw_y;  // outer product dL_dy (x) h
    Vector db_y;
};

inline HeadBackwardResult head_backward(const Matrix& w_y, const Vector& h,
                                        const Vector& dL_dy) {
    if (w_y.rows != dL_dy.size() || w_y.cols != h.size())
        throw shape_error("head_backward: w_y " + w_y.shape_str() + " vs dL_dy " +
                          std::to_string(dL_dy.size()) + ", h " + std::to_string(h.size()));
    HeadBackwardResult out;
    out.dL_dh = matvec_transposed(w_y, dL_dy);
    out.dw_y = Matrix(w_y.rows, w_y.cols);
    for (std::size_t r = 0; r < w_y.rows; ++r) {
        const double g = dL_dy[r];
        if (g == 0.0) continue;
        double* row = out.dw_y.row(r);
        for (std::size_t c = 0; c < w_y.cols; ++c) row[c] = g * h[c];
    }
    out.db_y = dL_dy;
    return out;
}

// loss = 1/2 sum_t ||y_t - target_t||^2; grad at t is y_t - target_t.
inline std::pair<double, std::vector<Vector>> mse_loss_and_grad(
    const std::vector<Vector>& y_seq, const std::vector<Vector>& target_seq) {
    if (y_seq.size() != target_seq.size())
        throw shape_error("mse_loss_and_grad: sequence length mismatch");
    double loss = 0.0;
    std::vector<Vector> grads(y_seq.size());
    for (std::size_t t = 0; t < y_seq.size(); ++t) {
        if (y_seq[t].size() != target_seq[t].size())
            throw shape_error("mse_loss_and_grad: step length mismatch");
        Vector g(y_seq[t].size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = y_seq[t][i] - target_seq[t][i];
            loss += 0.5 * g[i] * g[i];
        }
        grads[t] = std::move(g);
    }
    return {loss, std::move(grads)};
}

// exp(-(1/T) sum log p_t), computed in log space. A zero probability yields
// +inf rather than an exception so callers can report it.
inline double perplexity(const std::vector<double>& prob_of_observed) {
    if (prob_of_observed.empty()) throw std::domain_error("perplexity: empty sequence");
    double log_sum = 0.0;
    for (double p : prob_of_observed) {
        if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
        log_sum += std::log(p);
    }
    return std::exp(-log_sum / static_cast<double>(prob_of_observed.size()));
}

}  // namespace snnlstm
