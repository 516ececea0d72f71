// Adam with bias correction over all parameter tables (layer gates + head).
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "snnlstm/model.hpp"

namespace snnlstm {

struct AdamState {
    GradientSet m;  // first moments, shapes mirror the parameters
    GradientSet v;  // second moments
    std::uint64_t step = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zeros(std::size_t input, std::size_t hidden, std::size_t output) {
        AdamState s;
        s.m = GradientSet::zeros(input, hidden, output);
        s.v = GradientSet::zeros(input, hidden, output);
        return s;
    }
};

namespace detail {

inline void adam_update_span(double* theta, double* m, double* v, const double* g,
                             std::size_t n, const AdamState& s, double corr1,
                             double corr2, const char* table) {
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(g[k]))
            throw std::runtime_error(std::string("adam_step: non-finite gradient in ") + table);
        m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
        v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
        const double m_hat = m[k] / corr1;
        const double v_hat = v[k] / corr2;
        theta[k] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
}

}  // namespace detail

// In-place update of all model parameters; tables processed in the fixed
// order f, i, g, o (w_h, w_x, b_h, b_x each), then w_y, b_y.
inline void adam_step(AdamState& state, Model& model, const GradientSet& grads) {
    state.step += 1;
    const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    GateParams* gp[4] = {&model.layer.f, &model.layer.i, &model.layer.g, &model.layer.o};
    GateGrads* gm[4] = {&state.m.f, &state.m.i, &state.m.g, &state.m.o};
    GateGrads* gv[4] = {&state.v.f, &state.v.i, &state.v.g, &state.v.o};
    const GateGrads* gg[4] = {&grads.f, &grads.i, &grads.g, &grads.o};
    const char* names[4] = {"f", "i", "g", "o"};

    for (int q = 0; q < 4; ++q) {
        if (gp[q]->w_h.data.size() != gg[q]->w_h.data.size() ||
            gp[q]->w_x.data.size() != gg[q]->w_x.data.size())
            throw shape_error(std::string("adam_step: gradient shape mismatch in gate ") +
                              names[q]);
        detail::adam_update_span(gp[q]->w_h.data.data(), gm[q]->w_h.data.data(),
                                 gv[q]->w_h.data.data(), gg[q]->w_h.data.data(),
                                 gp[q]->w_h.data.size(), state, corr1, corr2, names[q]);
        detail::adam_update_span(gp[q]->w_x.data.data(), gm[q]->w_x.data.data(),
                                 gv[q]->w_x.data.data(), gg[q]->w_x.data.data(),
                                 gp[q]->w_x.data.size(), state, corr1, corr2, names[q]);
        detail::adam_update_span(gp[q]->b_h.data(), gm[q]->b_h.data(), gv[q]->b_h.data(),
                                 gg[q]->b_h.data(), gp[q]->b_h.size(), state, corr1,
                                 corr2, names[q]);
        detail::adam_update_span(gp[q]->b_x.data(), gm[q]->b_x.data(), gv[q]->b_x.data(),
                                 gg[q]->b_x.data(), gp[q]->b_x.size(), state, corr1,
                                 corr2, names[q]);
    }
    if (model.w_y.data.size() != grads.w_y.data.size())
        throw shape_error("adam_step: gradient shape mismatch in w_y");
    detail::adam_update_span(model.w_y.data.data(), state.m.w_y.data.data(),
                             state.v.w_y.data.data(), grads.w_y.data.data(),
                             model.w_y.data.size(), state, corr1, corr2, "w_y");
    detail::adam_update_span(model.b_y.data(), state.m.b_y.data(), state.v.b_y.data(),
                             grads.b_y.data(), model.b_y.size(), state, corr1, corr2,
                             "b_y");
}

}  // namespace snnlstm
