// The LSTM spiking layer: binary gate/state forward dynamics and the
// surrogate-gradient backward pass through time.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "snnlstm/numerics.hpp"
#include "snnlstm/spike.hpp"

namespace snnlstm {

struct GateParams {
    Matrix w_h;  // hidden x hidden
    Matrix w_x;  // hidden x input
    Vector b_h;
    Vector b_x;
};

struct LayerParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    GateParams f, i, g, o;
};

// Everything the backward pass reads for one timestep.
struct StepCache {
    Vector x;                       // input at t (binary spikes or real embedding)
    Vector h_prev, c_prev;          // binary
    Vector a_f, a_i, a_g, a_o;      // membrane potentials (pre-activations)
    Vector f, i, g, o;              // binary gate outputs
    Vector c_pre;                   // f*c_prev + i*g, values in {0,1,2}
    Vector c, h;                    // binary states
};

struct GateGrads {
    Matrix w_h, w_x;
    Vector b_h, b_x;
};

struct GradientSet {
    GateGrads f, i, g, o;
    Matrix w_y;  // output-head accumulators (unused when the head is handled elsewhere)
    Vector b_y;
    Vector dL_dh0, dL_dc0;  // recurrent carries out of the earliest step

    static GradientSet zeros(std::size_t input, std::size_t hidden,
                             std::size_t output) {
        GradientSet gs;
        for (GateGrads* g : {&gs.f, &gs.i, &gs.g, &gs.o}) {
            g->w_h = Matrix(hidden, hidden);
            g->w_x = Matrix(hidden, input);
            g->b_h = Vector(hidden, 0.0);
            g->b_x = Vector(hidden, 0.0);
        }
        gs.w_y = Matrix(output, hidden);
        gs.b_y = Vector(output, 0.0);
        gs.dL_dh0 = Vector(hidden, 0.0);
        gs.dL_dc0 = Vector(hidden, 0.0);
        return gs;
    }

    void add_scaled(const GradientSet& other, double scale) {
        auto axpy_v = [scale](Vector& a, const Vector& b) {
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
        };
        auto axpy_m = [scale](Matrix& a, const Matrix& b) {
            for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] += scale * b.data[k];
        };
        const GateGrads* src[4] = {&other.f, &other.i, &other.g, &other.o};
        GateGrads* dst[4] = {&f, &i, &g, &o};
        for (int k = 0; k < 4; ++k) {
            axpy_m(dst[k]->w_h, src[k]->w_h);
            axpy_m(dst[k]->w_x, src[k]->w_x);
            axpy_v(dst[k]->b_h, src[k]->b_h);
            axpy_v(dst[k]->b_x, src[k]->b_x);
        }
        axpy_m(w_y, other.w_y);
        axpy_v(b_y, other.b_y);
        axpy_v(dL_dh0, other.dL_dh0);
        axpy_v(dL_dc0, other.dL_dc0);
    }

    void scale(double s) {
        for (GateGrads* g : {&f, &i, &this->g, &o}) {
            for (double& v : g->w_h.data) v *= s;
            for (double& v : g->w_x.data) v *= s;
            for (double& v : g->b_h) v *= s;
            for (double& v : g->b_x) v *= s;
        }
        for (double& v : w_y.data) v *= s;
        for (double& v : b_y) v *= s;
        for (double& v : dL_dh0) v *= s;
        for (double& v : dL_dc0) v *= s;
    }
};

// Weights i.i.d. standard normal, biases zero. Fill order: gates f, i, g, o;
// within each gate w_h row-major, then w_x row-major.
inline LayerParams init_params(std::size_t input_size, std::size_t hidden_size,
                               RngStream& rng) {
    if (input_size == 0 || hidden_size == 0)
        throw std::invalid_argument("init_params: sizes must be >= 1");
    LayerParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    for (GateParams* g : {&p.f, &p.i, &p.g, &p.o}) {
        g->w_h = Matrix(hidden_size, hidden_size);
        for (double& v : g->w_h.data) v = rng.normal();
        g->w_x = Matrix(hidden_size, input_size);
        for (double& v : g->w_x.data) v = rng.normal();
        g->b_h = Vector(hidden_size, 0.0);
        g->b_x = Vector(hidden_size, 0.0);
    }
    return p;
}

namespace detail {

inline void check_binary(const Vector& v, const char* name) {
    for (double x : v)
        if (x != 0.0 && x != 1.0)
            throw std::runtime_error(std::string("forward_step: ") + name +
                                     " is not binary");
}

struct SparseInput {
    std::vector<std::pair<std::size_t, double>> nz;
    void build(const Vector& x) {
        nz.clear();
        for (std::size_t j = 0; j < x.size(); ++j)
            if (x[j] != 0.0) nz.emplace_back(j, x[j]);
    }
};

// a = w_h h_prev + w_x x + b_h + b_x, exploiting zero entries of both inputs.
inline void gate_preactivation(const GateParams& gp,
                               const std::vector<std::size_t>& h_act,
                               const SparseInput& x_nz, Vector& a) {
    const std::size_t hidden = gp.b_h.size();
    a.resize(hidden);
    for (std::size_t r = 0; r < hidden; ++r) {
        double acc = gp.b_h[r] + gp.b_x[r];
        const double* wh = gp.w_h.row(r);
        for (std::size_t j : h_act) acc += wh[j];
        const double* wx = gp.w_x.row(r);
        for (const auto& [j, v] : x_nz.nz) acc += wx[j] * v;
        a[r] = acc;
    }
}

}  // namespace detail

inline StepCache forward_step(const LayerParams& p, const SurrogateConfig& cfg,
                              Vector x, Vector h_prev, Vector c_prev) {
    if (x.size() != p.input_size || h_prev.size() != p.hidden_size ||
        c_prev.size() != p.hidden_size)
        throw shape_error("forward_step: input/state shape mismatch");
    detail::check_binary(h_prev, "h_prev");
    detail::check_binary(c_prev, "c_prev");

    StepCache s;
    std::vector<std::size_t> h_act;
    for (std::size_t j = 0; j < h_prev.size(); ++j)
        if (h_prev[j] != 0.0) h_act.push_back(j);
    detail::SparseInput x_nz;
    x_nz.build(x);

    detail::gate_preactivation(p.f, h_act, x_nz, s.a_f);
    detail::gate_preactivation(p.i, h_act, x_nz, s.a_i);
    detail::gate_preactivation(p.g, h_act, x_nz, s.a_g);
    detail::gate_preactivation(p.o, h_act, x_nz, s.a_o);

    const std::size_t hidden = p.hidden_size;
    s.f.resize(hidden);
    s.i.resize(hidden);
    s.g.resize(hidden);
    s.o.resize(hidden);
    s.c_pre.resize(hidden);
    s.c.resize(hidden);
    s.h.resize(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        s.f[j] = spike_sigma(s.a_f[j], cfg.theta1);
        s.i[j] = spike_sigma(s.a_i[j], cfg.theta1);
        s.g[j] = spike_sigma(s.a_g[j], cfg.theta2);
        s.o[j] = spike_sigma(s.a_o[j], cfg.theta1);
        s.c_pre[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
        s.c[j] = cell_threshold(s.c_pre[j]);
        s.h[j] = s.o[j] * s.c[j];
    }
    s.x = std::move(x);
    s.h_prev = std::move(h_prev);
    s.c_prev = std::move(c_prev);
    return s;
}

inline std::vector<StepCache> forward_sequence(const LayerParams& p,
                                               const SurrogateConfig& cfg,
                                               const std::vector<Vector>& inputs,
                                               Vector h0, Vector c0) {
    if (inputs.empty()) throw std::invalid_argument("forward_sequence: T must be >= 1");
    std::vector<StepCache> caches;
    caches.reserve(inputs.size());
    Vector h = std::move(h0), c = std::move(c0);
    for (const Vector& x : inputs) {
        caches.push_back(forward_step(p, cfg, x, std::move(h), std::move(c)));
        h = caches.back().h;
        c = caches.back().c;
    }
    return caches;
}

inline std::vector<StepCache> forward_sequence(const LayerParams& p,
                                               const SurrogateConfig& cfg,
                                               const std::vector<Vector>& inputs) {
    return forward_sequence(p, cfg, inputs, Vector(p.hidden_size, 0.0),
                            Vector(p.hidden_size, 0.0));
}

struct StepGrads {
    Vector dL_df, dL_di, dL_dg, dL_do, dL_dc;
    Vector dL_dh_prev, dL_dc_prev;
};

namespace detail {

// One backward step. When acc is non-null the Appendix-style parameter
// gradients are accumulated into it as well.
inline StepGrads backward_step_impl(const LayerParams& p, const SurrogateConfig& cfg,
                                    const StepCache& s, const Vector& dL_dh,
                                    const Vector& dL_dc_carry, GradientSet* acc) {
    const std::size_t hidden = p.hidden_size;
    if (dL_dh.size() != hidden || dL_dc_carry.size() != hidden)
        throw shape_error("backward_step: cotangent shape mismatch");

    StepGrads out;
    out.dL_do.resize(hidden);
    out.dL_dc.resize(hidden);
    out.dL_di.resize(hidden);
    out.dL_dg.resize(hidden);
    out.dL_df.resize(hidden);
    out.dL_dc_prev.resize(hidden);
    out.dL_dh_prev.assign(hidden, 0.0);

    // Surrogate-weighted gate deltas dL/da_q = sigma'(|a_q|-|theta|) * dL/dq.
    Vector s_f(hidden), s_i(hidden), s_g(hidden), s_o(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        out.dL_do[j] = s.c[j] * dL_dh[j];
        out.dL_dc[j] = cell_threshold_grad(s.c_pre[j], cfg) *
                       (s.o[j] * dL_dh[j] + dL_dc_carry[j]);
        out.dL_di[j] = s.g[j] * out.dL_dc[j];
        out.dL_dg[j] = s.i[j] * out.dL_dc[j];
        out.dL_df[j] = s.c_prev[j] * out.dL_dc[j];
        out.dL_dc_prev[j] = s.f[j] * out.dL_dc[j];
        s_f[j] = surrogate_deriv(s.a_f[j], cfg.theta1, cfg.alpha1) * out.dL_df[j];
        s_i[j] = surrogate_deriv(s.a_i[j], cfg.theta1, cfg.alpha1) * out.dL_di[j];
        s_g[j] = surrogate_deriv(s.a_g[j], cfg.theta2, cfg.alpha2) * out.dL_dg[j];
        s_o[j] = surrogate_deriv(s.a_o[j], cfg.theta1, cfg.alpha1) * out.dL_do[j];
    }

    const GateParams* gates[4] = {&p.f, &p.i, &p.g, &p.o};
    const Vector* deltas[4] = {&s_f, &s_i, &s_g, &s_o};
    for (int q = 0; q < 4; ++q) {
        const Matrix& wh = gates[q]->w_h;
        const Vector& d = *deltas[q];
        for (std::size_t j = 0; j < hidden; ++j) {
            const double dj = d[j];
            if (dj == 0.0) continue;
            const double* row = wh.row(j);
            for (std::size_t m = 0; m < hidden; ++m) out.dL_dh_prev[m] += dj * row[m];
        }
    }

    if (acc != nullptr) {
        std::vector<std::size_t> h_act;
        for (std::size_t m = 0; m < hidden; ++m)
            if (s.h_prev[m] != 0.0) h_act.push_back(m);
        SparseInput x_nz;
        x_nz.build(s.x);

        GateGrads* gacc[4] = {&acc->f, &acc->i, &acc->g, &acc->o};
        for (int q = 0; q < 4; ++q) {
            const Vector& d = *deltas[q];
            GateGrads& ga = *gacc[q];
            for (std::size_t j = 0; j < hidden; ++j) {
                const double dj = d[j];
                if (dj == 0.0) continue;
                double* wh_row = ga.w_h.row(j);
                for (std::size_t m : h_act) wh_row[m] += dj;
                double* wx_row = ga.w_x.row(j);
                for (const auto& [m, v] : x_nz.nz) wx_row[m] += dj * v;
                ga.b_h[j] += dj;
                ga.b_x[j] += dj;
            }
        }
    }
    return out;
}

}  // namespace detail

inline StepGrads backward_step(const LayerParams& p, const SurrogateConfig& cfg,
                               const StepCache& cache, const Vector& dL_dh_t,
                               const Vector& dL_dc_carry) {
    return detail::backward_step_impl(p, cfg, cache, dL_dh_t, dL_dc_carry, nullptr);
}

// Full backward pass. dL_dh_seq[t] is the head cotangent at step t; the
// recurrent carry from step t+1 is added to it before the step runs.
inline GradientSet bptt(const LayerParams& p, const SurrogateConfig& cfg,
                        const std::vector<StepCache>& caches,
                        const std::vector<Vector>& dL_dh_seq,
                        std::size_t output_size = 0) {
    if (caches.size() != dL_dh_seq.size())
        throw shape_error("bptt: cache/cotangent length mismatch");
    const std::size_t hidden = p.hidden_size;
    GradientSet acc = GradientSet::zeros(p.input_size, hidden, output_size);
    Vector carry_h(hidden, 0.0), carry_c(hidden, 0.0);
    for (std::size_t ti = caches.size(); ti-- > 0;) {
        Vector dL_dh = dL_dh_seq[ti];
        for (std::size_t j = 0; j < hidden; ++j) dL_dh[j] += carry_h[j];
        StepGrads sg =
            detail::backward_step_impl(p, cfg, caches[ti], dL_dh, carry_c, &acc);
        carry_h = std::move(sg.dL_dh_prev);
        carry_c = std::move(sg.dL_dc_prev);
    }
    acc.dL_dh0 = std::move(carry_h);
    acc.dL_dc0 = std::move(carry_c);
    return acc;
}

}  // namespace snnlstm
