// Independent gradient verification. A scalar tape autodiff engine rebuilds
// the whole unrolled computation node by node, with spike nodes carrying the
// Gaussian surrogate as their local derivative, and is compared against the
// hand-rolled BPTT. Single-threaded, tiny instances only.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snnlstm/model.hpp"

namespace snnlstm {

class Tape {
  public:
    int leaf(double v) { return push(v, -1, -1, 0.0, 0.0); }
    int add(int a, int b) { return push(val(a) + val(b), a, b, 1.0, 1.0); }
    int sub(int a, int b) { return push(val(a) - val(b), a, b, 1.0, -1.0); }
    int mul(int a, int b) { return push(val(a) * val(b), a, b, val(b), val(a)); }
    int cmul(int a, double k) { return push(val(a) * k, a, -1, k, 0.0); }
    int cadd(int a, double k) { return push(val(a) + k, a, -1, 1.0, 0.0); }
    int exp_(int a) { return push(std::exp(val(a)), a, -1, std::exp(val(a)), 0.0); }
    int log_(int a) { return push(std::log(val(a)), a, -1, 1.0 / val(a), 0.0); }

    int spike(int a, double theta, double alpha) {
        return push(spike_sigma(val(a), theta), a, -1,
                    surrogate_deriv(val(a), theta, alpha), 0.0);
    }
    int cell_thresh(int a, const SurrogateConfig& cfg) {
        return push(cell_threshold(val(a)), a, -1,
                    cell_threshold_grad(val(a), cfg), 0.0);
    }

    double val(int id) const { return nodes_[id].val; }
    double grad(int id) const { return nodes_[id].grad; }

    // Reverse accumulation from the given root.
    void backward(int root) {
        for (auto& n : nodes_) n.grad = 0.0;
        nodes_[root].grad = 1.0;
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            const Node& n = nodes_[id];
            if (n.grad == 0.0) continue;
            if (n.p1 >= 0) nodes_[n.p1].grad += n.grad * n.d1;
            if (n.p2 >= 0) nodes_[n.p2].grad += n.grad * n.d2;
        }
    }

  private:
    struct Node {
        double val, grad;
        int p1, p2;
        double d1, d2;
    };
    int push(double v, int p1, int p2, double d1, double d2) {
        nodes_.push_back({v, 0.0, p1, p2, d1, d2});
        return static_cast<int>(nodes_.size()) - 1;
    }
    std::vector<Node> nodes_;
};

namespace detail {

struct LeafMatrix {
    std::vector<int> ids;  // row-major
    std::size_t rows = 0, cols = 0;
    int operator()(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
};

inline LeafMatrix leaves(Tape& tape, const Matrix& m) {
    LeafMatrix lm;
    lm.rows = m.rows;
    lm.cols = m.cols;
    lm.ids.reserve(m.data.size());
    for (double v : m.data) lm.ids.push_back(tape.leaf(v));
    return lm;
}

inline std::vector<int> leaves(Tape& tape, const Vector& v) {
    std::vector<int> ids;
    ids.reserve(v.size());
    for (double x : v) ids.push_back(tape.leaf(x));
    return ids;
}

inline void harvest(const Tape& tape, const LeafMatrix& lm, Matrix& out) {
    out = Matrix(lm.rows, lm.cols);
    for (std::size_t k = 0; k < lm.ids.size(); ++k) out.data[k] = tape.grad(lm.ids[k]);
}

inline void harvest(const Tape& tape, const std::vector<int>& ids, Vector& out) {
    out.resize(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) out[k] = tape.grad(ids[k]);
}

}  // namespace detail

inline std::size_t parameter_count(const Model& m) {
    const std::size_t h = m.hidden_size(), in = m.input_size(), out = m.output_size();
    return 4 * (h * h + h * in + 2 * h) + out * h + out;
}

// Builds the fully unrolled graph for the same loss as
// model_sequence_backward and returns gradients in GradientSet layout.
inline GradientSet reference_gradient(const Model& m, const SurrogateConfig& cfg,
                                      const std::vector<Vector>& inputs,
                                      const SequenceTargets& targets,
                                      LossMode loss_mode) {
    if (parameter_count(m) > 500)
        throw std::invalid_argument("reference_gradient: instance too large (> 500 parameters)");
    const std::size_t T = inputs.size();
    const std::size_t hidden = m.hidden_size();
    const std::size_t out_n = m.output_size();

    Tape tape;
    struct GateLeaves {
        detail::LeafMatrix w_h, w_x;
        std::vector<int> b_h, b_x;
    };
    GateLeaves gl[4];
    const GateParams* gp[4] = {&m.layer.f, &m.layer.i, &m.layer.g, &m.layer.o};
    for (int q = 0; q < 4; ++q) {
        gl[q].w_h = detail::leaves(tape, gp[q]->w_h);
        gl[q].w_x = detail::leaves(tape, gp[q]->w_x);
        gl[q].b_h = detail::leaves(tape, gp[q]->b_h);
        gl[q].b_x = detail::leaves(tape, gp[q]->b_x);
    }
    detail::LeafMatrix wy = detail::leaves(tape, m.w_y);
    std::vector<int> by = detail::leaves(tape, m.b_y);

    std::vector<int> h(hidden), c(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        h[j] = tape.leaf(0.0);
        c[j] = tape.leaf(0.0);
    }

    auto gate_row = [&](const GateLeaves& g, std::size_t r, const std::vector<int>& hp,
                        const Vector& x) {
        int acc = tape.add(g.b_h[r], g.b_x[r]);
        for (std::size_t j = 0; j < hidden; ++j)
            acc = tape.add(acc, tape.mul(g.w_h(r, j), hp[j]));
        for (std::size_t j = 0; j < x.size(); ++j)
            acc = tape.add(acc, tape.cmul(g.w_x(r, j), x[j]));
        return acc;
    };

    int total_loss = tape.leaf(0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<int> f(hidden), i(hidden), g2(hidden), o(hidden);
        std::vector<int> h_next(hidden), c_next(hidden);
        for (std::size_t r = 0; r < hidden; ++r) {
            f[r] = tape.spike(gate_row(gl[0], r, h, inputs[t]), cfg.theta1, cfg.alpha1);
            i[r] = tape.spike(gate_row(gl[1], r, h, inputs[t]), cfg.theta1, cfg.alpha1);
            g2[r] = tape.spike(gate_row(gl[2], r, h, inputs[t]), cfg.theta2, cfg.alpha2);
            o[r] = tape.spike(gate_row(gl[3], r, h, inputs[t]), cfg.theta1, cfg.alpha1);
            int c_pre = tape.add(tape.mul(f[r], c[r]), tape.mul(i[r], g2[r]));
            c_next[r] = tape.cell_thresh(c_pre, cfg);
            h_next[r] = tape.mul(o[r], c_next[r]);
        }
        h = std::move(h_next);
        c = std::move(c_next);

        const bool has_loss = loss_mode == LossMode::every_step || t + 1 == T;
        if (!has_loss) continue;

        // logits z = w_y h + b_y
        std::vector<int> z(out_n);
        for (std::size_t r = 0; r < out_n; ++r) {
            int acc = by[r];
            for (std::size_t j = 0; j < hidden; ++j)
                acc = tape.add(acc, tape.mul(wy(r, j), h[j]));
            z[r] = acc;
        }
        if (m.head == HeadKind::softmax) {
            const std::size_t label = loss_mode == LossMode::final_step
                                          ? targets.class_ids.at(0)
                                          : targets.class_ids.at(t);
            // CE through softmax: log(sum exp z) - z_label
            int sum_exp = tape.exp_(z[0]);
            for (std::size_t r = 1; r < out_n; ++r)
                sum_exp = tape.add(sum_exp, tape.exp_(z[r]));
            total_loss = tape.add(total_loss, tape.sub(tape.log_(sum_exp), z[label]));
        } else {
            const Vector& tgt = loss_mode == LossMode::final_step ? targets.values.at(0)
                                                                  : targets.values.at(t);
            for (std::size_t r = 0; r < out_n; ++r) {
                int d = tape.cadd(z[r], -tgt[r]);
                total_loss = tape.add(total_loss, tape.cmul(tape.mul(d, d), 0.5));
            }
        }
    }

    tape.backward(total_loss);

    GradientSet gs = GradientSet::zeros(m.input_size(), hidden, out_n);
    GateGrads* ga[4] = {&gs.f, &gs.i, &gs.g, &gs.o};
    for (int q = 0; q < 4; ++q) {
        detail::harvest(tape, gl[q].w_h, ga[q]->w_h);
        detail::harvest(tape, gl[q].w_x, ga[q]->w_x);
        detail::harvest(tape, gl[q].b_h, ga[q]->b_h);
        detail::harvest(tape, gl[q].b_x, ga[q]->b_x);
    }
    detail::harvest(tape, wy, gs.w_y);
    detail::harvest(tape, by, gs.b_y);
    return gs;
}

struct CompareEntry {
    std::string table;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
};

struct CompareReport {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::vector<CompareEntry> by_table;  // sorted by max_rel_err, worst first

    std::string to_string() const {
        std::ostringstream os;
        os << "max_abs_err=" << max_abs_err << " max_rel_err=" << max_rel_err << "\n";
        for (const auto& e : by_table)
            os << "  " << e.table << ": abs=" << e.max_abs_err
               << " rel=" << e.max_rel_err << "\n";
        return os.str();
    }
};

// Relative error with denominator max(|a|,|b|,1e-12).
inline CompareReport compare_gradients(const GradientSet& a, const GradientSet& b) {
    CompareReport rep;
    auto cmp_span = [&](const char* name, const double* pa, const double* pb,
                        std::size_t n) {
        CompareEntry e;
        e.table = name;
        for (std::size_t k = 0; k < n; ++k) {
            const double abs_err = std::fabs(pa[k] - pb[k]);
            const double denom = std::max({std::fabs(pa[k]), std::fabs(pb[k]), 1e-12});
            e.max_abs_err = std::max(e.max_abs_err, abs_err);
            e.max_rel_err = std::max(e.max_rel_err, abs_err / denom);
        }
        rep.max_abs_err = std::max(rep.max_abs_err, e.max_abs_err);
        rep.max_rel_err = std::max(rep.max_rel_err, e.max_rel_err);
        rep.by_table.push_back(std::move(e));
    };
    auto cmp_m = [&](const char* name, const Matrix& x, const Matrix& y) {
        if (x.rows != y.rows || x.cols != y.cols)
            throw shape_error(std::string("compare_gradients: layout mismatch in ") + name);
        cmp_span(name, x.data.data(), y.data.data(), x.data.size());
    };
    auto cmp_v = [&](const char* name, const Vector& x, const Vector& y) {
        if (x.size() != y.size())
            throw shape_error(std::string("compare_gradients: layout mismatch in ") + name);
        cmp_span(name, x.data(), y.data(), x.size());
    };
    const GateGrads* pa[4] = {&a.f, &a.i, &a.g, &a.o};
    const GateGrads* pb[4] = {&b.f, &b.i, &b.g, &b.o};
    const char* gate_names[4] = {"f", "i", "g", "o"};
    for (int q = 0; q < 4; ++q) {
        const std::string base = gate_names[q];
        cmp_m((("w_" + base + ",h").c_str()), pa[q]->w_h, pb[q]->w_h);
        cmp_m((("w_" + base + ",x").c_str()), pa[q]->w_x, pb[q]->w_x);
        cmp_v((("b_" + base + ",h").c_str()), pa[q]->b_h, pb[q]->b_h);
        cmp_v((("b_" + base + ",x").c_str()), pa[q]->b_x, pb[q]->b_x);
    }
    cmp_m("w_y", a.w_y, b.w_y);
    cmp_v("b_y", a.b_y, b.b_y);
    std::sort(rep.by_table.begin(), rep.by_table.end(),
              [](const CompareEntry& x, const CompareEntry& y) {
                  return x.max_rel_err > y.max_rel_err;
              });
    return rep;
}

// Central finite differences on every head parameter, spikes held fixed.
// Returns the max relative error against head_backward.
inline double finite_diff_head_check(Model m, const SurrogateConfig& /*cfg*/,
                                     const std::vector<Vector>& hidden_seq,
                                     const SequenceTargets& targets, double step = 1e-6) {
    if (!(step >= 1e-8 && step <= 1e-4))
        throw std::domain_error("finite_diff_head_check: step outside [1e-8, 1e-4]");

    // Losses for the difference quotient are evaluated in extended precision
    // so cancellation in (L+ - L-) does not drown small gradients.
    auto loss_of = [&](const Model& mm) {
        long double loss = 0.0L;
        const std::size_t out = mm.b_y.size();
        for (std::size_t t = 0; t < hidden_seq.size(); ++t) {
            const Vector& h = hidden_seq[t];
            std::vector<long double> z(out);
            for (std::size_t r = 0; r < out; ++r) {
                long double acc = mm.b_y[r];
                for (std::size_t c = 0; c < h.size(); ++c)
                    acc += static_cast<long double>(mm.w_y(r, c)) * h[c];
                z[r] = acc;
            }
            if (mm.head == HeadKind::softmax) {
                long double mx = z[0];
                for (long double v : z) mx = std::max(mx, v);
                long double sum = 0.0L;
                for (long double v : z) sum += expl(v - mx);
                loss += logl(sum) - (z[targets.class_ids.at(t)] - mx);
            } else {
                const Vector& tgt = targets.values.at(t);
                for (std::size_t k = 0; k < out; ++k)
                    loss += 0.5L * (z[k] - tgt[k]) * (z[k] - tgt[k]);
            }
        }
        return loss;
    };

    // Analytic gradient accumulated over the sequence.
    Matrix dw(m.w_y.rows, m.w_y.cols);
    Vector db(m.b_y.size(), 0.0);
    for (std::size_t t = 0; t < hidden_seq.size(); ++t) {
        Vector z = head_logits(m.w_y, m.b_y, hidden_seq[t]);
        Vector dL_dy;
        if (m.head == HeadKind::softmax) {
            dL_dy = softmax(z);
            dL_dy[targets.class_ids.at(t)] -= 1.0;
        } else {
            dL_dy.resize(z.size());
            for (std::size_t k = 0; k < z.size(); ++k)
                dL_dy[k] = z[k] - targets.values.at(t)[k];
        }
        HeadBackwardResult hb = head_backward(m.w_y, hidden_seq[t], dL_dy);
        for (std::size_t k = 0; k < dw.data.size(); ++k) dw.data[k] += hb.dw_y.data[k];
        for (std::size_t k = 0; k < db.size(); ++k) db[k] += hb.db_y[k];
    }

    double max_rel = 0.0;
    auto check = [&](double* p, double analytic) {
        const double orig = *p;
        *p = orig + step;
        const long double lp = loss_of(m);
        *p = orig - step;
        const long double lm = loss_of(m);
        *p = orig;
        const double numeric = static_cast<double>((lp - lm) / (2.0L * step));
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-12});
        max_rel = std::max(max_rel, std::fabs(numeric - analytic) / denom);
    };
    for (std::size_t k = 0; k < m.w_y.data.size(); ++k) check(&m.w_y.data[k], dw.data[k]);
    for (std::size_t k = 0; k < m.b_y.size(); ++k) check(&m.b_y[k], db[k]);
    return max_rel;
}

}  // namespace snnlstm
