// Checkpoint container. Little-endian binary layout:
//   u32 magic "SNL1", u32 version,
//   u32 input_size, u32 hidden_size, u32 output_size,
//   u8 head_kind (0 softmax, 1 linear), u8 has_optimizer,
//   parameter tables as raw f64 in the fixed order
//     f.w_h, f.w_x, f.b_h, f.b_x, i.*, g.*, o.*, w_y, b_y
//   and, when has_optimizer is set,
//   u64 step, f64 lr/beta1/beta2/eps, then first- and second-moment tables
//   in the same order. Round-trips are bit-exact.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "snnlstm/adam.hpp"
#include "snnlstm/model.hpp"

namespace snnlstm {

constexpr std::uint32_t kCheckpointMagic = 0x314C4E53u;  // "SNL1"
constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

struct BinWriter {
    std::ofstream out;
    explicit BinWriter(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw format_error("checkpoint: cannot open for write: " + path);
    }
    void u32(std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
    void u64(std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
    void u8(std::uint8_t v) { out.write(reinterpret_cast<const char*>(&v), 1); }
    void f64(double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
    void f64s(const double* p, std::size_t n) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
    }
};

struct BinReader {
    std::ifstream in;
    std::string path;
    explicit BinReader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw format_error("checkpoint: cannot open: " + p);
    }
    std::uint32_t u32() {
        std::uint32_t v;
        read(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        read(&v, 8);
        return v;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        read(&v, 1);
        return v;
    }
    double f64() {
        double v;
        read(&v, 8);
        return v;
    }
    void f64s(double* p, std::size_t n) { read(p, n * 8); }
    void read(void* p, std::size_t n) {
        if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
            throw format_error("checkpoint: truncated file: " + path);
    }
};

template <typename Fn>
void for_each_table(const Model& m, Fn&& fn) {
    const GateParams* gp[4] = {&m.layer.f, &m.layer.i, &m.layer.g, &m.layer.o};
    for (int q = 0; q < 4; ++q) {
        fn(gp[q]->w_h.data);
        fn(gp[q]->w_x.data);
        fn(gp[q]->b_h);
        fn(gp[q]->b_x);
    }
    fn(m.w_y.data);
    fn(m.b_y);
}

template <typename Fn>
void for_each_table(Model& m, Fn&& fn) {
    GateParams* gp[4] = {&m.layer.f, &m.layer.i, &m.layer.g, &m.layer.o};
    for (int q = 0; q < 4; ++q) {
        fn(gp[q]->w_h.data);
        fn(gp[q]->w_x.data);
        fn(gp[q]->b_h);
        fn(gp[q]->b_x);
    }
    fn(m.w_y.data);
    fn(m.b_y);
}

template <typename Fn>
void for_each_table(const GradientSet& g, Fn&& fn) {
    const GateGrads* gg[4] = {&g.f, &g.i, &g.g, &g.o};
    for (int q = 0; q < 4; ++q) {
        fn(gg[q]->w_h.data);
        fn(gg[q]->w_x.data);
        fn(gg[q]->b_h);
        fn(gg[q]->b_x);
    }
    fn(g.w_y.data);
    fn(g.b_y);
}

template <typename Fn>
void for_each_table(GradientSet& g, Fn&& fn) {
    GateGrads* gg[4] = {&g.f, &g.i, &g.g, &g.o};
    for (int q = 0; q < 4; ++q) {
        fn(gg[q]->w_h.data);
        fn(gg[q]->w_x.data);
        fn(gg[q]->b_h);
        fn(gg[q]->b_x);
    }
    fn(g.w_y.data);
    fn(g.b_y);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Model& m,
                            const AdamState* opt = nullptr) {
    detail::BinWriter w(path);
    w.u32(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(m.input_size()));
    w.u32(static_cast<std::uint32_t>(m.hidden_size()));
    w.u32(static_cast<std::uint32_t>(m.output_size()));
    w.u8(m.head == HeadKind::softmax ? 0 : 1);
    w.u8(opt ? 1 : 0);
    detail::for_each_table(m, [&](const auto& v) { w.f64s(v.data(), v.size()); });
    if (opt) {
        w.u64(opt->step);
        w.f64(opt->lr);
        w.f64(opt->beta1);
        w.f64(opt->beta2);
        w.f64(opt->eps);
        detail::for_each_table(opt->m, [&](const auto& v) { w.f64s(v.data(), v.size()); });
        detail::for_each_table(opt->v, [&](const auto& v) { w.f64s(v.data(), v.size()); });
    }
    w.out.flush();
    if (!w.out) throw format_error("checkpoint: write failed: " + path);
}

struct Checkpoint {
    Model model;
    bool has_optimizer = false;
    AdamState optimizer;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    detail::BinReader r(path);
    if (r.u32() != kCheckpointMagic) throw format_error("checkpoint: bad magic: " + path);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw format_error("checkpoint: unsupported version " + std::to_string(version));
    const std::size_t input = r.u32(), hidden = r.u32(), output = r.u32();
    const std::uint8_t head_kind = r.u8();
    const bool has_opt = r.u8() != 0;

    Checkpoint ck;
    RngStream dummy(0);
    ck.model = init_model(input, hidden, output,
                          head_kind == 0 ? HeadKind::softmax : HeadKind::linear, dummy);
    detail::for_each_table(ck.model, [&](auto& v) { r.f64s(v.data(), v.size()); });
    if (has_opt) {
        ck.has_optimizer = true;
        ck.optimizer = AdamState::zeros(input, hidden, output);
        ck.optimizer.step = r.u64();
        ck.optimizer.lr = r.f64();
        ck.optimizer.beta1 = r.f64();
        ck.optimizer.beta2 = r.f64();
        ck.optimizer.eps = r.f64();
        detail::for_each_table(ck.optimizer.m, [&](auto& v) { r.f64s(v.data(), v.size()); });
        detail::for_each_table(ck.optimizer.v, [&](auto& v) { r.f64s(v.data(), v.size()); });
    }
    return ck;
}

}  // namespace snnlstm
