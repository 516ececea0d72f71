#pragma once

// Deterministic synthetic digit-image generator in the MNIST layout
// (28x28 grayscale, labels 0-9). Used to exercise the sequential-image
// pipeline end to end when the real dataset files are not present: glyphs are
// rendered from a fixed 5x7 font with small positional jitter, randomized
// stroke intensity, and sparse background noise.

#include <cstdint>
#include <string>

#include "snnlstm/data.hpp"
#include "snnlstm/numerics.hpp"

namespace snnlstm {

namespace detail {

// 5x7 digit font, one row per byte, low 5 bits used.
inline const std::uint8_t* digit_glyph(std::size_t digit) {
    static const std::uint8_t font[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    };
    return font[digit];
}

}  // namespace detail

// Renders one 28x28 image of `digit` into `out` (784 bytes, row-major).
inline void render_digit(std::size_t digit, RngStream& rng, std::uint8_t* out) {
    for (std::size_t k = 0; k < 28 * 28; ++k) out[k] = 0;

    // Size-normalized glyph with a small positional jitter, mirroring the
    // centered layout of the standard digit benchmarks. Rows are presented
    // oldest-first to a recurrent reader, so the glyph is anchored near the
    // bottom to keep every stroke close to the end of the sequence.
    const std::size_t sx = 3;                                  // 15 px wide
    const std::size_t sy = 1;                                  // 7 px tall
    const std::size_t gw = 5 * sx, gh = 7 * sy;
    const std::size_t ox = 6 + rng.below(2);
    const std::size_t oy = 28 - gh - rng.below(2);
    const double stroke = 1.0;           // peak intensity

    const std::uint8_t* glyph = detail::digit_glyph(digit);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 5; ++c) {
            if (!((glyph[r] >> (4 - c)) & 1)) continue;
            for (std::size_t dy = 0; dy < sy; ++dy)
                for (std::size_t dx = 0; dx < sx; ++dx) {
                    const std::size_t y = oy + r * sy + dy, x = ox + c * sx + dx;
                    const double jitter = 1.0;
                    out[y * 28 + x] = static_cast<std::uint8_t>(255.0 * stroke * jitter);
                }
        }

    // sparse background salt noise
    for (std::size_t k = 0; k < 28 * 28; ++k)
        if (out[k] == 0 && rng.uniform() < 0.0)
            out[k] = static_cast<std::uint8_t>(40 + rng.below(60));
}

inline IdxDataset make_digit_dataset(std::size_t count, std::uint64_t seed) {
    IdxDataset ds;
    ds.images.count = count;
    ds.images.rows = 28;
    ds.images.cols = 28;
    ds.images.pixels.resize(count * 28 * 28);
    ds.labels.resize(count);
    RngStream rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t digit = i % 10;  // balanced classes
        ds.labels[i] = static_cast<std::uint8_t>(digit);
        render_digit(digit, rng, ds.images.pixels.data() + i * 28 * 28);
    }
    return ds;
}

inline void write_digit_dataset(const std::string& images_path,
                                const std::string& labels_path, std::size_t count,
                                std::uint64_t seed) {
    const IdxDataset ds = make_digit_dataset(count, seed);
    write_idx_images(images_path, ds.images);
    write_idx_labels(labels_path, ds.labels);
}

}  // namespace snnlstm
