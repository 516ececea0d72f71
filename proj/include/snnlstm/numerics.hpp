// Dense double-precision matrix/vector primitives and a deterministic
// counter-based RNG. Everything downstream builds on this header.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace snnlstm {

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

// Standard product, inner dimension summed left to right.
inline Matrix gemm(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw shape_error("gemm: " + a.shape_str() + " * " + b.shape_str());
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// y = M x
inline Vector matvec(const Matrix& m, const Vector& x) {
    if (m.cols != x.size())
        throw shape_error("matvec: " + m.shape_str() + " * " + std::to_string(x.size()));
    Vector y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

// y = M^T x
inline Vector matvec_transposed(const Matrix& m, const Vector& x) {
    if (m.rows != x.size())
        throw shape_error("matvec_transposed: " + m.shape_str() + "^T * " +
                          std::to_string(x.size()));
    Vector y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += xr * row[c];
    }
    return y;
}

inline double gaussian_pdf(double x, double alpha) {
    if (!(alpha > 0.0)) throw std::domain_error("gaussian_pdf: alpha must be > 0");
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi / alpha * std::exp(-(x * x) / (2.0 * alpha * alpha));
}

// Splitmix64 counter generator. Fixed algorithm so that a seed produces the
// same byte sequence on every platform.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Box-Muller on the uniform stream; second value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Vector draw_standard_normal(RngStream& rng, std::size_t n) {
    if (n == 0) throw std::domain_error("draw_standard_normal: n must be >= 1");
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace snnlstm
