// Spike activations, their Gaussian surrogate derivatives, and the binarizing
// cell-state threshold with its relaxed gradient.
#pragma once

#include <cmath>
#include <stdexcept>

#include "snnlstm/numerics.hpp"

namespace snnlstm {

struct SurrogateConfig {
    double theta1 = 0.1;  // threshold for sigma_1 (f, i, o gates)
    double theta2 = 0.1;  // threshold for sigma_2 (g layer)
    double alpha1 = 4.0;  // surrogate width for sigma_1'
    double alpha2 = 0.3;  // surrogate width for sigma_2'
    double gamma2 = 0.5;  // cell-threshold gradient when the pre-value is 2

    void validate() const {
        if (!(alpha1 > 0.0) || !(alpha2 > 0.0))
            throw std::domain_error("SurrogateConfig: alpha1 and alpha2 must be > 0");
        if (!(gamma2 > 0.0 && gamma2 <= 1.0))
            throw std::domain_error("SurrogateConfig: gamma2 must be in (0, 1]");
    }
};

// Hard threshold: spike iff u strictly exceeds theta. Ties emit no spike.
inline double spike_sigma(double u, double theta) { return u > theta ? 1.0 : 0.0; }

// Backward-pass stand-in for the spike derivative: a Gaussian pdf of |u|-|theta|.
inline double surrogate_deriv(double u, double theta, double alpha) {
    return gaussian_pdf(std::fabs(u) - std::fabs(theta), alpha);
}

inline int cell_pre_value(double v) {
    if (v == 0.0) return 0;
    if (v == 1.0) return 1;
    if (v == 2.0) return 2;
    throw std::runtime_error("cell_threshold: pre-value outside {0,1,2}, spike pipeline corrupted");
}

// f*c_prev + i*g can be 0, 1 or 2; both 1 and 2 map to a spike.
inline double cell_threshold(double v) { return cell_pre_value(v) == 0 ? 0.0 : 1.0; }

// Relaxed gradient of cell_threshold: 1 at pre-values {0,1}, gamma2 at 2.
inline double cell_threshold_grad(double v, const SurrogateConfig& cfg) {
    return cell_pre_value(v) == 2 ? cfg.gamma2 : 1.0;
}

}  // namespace snnlstm
