#include <doctest.h>

#include <cmath>

#include "snnlstm/spike.hpp"

using namespace snnlstm;

TEST_CASE("spike_sigma thresholding is strict") {
    CHECK(spike_sigma(0.5, 0.1) == 1.0);
    CHECK(spike_sigma(0.0, 0.1) == 0.0);
    CHECK(spike_sigma(0.1, 0.1) == 0.0);  // tie emits no spike
}

TEST_CASE("spike_sigma output is binary for fuzzed inputs") {
    RngStream rng(99);
    for (int k = 0; k < 1000000; ++k) {
        const double u = (rng.uniform() - 0.5) * 1e6;
        const double s = spike_sigma(u, 0.1);
        CHECK((s == 0.0 || s == 1.0));
    }
}

TEST_CASE("surrogate_deriv closed-form peaks") {
    // |0.1|-|0.1| = 0, pdf peak 1/(alpha*sqrt(2*pi))
    CHECK(surrogate_deriv(0.1, 0.1, 4.0) ==
          doctest::Approx(0.0997355701003582).epsilon(1e-12));
    CHECK(surrogate_deriv(-0.1, 0.1, 0.3) ==
          doctest::Approx(1.3298076013381091).epsilon(1e-12));
    // away from the threshold it is the Gaussian pdf at |u|-|theta|
    CHECK(surrogate_deriv(1.2, 0.1, 4.0) ==
          doctest::Approx(gaussian_pdf(1.1, 4.0)).epsilon(1e-15));
    CHECK_THROWS_AS(surrogate_deriv(0.0, 0.1, 0.0), std::domain_error);
}

TEST_CASE("surrogate_deriv is symmetric in u") {
    RngStream rng(4);
    for (int k = 0; k < 1000; ++k) {
        const double u = rng.normal() * 5.0;
        CHECK(surrogate_deriv(u, 0.1, 0.3) == surrogate_deriv(-u, 0.1, 0.3));
    }
}

TEST_CASE("surrogate_deriv argmax lies at |u| = |theta| (grid search)") {
    const double theta = 0.1, alpha = 0.3;
    double best_u = -2.0, best = -1.0;
    for (int k = 0; k <= 40000; ++k) {
        const double u = -2.0 + 4.0 * k / 40000.0;
        const double d = surrogate_deriv(u, theta, alpha);
        if (d > best) {
            best = d;
            best_u = u;
        }
    }
    CHECK(std::fabs(std::fabs(best_u) - theta) < 1e-3);
}

TEST_CASE("cell_threshold maps {0,1,2} to {0,1,1}") {
    CHECK(cell_threshold(0.0) == 0.0);
    CHECK(cell_threshold(1.0) == 1.0);
    CHECK(cell_threshold(2.0) == 1.0);
    CHECK_THROWS_AS(cell_threshold(0.5), std::runtime_error);
    CHECK_THROWS_AS(cell_threshold(3.0), std::runtime_error);
    CHECK_THROWS_AS(cell_threshold(-1.0), std::runtime_error);
}

TEST_CASE("cell_threshold is idempotent on its binary range") {
    CHECK(cell_threshold(cell_threshold(0.0)) == cell_threshold(0.0));
    CHECK(cell_threshold(cell_threshold(1.0)) == cell_threshold(1.0));
}

TEST_CASE("cell_threshold_grad: 1 on {0,1}, gamma2 on 2") {
    SurrogateConfig cfg;
    CHECK(cell_threshold_grad(0.0, cfg) == 1.0);
    CHECK(cell_threshold_grad(1.0, cfg) == 1.0);
    CHECK(cell_threshold_grad(2.0, cfg) == 0.5);
    cfg.gamma2 = 0.25;
    CHECK(cell_threshold_grad(2.0, cfg) == 0.25);
}

TEST_CASE("SurrogateConfig validation") {
    SurrogateConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.theta1 == 0.1);
    CHECK(cfg.theta2 == 0.1);
    CHECK(cfg.alpha1 == 4.0);
    CHECK(cfg.alpha2 == 0.3);
    cfg.alpha1 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg.alpha1 = 4.0;
    cfg.gamma2 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg.gamma2 = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
}
