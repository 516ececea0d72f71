#include <doctest.h>

#include <cmath>

#include "snnlstm/data.hpp"
#include "snnlstm/heads.hpp"
#include "snnlstm/numerics.hpp"

using namespace snnlstm;

TEST_CASE("softmax: equal logits give the uniform distribution") {
    Vector p = softmax({0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
    Vector q = softmax({3.7, 3.7, 3.7, 3.7});
    for (double v : q) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax sums to one and is shift invariant") {
    RngStream rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        Vector z(5);
        for (double& v : z) v = rng.normal() * 10.0;
        Vector p = softmax(z);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        Vector zs = z;
        for (double& v : zs) v += 123.456;
        Vector ps = softmax(zs);
        for (std::size_t k = 0; k < p.size(); ++k)
            CHECK(ps[k] == doctest::Approx(p[k]).epsilon(1e-12));
    }
}

TEST_CASE("softmax_forward on a binary hidden vector vs long-double reference") {
    RngStream rng(21);
    SoftmaxHead head{Matrix(4, 6), Vector(4)};
    for (double& v : head.w_y.data) v = rng.normal();
    for (double& v : head.b_y) v = rng.normal();
    Vector h(6);
    for (double& v : h) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    Vector p = softmax_forward(head, h);

    long double z[4], mx = -1e30L;
    for (int r = 0; r < 4; ++r) {
        long double acc = head.b_y[r];
        for (int c = 0; c < 6; ++c) acc += (long double)head.w_y(r, c) * (long double)h[c];
        z[r] = acc;
        mx = std::max(mx, acc);
    }
    long double sum = 0.0L;
    for (int r = 0; r < 4; ++r) sum += expl(z[r] - mx);
    for (int r = 0; r < 4; ++r)
        CHECK(p[r] == doctest::Approx((double)(expl(z[r] - mx) / sum)).epsilon(1e-13));
}

TEST_CASE("ce_output_grad: y - y_true, entries sum to zero") {
    Vector g = ce_output_grad({0.7, 0.3}, {1.0, 0.0});
    CHECK(g[0] == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(ce_output_grad({0.5, 0.5}, {0.5, 0.5}) == Vector{0.0, 0.0});
    RngStream rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        Vector z(6);
        for (double& v : z) v = rng.normal();
        Vector y = softmax(z);
        Vector g2 = ce_output_grad(y, one_hot_encode(rng.below(6), 6));
        double sum = 0.0;
        for (double v : g2) sum += v;
        CHECK(std::fabs(sum) < 1e-12);
    }
}

TEST_CASE("head_backward scalar hand case") {
    Matrix w(1, 1);
    w(0, 0) = 2.0;
    HeadBackwardResult r = head_backward(w, Vector{1.0}, Vector{0.5});
    CHECK(r.dL_dh[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.dw_y(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.db_y[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("head_backward zero cotangent gives zeros") {
    Matrix w(3, 4);
    HeadBackwardResult r = head_backward(w, Vector(4, 1.0), Vector(3, 0.0));
    for (double v : r.dL_dh) CHECK(v == 0.0);
    for (double v : r.dw_y.data) CHECK(v == 0.0);
}

TEST_CASE("mse_loss_and_grad") {
    auto [l0, g0] = mse_loss_and_grad({{1.0}}, {{1.0}});
    CHECK(l0 == 0.0);
    CHECK(g0[0][0] == 0.0);
    auto [l1, g1] = mse_loss_and_grad({{1.0}}, {{0.0}});
    CHECK(l1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g1[0][0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mse gradient matches finite differences on a random T=5 case") {
    RngStream rng(17);
    std::vector<Vector> y(5, Vector(3)), tgt(5, Vector(3));
    for (auto& v : y)
        for (double& x : v) x = rng.normal();
    for (auto& v : tgt)
        for (double& x : v) x = rng.normal();
    auto [loss, grads] = mse_loss_and_grad(y, tgt);
    const double h = 1e-6;
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t k = 0; k < 3; ++k) {
            auto yp = y, ym = y;
            yp[t][k] += h;
            ym[t][k] -= h;
            const double num =
                (mse_loss_and_grad(yp, tgt).first - mse_loss_and_grad(ym, tgt).first) /
                (2 * h);
            CHECK(grads[t][k] == doctest::Approx(num).epsilon(1e-6));
        }
}

TEST_CASE("perplexity") {
    // uniform model over 41 symbols
    std::vector<double> uniform(100, 1.0 / 41.0);
    CHECK(perplexity(uniform) == doctest::Approx(41.0).epsilon(1e-12));
    // perfect model
    CHECK(perplexity({1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
    // hand log-space case
    CHECK(perplexity({0.5, 0.25}) == doctest::Approx(2.8284271247461903).epsilon(1e-12));
    // zero probability -> +inf flag
    CHECK(std::isinf(perplexity({0.5, 0.0})));
}

TEST_CASE("cross_entropy floors tiny probabilities") {
    Vector y{1.0, 0.0};
    CHECK(cross_entropy(y, 1) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy(y, 5), shape_error);
}
