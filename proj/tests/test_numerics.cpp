#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dim/finite_diff.hpp"
#include "dim/rng.hpp"
#include "dim/tensor.hpp"
#include "doctest.h"

using namespace dim;

TEST_CASE("tensor shape/data invariants") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor({0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("elementwise ops reject shape mismatch and NaN") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);

    Tensor inf_in({1}, {1e308});
    CHECK_THROWS_AS(add(inf_in, inf_in), std::runtime_error);
}

TEST_CASE("randn determinism: same seed, identical stream") {
    Rng r1(7), r2(7);
    Tensor a = randn(r1, {2});
    Tensor b = randn(r2, {2});
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    // stream advances
    Tensor c = randn(r1, {2});
    CHECK(a[0] != c[0]);
}

TEST_CASE("randn moments at n=1e5") {
    Rng rng(1234);
    Tensor z = randn(rng, {100000});
    double m = mean(z);
    double var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) var += (z[i] - m) * (z[i] - m);
    var /= static_cast<double>(z.size() - 1);
    CHECK(m > -0.02);
    CHECK(m < 0.02);
    CHECK(var > 0.97);
    CHECK(var < 1.03);
}

TEST_CASE("randn rejects zero-sized dims") {
    Rng rng(1);
    CHECK_THROWS_AS(randn(rng, {0}), std::invalid_argument);
}

TEST_CASE("rng state round-trip continues the exact stream") {
    Rng a(42);
    a.normal();  // leave a spare cached
    auto st = a.state();
    Rng b(0);
    b.set_state(st);
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("silu and softplus closed-form points") {
    Tensor x({3}, {0.0, 50.0, -1.0});
    Tensor s = silu(x);
    CHECK(s[0] == 0.0);
    Tensor sp = softplus(x);
    CHECK(sp[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::fabs(sp[1] - 50.0) < 1e-12);

    // high-precision series check for softplus(50): ln(1+e^50) = 50 + e^-50 - ...
    long double exact = 50.0L + log1pl(expl(-50.0L));
    CHECK(std::fabs(sp[1] - static_cast<double>(exact)) < 1e-14);
}

TEST_CASE("finite differences: quadratic exact") {
    auto f = [](const Tensor& t) { return dot(t, t); };
    Tensor x({1}, {3.0});
    Tensor g = finite_diff_grad(f, x, 1e-5);
    CHECK(std::fabs(g[0] - 6.0) < 1e-8);
}

TEST_CASE("finite differences: sum of sines") {
    auto f = [](const Tensor& t) {
        double s = 0;
        for (std::size_t i = 0; i < t.size(); ++i) s += std::sin(t[i]);
        return s;
    };
    Tensor x({2}, {0.0, std::numbers::pi / 2});
    Tensor g = finite_diff_grad(f, x, 1e-5);
    CHECK(std::fabs(g[0] - 1.0) < 1e-9);
    CHECK(std::fabs(g[1] - 0.0) < 1e-9);
}

TEST_CASE("finite differences: eps bounds and non-finite errors") {
    auto f = [](const Tensor& t) { return t[0]; };
    Tensor x({1}, {1.0});
    CHECK_THROWS_AS(finite_diff_grad(f, x, 1e-7), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_grad(f, x, 1e-2), std::invalid_argument);

    // finite at the base point, NaN once coordinate 1 is pushed above -5
    auto bad = [](const Tensor& t) { return t[0] + std::sqrt(-5.0 - t[1]); };
    Tensor y({2}, {1.0, -5.0});
    CHECK_THROWS_WITH_AS(finite_diff_grad(bad, y, 1e-5),
                         doctest::Contains("coordinate 1"), std::runtime_error);
}

TEST_CASE("silu/softplus scalar grads match finite differences") {
    Rng rng(9);
    for (int k = 0; k < 20; ++k) {
        double v = rng.uniform(-4.0, 4.0);
        Tensor x({1}, {v});
        auto fs = [](const Tensor& t) { return silu_scalar(t[0]); };
        Tensor g = finite_diff_grad(fs, x, 1e-5);
        CHECK(std::fabs(g[0] - silu_grad_scalar(v)) < 1e-8);

        auto fp = [](const Tensor& t) { return softplus_scalar(t[0]); };
        Tensor gp = finite_diff_grad(fp, x, 1e-5);
        CHECK(std::fabs(gp[0] - sigmoid_scalar(v)) < 1e-8);
    }
}

TEST_CASE("linear forward/backward vs finite differences") {
    Rng rng(3);
    const std::size_t rows = 3, in = 4, out = 2;
    Tensor w = rand_uniform(rng, {out, in}, -1, 1);
    Tensor b = rand_uniform(rng, {out}, -1, 1);
    Tensor x = rand_uniform(rng, {rows, in}, -1, 1);
    Tensor co = rand_uniform(rng, {rows, out}, -1, 1);  // fixed cotangent

    auto loss_of = [&](const Tensor& xv, const Tensor& wv, const Tensor& bv) {
        Tensor y({rows, out});
        linear_forward(xv.data(), wv.data(), bv.data(), y.data(), rows, in, out);
        return dot(y, co);
    };

    Tensor gx({rows, in}), gw({out, in}), gb({out});
    linear_backward(x.data(), w.data(), co.data(), gx.data(), gw.data(),
                    gb.data(), rows, in, out);

    Tensor ngx = finite_diff_grad(
        [&](const Tensor& t) { return loss_of(t, w, b); }, x, 1e-5);
    Tensor ngw = finite_diff_grad(
        [&](const Tensor& t) { return loss_of(x, t, b); }, w, 1e-5);
    Tensor ngb = finite_diff_grad(
        [&](const Tensor& t) { return loss_of(x, w, t); }, b, 1e-5);
    CHECK(max_rel_error(gx, ngx) < 1e-7);
    CHECK(max_rel_error(gw, ngw) < 1e-7);
    CHECK(max_rel_error(gb, ngb) < 1e-7);
}
