#include <cmath>
#include <stdexcept>

#include "dim/block.hpp"
#include "dim/finite_diff.hpp"
#include "doctest.h"

using namespace dim;

namespace {

DimBlockParams micro_block(Rng& rng, std::size_t d = 4, std::size_t n = 3,
                           std::size_t r = 1, std::size_t k = 4) {
    return make_dim_block(d, n, r, k, rng);
}

// copies every direction-specific parameter fwd -> bwd
void mirror_directions(DimBlockParams& p) {
    p.in_proj_bwd = p.in_proj_fwd;
    p.conv_w_bwd = p.conv_w_fwd;
    p.conv_b_bwd = p.conv_b_fwd;
    p.ssm_bwd = p.ssm_fwd;
}

}  // namespace

TEST_CASE("causal conv: identity tap and shift tap") {
    // w = [0,0,0,1] is the identity; w = [0,0,1,0] is a one-step delay
    Tensor x({3, 1}, {1.0, 2.0, 3.0});
    Tensor w_id({1, 4}, {0, 0, 0, 1});
    Tensor b({1});
    Tensor y = causal_conv1d(x, w_id, b);
    CHECK(max_abs_diff(y, x) == 0.0);

    Tensor w_delay({1, 4}, {0, 0, 1, 0});
    Tensor yd = causal_conv1d(x, w_delay, b);
    CHECK(yd[0] == 0.0);
    CHECK(yd[1] == 1.0);
    CHECK(yd[2] == 2.0);
}

TEST_CASE("causal conv backward vs finite differences") {
    Rng rng(4);
    Tensor x = randn(rng, {5, 2});
    Tensor w = randn(rng, {2, 3});
    Tensor b = randn(rng, {2});
    Tensor co = randn(rng, {5, 2});

    Tensor gw({2, 3}), gb({2});
    Tensor gx = causal_conv1d_backward(x, w, co, gw, gb);

    auto loss = [&](const Tensor& xv, const Tensor& wv, const Tensor& bv) {
        return dot(causal_conv1d(xv, wv, bv), co);
    };
    Tensor ngx = finite_diff_grad([&](const Tensor& t) { return loss(t, w, b); }, x, 1e-5);
    Tensor ngw = finite_diff_grad([&](const Tensor& t) { return loss(x, t, b); }, w, 1e-5);
    Tensor ngb = finite_diff_grad([&](const Tensor& t) { return loss(x, w, t); }, b, 1e-5);
    CHECK(max_rel_error(gx, ngx) < 1e-7);
    CHECK(max_rel_error(gw, ngw) < 1e-7);
    CHECK(max_rel_error(gb, ngb) < 1e-7);
}

TEST_CASE("zero-init out_proj: block is exactly the identity") {
    Rng rng(10);
    DimBlockParams p = micro_block(rng);
    Tensor tokens = randn(rng, {6, 4});
    Tensor cond = randn(rng, {4});
    Tensor out = dim_block_forward(tokens, cond, p);
    CHECK(max_abs_diff(out, tokens) == 0.0);
}

TEST_CASE("block shape preservation and determinism") {
    Rng rng(12);
    DimBlockParams p = micro_block(rng);
    p.out_proj.w = randn(rng, p.out_proj.w.shape());
    p.cond_mod.w = randn(rng, p.cond_mod.w.shape());
    Tensor tokens = randn(rng, {5, 4});
    Tensor cond = randn(rng, {4});
    Tensor a = dim_block_forward(tokens, cond, p);
    Tensor b = dim_block_forward(tokens, cond, p);
    CHECK(a.same_shape(tokens));
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("block error paths") {
    Rng rng(12);
    DimBlockParams p = micro_block(rng);
    CHECK_THROWS_AS(dim_block_forward(Tensor({0, 4}), Tensor({4}), p),
                    std::invalid_argument);
    Tensor bad_cond({4}, {1.0, 2.0, 1e308 * 10, 0.0});  // inf
    CHECK_THROWS_AS(dim_block_forward(randn(rng, {3, 4}), bad_cond, p),
                    std::runtime_error);
}

TEST_CASE("L=1: both directions see the same single token") {
    Rng rng(17);
    DimBlockParams p = micro_block(rng);
    p.out_proj.w = randn(rng, p.out_proj.w.shape());
    mirror_directions(p);
    Tensor tok = randn(rng, {1, 4});
    Tensor cond = randn(rng, {4});
    BlockCache cc;
    dim_block_forward(tok, cond, p, &cc);
    // with mirrored parameters the two directional branches coincide at L=1
    CHECK(max_abs_diff(cc.y_fwd, cc.y_bwd) == 0.0);
}

TEST_CASE("reversal equivariance under mirrored parameters") {
    Rng rng(23);
    DimBlockParams p = make_dim_block(4, 16, 1, 4, rng);
    p.out_proj.w = rand_uniform(rng, p.out_proj.w.shape(), -0.5, 0.5);
    p.cond_mod.w = rand_uniform(rng, p.cond_mod.w.shape(), -0.2, 0.2);
    p.cond_mod.b = rand_uniform(rng, p.cond_mod.b.shape(), -0.2, 0.2);
    mirror_directions(p);

    Tensor tokens = randn(rng, {8, 4});
    Tensor cond = randn(rng, {4});  // token-uniform by construction

    Tensor out = dim_block_forward(tokens, cond, p);
    Tensor out_rev = dim_block_forward(reverse_rows(tokens), cond, p);
    CHECK(max_abs_diff(reverse_rows(out), out_rev) < 1e-10);
}

TEST_CASE("block backward: zero cotangent gives zero grads") {
    Rng rng(31);
    DimBlockParams p = micro_block(rng);
    p.out_proj.w = randn(rng, p.out_proj.w.shape());
    Tensor tokens = randn(rng, {4, 4});
    Tensor cond = randn(rng, {4});
    BlockCache cc;
    dim_block_forward(tokens, cond, p, &cc);
    DimBlockParams g = block_zeros_like(p);
    Tensor gc({4});
    Tensor gt = dim_block_backward(tokens, cond, p, cc, Tensor({4, 4}), g, gc);
    CHECK(max_abs(gt) == 0.0);
    CHECK(max_abs(gc) == 0.0);
    CHECK(max_abs(g.in_proj_fwd.w) == 0.0);
    CHECK(max_abs(g.out_proj.w) == 0.0);
}

TEST_CASE("zero-init out_proj: grad_tokens == grad_out, out_proj grad nonzero") {
    Rng rng(37);
    DimBlockParams p = micro_block(rng);  // out_proj zero
    Tensor tokens = randn(rng, {4, 4});
    Tensor cond = randn(rng, {4});
    BlockCache cc;
    dim_block_forward(tokens, cond, p, &cc);
    DimBlockParams g = block_zeros_like(p);
    Tensor gc({4});
    Tensor go = randn(rng, {4, 4});
    Tensor gt = dim_block_backward(tokens, cond, p, cc, go, g, gc);
    CHECK(max_abs_diff(gt, go) == 0.0);
    CHECK(max_abs(g.out_proj.w) > 0.0);
}

TEST_CASE("block backward vs finite differences, random instance") {
    Rng rng(41);
    const std::size_t len = 4, d = 4;
    DimBlockParams p = micro_block(rng, d, 3, 1, 3);
    // move off the zero-init point so every path carries gradient
    p.out_proj.w = rand_uniform(rng, p.out_proj.w.shape(), -0.5, 0.5);
    p.cond_mod.w = rand_uniform(rng, p.cond_mod.w.shape(), -0.3, 0.3);
    p.cond_mod.b = rand_uniform(rng, p.cond_mod.b.shape(), -0.3, 0.3);

    Tensor tokens = randn(rng, {len, d});
    Tensor cond = randn(rng, {d});
    Tensor co = randn(rng, {len, d});

    BlockCache cc;
    dim_block_forward(tokens, cond, p, &cc);
    DimBlockParams g = block_zeros_like(p);
    Tensor g_cond({d});
    Tensor g_tok = dim_block_backward(tokens, cond, p, cc, co, g, g_cond);

    auto loss_p = [&](const DimBlockParams& pp) {
        return dot(dim_block_forward(tokens, cond, pp), co);
    };

    Tensor n_tok = finite_diff_grad(
        [&](const Tensor& t) { return dot(dim_block_forward(t, cond, p), co); },
        tokens, 1e-5);
    CHECK(max_rel_error(g_tok, n_tok, 1e-6) < 1e-4);

    Tensor n_cond = finite_diff_grad(
        [&](const Tensor& t) { return dot(dim_block_forward(tokens, t, p), co); },
        cond, 1e-5);
    CHECK(max_rel_error(g_cond, n_cond, 1e-6) < 1e-4);

    // every parameter tensor, via the walker
    DimBlockParams p_mut = p;
    std::vector<std::pair<std::string, Tensor*>> slots;
    block_for_each_tensor(p_mut, "b", [&](const std::string& nm, Tensor& t) {
        slots.emplace_back(nm, &t);
    });
    DimBlockParams g_named = block_zeros_like(p);
    std::vector<Tensor*> g_slots;
    block_for_each_tensor(g_named, "b", [&](const std::string&, Tensor& t) {
        g_slots.push_back(&t);
    });
    // recompute analytic grads into g_named through the same walker layout
    {
        BlockCache cc2;
        dim_block_forward(tokens, cond, p_mut, &cc2);
        Tensor gc2({d});
        dim_block_backward(tokens, cond, p_mut, cc2, co, g_named, gc2);
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
        Tensor saved = *slots[s].second;
        Tensor num = finite_diff_grad(
            [&](const Tensor& t) {
                *slots[s].second = t;
                double v = loss_p(p_mut);
                *slots[s].second = saved;
                return v;
            },
            saved, 1e-5);
        *slots[s].second = saved;
        INFO("param ", slots[s].first);
        // floor 1e-4: entries below it are compared absolutely, which keeps
        // central-difference roundoff (~1e-9 here) out of the ratio
        CHECK(max_rel_error(*g_slots[s], num, 1e-4) < 1e-4);
    }
}
