#include "dim/block.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

static constexpr double kLnEps = 1e-5;

DimBlockParams make_dim_block(std::size_t d, std::size_t state_n,
                              std::size_t delta_rank, std::size_t conv_k,
                              Rng& rng) {
    if (d == 0 || conv_k == 0) throw std::invalid_argument("make_dim_block: zero dimension");
    const std::size_t di = 2 * d;  // inner width fixed at 2D

    DimBlockParams p;
    p.norm_scale = Tensor::full({d}, 1.0);
    p.norm_shift = Tensor({d});

    const double kin = 1.0 / std::sqrt(static_cast<double>(d));
    p.in_proj_fwd.w = rand_uniform(rng, {2 * di, d}, -kin, kin);
    p.in_proj_bwd.w = rand_uniform(rng, {2 * di, d}, -kin, kin);

    const double kc = 1.0 / std::sqrt(static_cast<double>(conv_k));
    p.conv_w_fwd = rand_uniform(rng, {di, conv_k}, -kc, kc);
    p.conv_b_fwd = Tensor({di});
    p.conv_w_bwd = rand_uniform(rng, {di, conv_k}, -kc, kc);
    p.conv_b_bwd = Tensor({di});

    p.ssm_fwd = make_ssm_params(di, state_n, delta_rank, rng);
    p.ssm_bwd = make_ssm_params(di, state_n, delta_rank, rng);

    p.out_proj.w = Tensor({d, di});     // zero: block starts as identity
    p.cond_mod.w = Tensor({3 * d, d});  // zero: conditioning starts as no-op
    p.cond_mod.b = Tensor({3 * d});
    return p;
}

DimBlockParams block_zeros_like(const DimBlockParams& p) {
    DimBlockParams z;
    z.norm_scale = Tensor(p.norm_scale.shape());
    z.norm_shift = Tensor(p.norm_shift.shape());
    z.in_proj_fwd.w = Tensor(p.in_proj_fwd.w.shape());
    z.in_proj_bwd.w = Tensor(p.in_proj_bwd.w.shape());
    z.conv_w_fwd = Tensor(p.conv_w_fwd.shape());
    z.conv_b_fwd = Tensor(p.conv_b_fwd.shape());
    z.conv_w_bwd = Tensor(p.conv_w_bwd.shape());
    z.conv_b_bwd = Tensor(p.conv_b_bwd.shape());
    z.ssm_fwd = ssm_zeros_like(p.ssm_fwd);
    z.ssm_bwd = ssm_zeros_like(p.ssm_bwd);
    z.out_proj.w = Tensor(p.out_proj.w.shape());
    z.cond_mod.w = Tensor(p.cond_mod.w.shape());
    z.cond_mod.b = Tensor(p.cond_mod.b.shape());
    return z;
}

void block_for_each_tensor(
    DimBlockParams& p, const std::string& prefix,
    const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".norm_scale", p.norm_scale);
    fn(prefix + ".norm_shift", p.norm_shift);
    fn(prefix + ".in_proj_fwd.w", p.in_proj_fwd.w);
    fn(prefix + ".in_proj_bwd.w", p.in_proj_bwd.w);
    fn(prefix + ".conv_w_fwd", p.conv_w_fwd);
    fn(prefix + ".conv_b_fwd", p.conv_b_fwd);
    fn(prefix + ".conv_w_bwd", p.conv_w_bwd);
    fn(prefix + ".conv_b_bwd", p.conv_b_bwd);
    ssm_for_each_tensor(p.ssm_fwd, prefix + ".ssm_fwd", fn);
    ssm_for_each_tensor(p.ssm_bwd, prefix + ".ssm_bwd", fn);
    fn(prefix + ".out_proj.w", p.out_proj.w);
    fn(prefix + ".cond_mod.w", p.cond_mod.w);
    fn(prefix + ".cond_mod.b", p.cond_mod.b);
}

Tensor reverse_rows(const Tensor& t) {
    const std::size_t rows = t.dim(0), cols = t.size() / t.dim(0);
    Tensor out(t.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = t.data() + r * cols;
        double* dst = out.data() + (rows - 1 - r) * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c];
    }
    return out;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t len = x.dim(0), d = x.dim(1), k = w.dim(1);
    if (w.dim(0) != d || b.size() != d) throw std::invalid_argument("causal_conv1d: weight shape mismatch");
    Tensor y({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            double acc = b[c];
            const std::size_t k0 = (t + 1 < k) ? (k - 1 - t) : 0;
            for (std::size_t kk = k0; kk < k; ++kk) {
                acc += w[c * k + kk] * x[(t + kk - (k - 1)) * d + c];
            }
            y[t * d + c] = acc;
        }
    }
    return y;
}

Tensor causal_conv1d_backward(const Tensor& x, const Tensor& w,
                              const Tensor& grad_y, Tensor& grad_w,
                              Tensor& grad_b) {
    const std::size_t len = x.dim(0), d = x.dim(1), k = w.dim(1);
    Tensor gx({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            const double gy = grad_y[t * d + c];
            grad_b[c] += gy;
            const std::size_t k0 = (t + 1 < k) ? (k - 1 - t) : 0;
            for (std::size_t kk = k0; kk < k; ++kk) {
                const std::size_t ti = t + kk - (k - 1);
                grad_w[c * k + kk] += gy * x[ti * d + c];
                gx[ti * d + c] += gy * w[c * k + kk];
            }
        }
    }
    return gx;
}

void layer_norm_rows(const Tensor& x, Tensor& x_hat, Tensor& inv_std) {
    const std::size_t rows = x.dim(0), d = x.dim(1);
    x_hat = Tensor({rows, d});
    inv_std = Tensor({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * d;
        double m = 0;
        for (std::size_t c = 0; c < d; ++c) m += xr[c];
        m /= static_cast<double>(d);
        double var = 0;
        for (std::size_t c = 0; c < d; ++c) var += (xr[c] - m) * (xr[c] - m);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[r] = is;
        double* hr = x_hat.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) hr[c] = (xr[c] - m) * is;
    }
}

// split [L x 2*di] into value and gate halves
static void split_vg(const Tensor& vg, Tensor& v, Tensor& g) {
    const std::size_t len = vg.dim(0), di = vg.dim(1) / 2;
    v = Tensor({len, di});
    g = Tensor({len, di});
    for (std::size_t t = 0; t < len; ++t) {
        const double* row = vg.data() + t * 2 * di;
        for (std::size_t c = 0; c < di; ++c) {
            v[t * di + c] = row[c];
            g[t * di + c] = row[di + c];
        }
    }
}

Tensor dim_block_forward(const Tensor& tokens, const Tensor& cond,
                         const DimBlockParams& p, BlockCache* cache) {
    if (tokens.rank() != 2 || tokens.dim(1) != p.d()) {
        throw std::invalid_argument("dim_block_forward: tokens must be [L x d]");
    }
    if (cond.size() != p.d()) throw std::invalid_argument("dim_block_forward: cond must be [d]");
    require_finite(cond, "dim_block_forward cond");
    const std::size_t len = tokens.dim(0), d = p.d(), di = p.d_inner();

    BlockCache local;
    BlockCache& cc = cache ? *cache : local;

    // cond -> (shift, scale, gate); gate applies as (1 + gate) on the branch
    Tensor cond_row({1, d}, cond.vec());
    cc.mod3 = p.cond_mod.forward(cond_row);
    const double* shift = cc.mod3.data();
    const double* sc = cc.mod3.data() + d;

    layer_norm_rows(tokens, cc.x_hat, cc.inv_std);
    cc.u = Tensor({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            double v = cc.x_hat[t * d + c] * p.norm_scale[c] + p.norm_shift[c];
            cc.u[t * d + c] = v * (1.0 + sc[c]) + shift[c];
        }
    }

    Tensor vg_f = p.in_proj_fwd.forward(cc.u);
    split_vg(vg_f, cc.v_fwd, cc.g_fwd);
    Tensor vg_b = p.in_proj_bwd.forward(cc.u);
    split_vg(vg_b, cc.v_bwd, cc.g_bwd);

    // forward direction
    cc.conv_out_fwd = causal_conv1d(cc.v_fwd, p.conv_w_fwd, p.conv_b_fwd);
    cc.scan_in_fwd = silu(cc.conv_out_fwd);
    cc.y_fwd = selective_scan(cc.scan_in_fwd, p.ssm_fwd,
                              cache ? &cc.scan_fwd : nullptr);

    // backward direction: causal in reversed order
    Tensor v_rev = reverse_rows(cc.v_bwd);
    cc.conv_out_bwd_rev = causal_conv1d(v_rev, p.conv_w_bwd, p.conv_b_bwd);
    cc.scan_in_bwd_rev = silu(cc.conv_out_bwd_rev);
    Tensor y_rev = selective_scan(cc.scan_in_bwd_rev, p.ssm_bwd,
                                  cache ? &cc.scan_bwd : nullptr);
    cc.y_bwd = reverse_rows(y_rev);

    cc.combined = Tensor({len, di});
    for (std::size_t i = 0; i < cc.combined.size(); ++i) {
        cc.combined[i] = cc.y_fwd[i] * silu_scalar(cc.g_fwd[i]) +
                         cc.y_bwd[i] * silu_scalar(cc.g_bwd[i]);
    }

    cc.proj_out = p.out_proj.forward(cc.combined);
    const double* gate = cc.mod3.data() + 2 * d;
    Tensor out({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            out[t * d + c] =
                tokens[t * d + c] + (1.0 + gate[c]) * cc.proj_out[t * d + c];
        }
    }
    require_finite(out, "dim_block_forward");
    return out;
}

Tensor dim_block_backward(const Tensor& tokens, const Tensor& cond,
                          const DimBlockParams& p, const BlockCache& cc,
                          const Tensor& grad_out, DimBlockParams& grads,
                          Tensor& grad_cond) {
    if (!grad_out.same_shape(tokens)) {
        throw std::invalid_argument("dim_block_backward: grad_out shape mismatch");
    }
    const std::size_t len = tokens.dim(0), d = p.d(), di = p.d_inner();
    const double* gate = cc.mod3.data() + 2 * d;
    const double* sc = cc.mod3.data() + d;

    // residual + gated branch
    Tensor g_tokens = grad_out;
    Tensor g_mod3({1, 3 * d});
    double* g_shift = g_mod3.data();
    double* g_scale = g_mod3.data() + d;
    double* g_gate = g_mod3.data() + 2 * d;

    Tensor g_proj({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            const double go = grad_out[t * d + c];
            g_gate[c] += go * cc.proj_out[t * d + c];
            g_proj[t * d + c] = go * (1.0 + gate[c]);
        }
    }

    Tensor g_combined({len, di});
    linear_backward(cc.combined.data(), p.out_proj.w.data(), g_proj.data(),
                    g_combined.data(), grads.out_proj.w.data(), nullptr, len,
                    di, d);

    // combined = y_f*silu(g_f) + y_b*silu(g_b)
    Tensor g_yf({len, di}), g_gf({len, di}), g_yb({len, di}), g_gb({len, di});
    for (std::size_t i = 0; i < g_combined.size(); ++i) {
        const double gc = g_combined[i];
        g_yf[i] = gc * silu_scalar(cc.g_fwd[i]);
        g_gf[i] = gc * cc.y_fwd[i] * silu_grad_scalar(cc.g_fwd[i]);
        g_yb[i] = gc * silu_scalar(cc.g_bwd[i]);
        g_gb[i] = gc * cc.y_bwd[i] * silu_grad_scalar(cc.g_bwd[i]);
    }

    // forward direction chain
    Tensor g_scan_in_f = selective_scan_backward(cc.scan_in_fwd, p.ssm_fwd,
                                                 cc.scan_fwd, g_yf,
                                                 grads.ssm_fwd);
    for (std::size_t i = 0; i < g_scan_in_f.size(); ++i)
        g_scan_in_f[i] *= silu_grad_scalar(cc.conv_out_fwd[i]);
    Tensor g_vf = causal_conv1d_backward(cc.v_fwd, p.conv_w_fwd, g_scan_in_f,
                                         grads.conv_w_fwd, grads.conv_b_fwd);

    // backward direction chain (work in reversed order, flip at the ends)
    Tensor g_y_rev = reverse_rows(g_yb);
    Tensor g_scan_in_b = selective_scan_backward(cc.scan_in_bwd_rev, p.ssm_bwd,
                                                 cc.scan_bwd, g_y_rev,
                                                 grads.ssm_bwd);
    for (std::size_t i = 0; i < g_scan_in_b.size(); ++i)
        g_scan_in_b[i] *= silu_grad_scalar(cc.conv_out_bwd_rev[i]);
    Tensor v_rev = reverse_rows(cc.v_bwd);
    Tensor g_vb_rev = causal_conv1d_backward(v_rev, p.conv_w_bwd, g_scan_in_b,
                                             grads.conv_w_bwd, grads.conv_b_bwd);
    Tensor g_vb = reverse_rows(g_vb_rev);

    // in_proj adjoints, value and gate halves re-packed
    Tensor g_u({len, d});
    {
        Tensor g_vg({len, 2 * di});
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t c = 0; c < di; ++c) {
                g_vg[t * 2 * di + c] = g_vf[t * di + c];
                g_vg[t * 2 * di + di + c] = g_gf[t * di + c];
            }
        }
        linear_backward(cc.u.data(), p.in_proj_fwd.w.data(), g_vg.data(),
                        g_u.data(), grads.in_proj_fwd.w.data(), nullptr, len,
                        d, 2 * di);
    }
    {
        Tensor g_vg({len, 2 * di});
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t c = 0; c < di; ++c) {
                g_vg[t * 2 * di + c] = g_vb[t * di + c];
                g_vg[t * 2 * di + di + c] = g_gb[t * di + c];
            }
        }
        Tensor g_u2({len, d});
        linear_backward(cc.u.data(), p.in_proj_bwd.w.data(), g_vg.data(),
                        g_u2.data(), grads.in_proj_bwd.w.data(), nullptr, len,
                        d, 2 * di);
        for (std::size_t i = 0; i < g_u.size(); ++i) g_u[i] += g_u2[i];
    }

    // modulation: u = (x_hat*gamma + beta)*(1+scale) + shift
    Tensor g_xhat({len, d});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            const double gu = g_u[t * d + c];
            const double v =
                cc.x_hat[t * d + c] * p.norm_scale[c] + p.norm_shift[c];
            g_shift[c] += gu;
            g_scale[c] += gu * v;
            const double gv = gu * (1.0 + sc[c]);
            grads.norm_scale[c] += gv * cc.x_hat[t * d + c];
            grads.norm_shift[c] += gv;
            g_xhat[t * d + c] = gv * p.norm_scale[c];
        }
    }

    // layer norm adjoint per token
    for (std::size_t t = 0; t < len; ++t) {
        const double* hr = cc.x_hat.data() + t * d;
        const double* gh = g_xhat.data() + t * d;
        double mg = 0, mgh = 0;
        for (std::size_t c = 0; c < d; ++c) {
            mg += gh[c];
            mgh += gh[c] * hr[c];
        }
        mg /= static_cast<double>(d);
        mgh /= static_cast<double>(d);
        const double is = cc.inv_std[t];
        for (std::size_t c = 0; c < d; ++c) {
            g_tokens[t * d + c] += is * (gh[c] - mg - hr[c] * mgh);
        }
    }

    // cond path
    Tensor cond_row({1, d}, cond.vec());
    Tensor g_cond_row({1, d});
    linear_backward(cond_row.data(), p.cond_mod.w.data(), g_mod3.data(),
                    g_cond_row.data(), grads.cond_mod.w.data(),
                    grads.cond_mod.b.data(), 1, d, 3 * d);
    for (std::size_t c = 0; c < d; ++c) grad_cond[c] += g_cond_row[c];

    return g_tokens;
}

}  // namespace dim
