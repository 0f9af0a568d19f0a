#include "dim/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

const char* size_tag_name(SizeTag t) {
    switch (t) {
        case SizeTag::S: return "S";
        case SizeTag::B: return "B";
        case SizeTag::L: return "L";
        case SizeTag::XL: return "XL";
        case SizeTag::Micro: return "micro";
    }
    return "?";
}

SizeTag size_tag_from_name(const std::string& name) {
    if (name == "S" || name == "s") return SizeTag::S;
    if (name == "B" || name == "b") return SizeTag::B;
    if (name == "L" || name == "l") return SizeTag::L;
    if (name == "XL" || name == "xl" || name == "Xl") return SizeTag::XL;
    if (name == "micro" || name == "custom") return SizeTag::Micro;
    throw std::invalid_argument("unknown model size '" + name +
                                "' (expected S, B, L, XL or micro)");
}

static void ladder_dims(SizeTag tag, std::size_t& layers, std::size_t& hidden) {
    switch (tag) {
        case SizeTag::S: layers = 16; hidden = 384; return;
        case SizeTag::B: layers = 16; hidden = 768; return;
        case SizeTag::L: layers = 32; hidden = 1024; return;
        case SizeTag::XL: layers = 36; hidden = 1152; return;
        default: throw std::invalid_argument("ladder_dims: not a named size");
    }
}

ModelConfig config_for_size(SizeTag tag, std::size_t patch,
                            std::size_t in_channels, std::size_t num_classes,
                            std::size_t frames) {
    ModelConfig cfg;
    cfg.size_tag = tag;
    if (tag != SizeTag::Micro) ladder_dims(tag, cfg.layers, cfg.hidden_d);
    cfg.patch = patch;
    cfg.in_channels = in_channels;
    cfg.num_classes = num_classes;
    cfg.frames = frames;
    validate_config(cfg);
    return cfg;
}

void validate_config(const ModelConfig& cfg) {
    if (cfg.patch != 2 && cfg.patch != 4 && cfg.patch != 8) {
        throw std::invalid_argument("config: patch must be 2, 4 or 8, got " +
                                    std::to_string(cfg.patch));
    }
    if (cfg.size_tag != SizeTag::Micro) {
        std::size_t layers, hidden;
        ladder_dims(cfg.size_tag, layers, hidden);
        if (cfg.layers != layers || cfg.hidden_d != hidden) {
            throw std::invalid_argument(
                std::string("config: size ") + size_tag_name(cfg.size_tag) +
                " pins (layers, hidden) = (" + std::to_string(layers) + ", " +
                std::to_string(hidden) + ")");
        }
    }
    if (cfg.layers == 0 || cfg.hidden_d == 0 || cfg.in_channels == 0 ||
        cfg.num_classes == 0 || cfg.frames == 0 || cfg.ssm_state_n == 0 ||
        cfg.conv_k == 0) {
        throw std::invalid_argument("config: zero-valued field");
    }
    if (cfg.hidden_d % 4 != 0) {
        throw std::invalid_argument("config: hidden size must be a multiple of 4 "
                                    "(2-D sincos position split)");
    }
    if (cfg.time_freq_dim % 2 != 0) {
        throw std::invalid_argument("config: time_freq_dim must be even");
    }
}

DimModel build_model(const ModelConfig& cfg, Rng& rng) {
    validate_config(cfg);
    DimModel m;
    m.cfg = cfg;
    const std::size_t d = cfg.hidden_d, td = cfg.token_dim();

    const double kp = 1.0 / std::sqrt(static_cast<double>(td));
    m.patch_proj.w = rand_uniform(rng, {d, td}, -kp, kp);
    m.patch_proj.b = Tensor({d});

    // time MLP and class table start small-normal, DiT-style
    m.time_mlp1.w = randn(rng, {d, cfg.time_freq_dim});
    for (auto& v : m.time_mlp1.w.vec()) v *= 0.02;
    m.time_mlp1.b = Tensor({d});
    m.time_mlp2.w = randn(rng, {d, d});
    for (auto& v : m.time_mlp2.w.vec()) v *= 0.02;
    m.time_mlp2.b = Tensor({d});

    m.class_table = randn(rng, {cfg.num_classes + 1, d});
    for (auto& v : m.class_table.vec()) v *= 0.02;

    m.blocks.reserve(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        m.blocks.push_back(make_dim_block(d, cfg.ssm_state_n,
                                          cfg.delta_rank_eff(), cfg.conv_k, rng));
    }

    m.final_mod.w = Tensor({2 * d, d});
    m.final_mod.b = Tensor({2 * d});
    m.head.w = Tensor({td, d});
    m.head.b = Tensor({td});
    return m;
}

DimModel model_zeros_like(const DimModel& m) {
    DimModel z;
    z.cfg = m.cfg;
    z.patch_proj.w = Tensor(m.patch_proj.w.shape());
    z.patch_proj.b = Tensor(m.patch_proj.b.shape());
    z.time_mlp1.w = Tensor(m.time_mlp1.w.shape());
    z.time_mlp1.b = Tensor(m.time_mlp1.b.shape());
    z.time_mlp2.w = Tensor(m.time_mlp2.w.shape());
    z.time_mlp2.b = Tensor(m.time_mlp2.b.shape());
    z.class_table = Tensor(m.class_table.shape());
    z.blocks.reserve(m.blocks.size());
    for (const auto& b : m.blocks) z.blocks.push_back(block_zeros_like(b));
    z.final_mod.w = Tensor(m.final_mod.w.shape());
    z.final_mod.b = Tensor(m.final_mod.b.shape());
    z.head.w = Tensor(m.head.w.shape());
    z.head.b = Tensor(m.head.b.shape());
    return z;
}

void model_for_each_tensor(
    DimModel& m, const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("patch_proj.w", m.patch_proj.w);
    fn("patch_proj.b", m.patch_proj.b);
    fn("time_mlp1.w", m.time_mlp1.w);
    fn("time_mlp1.b", m.time_mlp1.b);
    fn("time_mlp2.w", m.time_mlp2.w);
    fn("time_mlp2.b", m.time_mlp2.b);
    fn("class_table", m.class_table);
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        block_for_each_tensor(m.blocks[i], "blocks." + std::to_string(i), fn);
    }
    fn("final_mod.w", m.final_mod.w);
    fn("final_mod.b", m.final_mod.b);
    fn("head.w", m.head.w);
    fn("head.b", m.head.b);
}

std::size_t count_params(const DimModel& m) {
    std::size_t n = 0;
    model_for_each_tensor(const_cast<DimModel&>(m),
                          [&](const std::string&, Tensor& t) { n += t.size(); });
    return n;
}

std::size_t count_params(const ModelConfig& cfg) {
    const std::size_t d = cfg.hidden_d, di = cfg.d_inner(), td = cfg.token_dim();
    const std::size_t n = cfg.ssm_state_n, r = cfg.delta_rank_eff(),
                      k = cfg.conv_k, f = cfg.time_freq_dim;

    const std::size_t ssm = di * n + di + (r + 2 * n) * di + di * r + di;
    const std::size_t block = 2 * d                    // norm scale/shift
                              + 2 * (2 * di * d)       // in_proj per direction
                              + 2 * (di * k + di)      // conv per direction
                              + 2 * ssm                // ssm per direction
                              + d * di                 // out_proj
                              + (3 * d * d + 3 * d);   // cond_mod

    std::size_t total = cfg.layers * block;
    total += td * d + d;                    // patch_proj
    total += d * f + d + d * d + d;         // time MLP
    total += (cfg.num_classes + 1) * d;     // class table
    total += 2 * d * d + 2 * d;             // final_mod
    total += td * d + td;                   // head
    return total;
}

Tensor model_cond_vector(const DimModel& m, std::size_t t, int y,
                         ModelCache* cache) {
    const std::size_t d = m.cfg.hidden_d;
    if (t < 1) throw std::invalid_argument("model: timestep must be >= 1");
    if (y < -1 || y >= static_cast<int>(m.cfg.num_classes)) {
        throw std::invalid_argument("model: class label " + std::to_string(y) +
                                    " out of range");
    }
    const std::size_t row =
        y < 0 ? m.cfg.num_classes : static_cast<std::size_t>(y);

    Tensor tb = timestep_basis(static_cast<double>(t), m.cfg.time_freq_dim);
    Tensor tb_row({1, m.cfg.time_freq_dim}, tb.vec());
    Tensor h_pre = m.time_mlp1.forward(tb_row);
    Tensor h({1, d});
    for (std::size_t i = 0; i < d; ++i) h[i] = silu_scalar(h_pre[i]);
    Tensor t_emb = m.time_mlp2.forward(h);

    Tensor cond({d});
    for (std::size_t i = 0; i < d; ++i) {
        cond[i] = t_emb[i] + m.class_table[row * d + i];
    }
    if (cache) {
        cache->time_basis = tb;
        cache->time_h_pre = h_pre;
        cache->cond = cond;
        cache->label_row = static_cast<int>(row);
    }
    return cond;
}

static PatchGrid grid_for_input(const DimModel& m, const Tensor& z) {
    if (z.rank() == 4) {
        return make_grid(z.dim(0), z.dim(1), z.dim(2), z.dim(3), m.cfg.patch);
    }
    if (z.rank() == 3) {
        return make_grid(1, z.dim(0), z.dim(1), z.dim(2), m.cfg.patch);
    }
    throw std::invalid_argument("model: latent must be rank 3 or 4, got " +
                                shape_str(z.shape()));
}

Tensor model_forward(const DimModel& m, const Tensor& z, std::size_t t, int y,
                     ModelCache* cache) {
    const std::size_t d = m.cfg.hidden_d;
    PatchGrid grid = grid_for_input(m, z);
    if (grid.c != m.cfg.in_channels) {
        throw std::invalid_argument("model: latent has " + std::to_string(grid.c) +
                                    " channels, model expects " +
                                    std::to_string(m.cfg.in_channels));
    }

    ModelCache local;
    ModelCache& cc = cache ? *cache : local;
    cc.grid = grid;

    Tensor cond = model_cond_vector(m, t, y, &cc);
    Tensor class_tok = m.cfg.use_class_token ? cond : Tensor({d});
    Tensor cond_adaln = m.cfg.use_adaln ? cond : Tensor({d});

    cc.patches = patchify(z, grid);
    Tensor pos = position_table(grid, d);
    Tensor tokens = embed_tokens(cc.patches, m.patch_proj, pos, class_tok);

    cc.block_inputs.clear();
    cc.block_caches.clear();
    if (cache) {
        cc.block_inputs.reserve(m.blocks.size());
        cc.block_caches.resize(m.blocks.size());
    }
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        if (cache) {
            cc.block_inputs.push_back(tokens);
            tokens = dim_block_forward(tokens, cond_adaln, m.blocks[i],
                                       &cc.block_caches[i]);
        } else {
            tokens = dim_block_forward(tokens, cond_adaln, m.blocks[i], nullptr);
        }
    }

    // drop the class slot, then final norm + modulation + head
    const std::size_t l = grid.total_tokens();
    cc.body = Tensor({l, d});
    for (std::size_t i = 0; i < l * d; ++i) cc.body[i] = tokens[d + i];

    layer_norm_rows(cc.body, cc.final_xhat, cc.final_inv_std);
    Tensor cond_row({1, d}, cond_adaln.vec());
    cc.final_mod2 = m.final_mod.forward(cond_row);
    const double* shift = cc.final_mod2.data();
    const double* sc = cc.final_mod2.data() + d;
    cc.final_u = Tensor({l, d});
    for (std::size_t tt = 0; tt < l; ++tt) {
        for (std::size_t ci = 0; ci < d; ++ci) {
            cc.final_u[tt * d + ci] =
                cc.final_xhat[tt * d + ci] * (1.0 + sc[ci]) + shift[ci];
        }
    }
    Tensor out_tokens = m.head.forward(cc.final_u);
    Tensor eps4 = depatchify(out_tokens, grid);
    require_finite(eps4, "model_forward");
    if (z.rank() == 3) {
        return Tensor({z.dim(0), z.dim(1), z.dim(2)}, eps4.vec());
    }
    return eps4;
}

void model_backward(const DimModel& m, const ModelCache& cc,
                    const Tensor& grad_eps, DimModel& grads) {
    const std::size_t d = m.cfg.hidden_d;
    const std::size_t l = cc.grid.total_tokens();

    // depatchify adjoint is patchify with the same grid
    Tensor ge = grad_eps;
    if (ge.rank() == 3) {
        ge = Tensor({1, grad_eps.dim(0), grad_eps.dim(1), grad_eps.dim(2)},
                    grad_eps.vec());
    }
    Tensor g_out_tokens = patchify(ge, cc.grid);

    Tensor g_final_u({l, d});
    linear_backward(cc.final_u.data(), m.head.w.data(), g_out_tokens.data(),
                    g_final_u.data(), grads.head.w.data(), grads.head.b.data(),
                    l, d, m.cfg.token_dim());

    // final modulation
    const double* sc = cc.final_mod2.data() + d;
    Tensor g_mod2({1, 2 * d});
    Tensor g_xhat({l, d});
    for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t ci = 0; ci < d; ++ci) {
            const double gu = g_final_u[t * d + ci];
            g_mod2[ci] += gu;                                     // shift
            g_mod2[d + ci] += gu * cc.final_xhat[t * d + ci];     // scale
            g_xhat[t * d + ci] = gu * (1.0 + sc[ci]);
        }
    }

    // final layer norm adjoint
    Tensor g_body({l, d});
    for (std::size_t t = 0; t < l; ++t) {
        const double* hr = cc.final_xhat.data() + t * d;
        const double* gh = g_xhat.data() + t * d;
        double mg = 0, mgh = 0;
        for (std::size_t ci = 0; ci < d; ++ci) {
            mg += gh[ci];
            mgh += gh[ci] * hr[ci];
        }
        mg /= static_cast<double>(d);
        mgh /= static_cast<double>(d);
        for (std::size_t ci = 0; ci < d; ++ci) {
            g_body[t * d + ci] = cc.final_inv_std[t] * (gh[ci] - mg - hr[ci] * mgh);
        }
    }

    Tensor g_cond_adaln({d});
    {
        Tensor cond_adaln = m.cfg.use_adaln ? cc.cond : Tensor({d});
        Tensor cond_row({1, d}, cond_adaln.vec());
        Tensor g_cond_row({1, d});
        linear_backward(cond_row.data(), m.final_mod.w.data(), g_mod2.data(),
                        g_cond_row.data(), grads.final_mod.w.data(),
                        grads.final_mod.b.data(), 1, d, 2 * d);
        for (std::size_t ci = 0; ci < d; ++ci) g_cond_adaln[ci] = g_cond_row[ci];
    }

    // re-attach the (discarded) class slot with zero gradient
    Tensor g_tokens({1 + l, d});
    for (std::size_t i = 0; i < l * d; ++i) g_tokens[d + i] = g_body[i];

    Tensor cond_adaln = m.cfg.use_adaln ? cc.cond : Tensor({d});
    for (std::size_t i = m.blocks.size(); i-- > 0;) {
        g_tokens = dim_block_backward(cc.block_inputs[i], cond_adaln,
                                      m.blocks[i], cc.block_caches[i], g_tokens,
                                      grads.blocks[i], g_cond_adaln);
    }

    // embedder: rows 1.. feed patch_proj; row 0 is the class token
    Tensor g_proj({l, d});
    for (std::size_t i = 0; i < l * d; ++i) g_proj[i] = g_tokens[d + i];
    linear_backward(cc.patches.data(), m.patch_proj.w.data(), g_proj.data(),
                    nullptr, grads.patch_proj.w.data(),
                    grads.patch_proj.b.data(), l, m.cfg.token_dim(), d);

    Tensor g_cond({d});
    if (m.cfg.use_adaln) {
        for (std::size_t ci = 0; ci < d; ++ci) g_cond[ci] += g_cond_adaln[ci];
    }
    if (m.cfg.use_class_token) {
        for (std::size_t ci = 0; ci < d; ++ci) g_cond[ci] += g_tokens[ci];
    }

    // cond = time_mlp2(silu(time_mlp1(basis))) + class_table[row]
    const std::size_t row = static_cast<std::size_t>(cc.label_row);
    for (std::size_t ci = 0; ci < d; ++ci) {
        grads.class_table[row * d + ci] += g_cond[ci];
    }

    Tensor h({1, d});
    for (std::size_t i = 0; i < d; ++i) h[i] = silu_scalar(cc.time_h_pre[i]);
    Tensor g_cond_row({1, d}, g_cond.vec());
    Tensor g_h({1, d});
    linear_backward(h.data(), m.time_mlp2.w.data(), g_cond_row.data(),
                    g_h.data(), grads.time_mlp2.w.data(),
                    grads.time_mlp2.b.data(), 1, d, d);
    for (std::size_t i = 0; i < d; ++i) g_h[i] *= silu_grad_scalar(cc.time_h_pre[i]);
    Tensor tb_row({1, m.cfg.time_freq_dim}, cc.time_basis.vec());
    linear_backward(tb_row.data(), m.time_mlp1.w.data(), g_h.data(), nullptr,
                    grads.time_mlp1.w.data(), grads.time_mlp1.b.data(), 1,
                    m.cfg.time_freq_dim, d);
}

}  // namespace dim
