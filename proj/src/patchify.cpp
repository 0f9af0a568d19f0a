#include "dim/patchify.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dim {

PatchGrid make_grid(std::size_t t_frames, std::size_t h_z, std::size_t w_z,
                    std::size_t c, std::size_t p) {
    if (t_frames == 0 || h_z == 0 || w_z == 0 || c == 0 || p == 0) {
        throw std::invalid_argument("make_grid: zero dimension");
    }
    if (h_z % p != 0) {
        throw std::invalid_argument("make_grid: patch size " + std::to_string(p) +
                                    " does not divide height " + std::to_string(h_z));
    }
    if (w_z % p != 0) {
        throw std::invalid_argument("make_grid: patch size " + std::to_string(p) +
                                    " does not divide width " + std::to_string(w_z));
    }
    return PatchGrid{t_frames, h_z, w_z, c, p};
}

static void check_latent_shape(const Tensor& z, const PatchGrid& g) {
    bool ok = false;
    if (z.rank() == 4) {
        ok = z.dim(0) == g.t_frames && z.dim(1) == g.h_z && z.dim(2) == g.w_z &&
             z.dim(3) == g.c;
    } else if (z.rank() == 3 && g.t_frames == 1) {
        ok = z.dim(0) == g.h_z && z.dim(1) == g.w_z && z.dim(2) == g.c;
    }
    if (!ok) {
        throw std::invalid_argument("latent shape " + shape_str(z.shape()) +
                                    " does not match grid");
    }
}

Tensor patchify(const Tensor& z, const PatchGrid& g) {
    check_latent_shape(z, g);
    const std::size_t rows = g.rows(), cols = g.cols(), p = g.p, c = g.c;
    Tensor out({g.total_tokens(), g.token_dim()});
    const std::size_t frame_stride = g.h_z * g.w_z * c;
    for (std::size_t f = 0; f < g.t_frames; ++f) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t col = 0; col < cols; ++col) {
                const std::size_t tok = (f * rows + r) * cols + col;
                double* dst = out.data() + tok * g.token_dim();
                for (std::size_t pr = 0; pr < p; ++pr) {
                    for (std::size_t pc = 0; pc < p; ++pc) {
                        const std::size_t y = r * p + pr, x = col * p + pc;
                        const double* src =
                            z.data() + f * frame_stride + (y * g.w_z + x) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            dst[(pr * p + pc) * c + ch] = src[ch];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor depatchify(const Tensor& tokens, const PatchGrid& g) {
    if (tokens.rank() != 2 || tokens.dim(0) != g.total_tokens() ||
        tokens.dim(1) != g.token_dim()) {
        throw std::invalid_argument("depatchify: token shape " +
                                    shape_str(tokens.shape()) +
                                    " does not match grid");
    }
    const std::size_t rows = g.rows(), cols = g.cols(), p = g.p, c = g.c;
    Tensor z({g.t_frames, g.h_z, g.w_z, g.c});
    const std::size_t frame_stride = g.h_z * g.w_z * c;
    for (std::size_t f = 0; f < g.t_frames; ++f) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t col = 0; col < cols; ++col) {
                const std::size_t tok = (f * rows + r) * cols + col;
                const double* src = tokens.data() + tok * g.token_dim();
                for (std::size_t pr = 0; pr < p; ++pr) {
                    for (std::size_t pc = 0; pc < p; ++pc) {
                        const std::size_t y = r * p + pr, x = col * p + pc;
                        double* dst =
                            z.data() + f * frame_stride + (y * g.w_z + x) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            dst[ch] = src[(pr * p + pc) * c + ch];
                        }
                    }
                }
            }
        }
    }
    return z;
}

Tensor sincos_1d(std::size_t n_pos, std::size_t dim) {
    if (dim % 2 != 0) throw std::invalid_argument("sincos_1d: dim must be even");
    const std::size_t half = dim / 2;
    Tensor out({n_pos, dim});
    for (std::size_t pos = 0; pos < n_pos; ++pos) {
        for (std::size_t i = 0; i < half; ++i) {
            const double w = std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                                   static_cast<double>(dim));
            const double a = static_cast<double>(pos) * w;
            out[pos * dim + i] = std::sin(a);
            out[pos * dim + half + i] = std::cos(a);
        }
    }
    return out;
}

Tensor position_table(const PatchGrid& g, std::size_t d) {
    if (d % 4 != 0) throw std::invalid_argument("position_table: d must be a multiple of 4");
    const std::size_t half = d / 2;
    Tensor row_emb = sincos_1d(g.rows(), half);
    Tensor col_emb = sincos_1d(g.cols(), half);
    Tensor time_emb =
        g.t_frames > 1 ? sincos_1d(g.t_frames, d) : Tensor({1, d});

    Tensor out({g.total_tokens(), d});
    for (std::size_t f = 0; f < g.t_frames; ++f) {
        const double* te = time_emb.data() + (g.t_frames > 1 ? f * d : 0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) {
                const std::size_t tok = (f * g.rows() + r) * g.cols() + c;
                double* dst = out.data() + tok * d;
                for (std::size_t i = 0; i < half; ++i) {
                    dst[i] = row_emb[r * half + i] + (g.t_frames > 1 ? te[i] : 0.0);
                    dst[half + i] = col_emb[c * half + i] +
                                    (g.t_frames > 1 ? te[half + i] : 0.0);
                }
            }
        }
    }
    return out;
}

Tensor timestep_basis(double t, std::size_t dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_basis: dim must be even");
    const std::size_t half = dim / 2;
    Tensor out({dim});
    for (std::size_t i = 0; i < half; ++i) {
        const double w = std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                               static_cast<double>(dim));
        out[i] = std::sin(t * w);
        out[half + i] = std::cos(t * w);
    }
    return out;
}

Tensor embed_tokens(const Tensor& patches, const Linear& proj,
                    const Tensor& pos, const Tensor& class_tok) {
    const std::size_t l = patches.dim(0), d = proj.out_dim();
    if (pos.rank() != 2 || pos.dim(1) != d) {
        throw std::invalid_argument("embed_tokens: pos table must be [n x d]");
    }
    if (pos.dim(0) < l) {
        throw std::invalid_argument("embed_tokens: pos table has " +
                                    std::to_string(pos.dim(0)) +
                                    " rows, need " + std::to_string(l));
    }
    if (class_tok.size() != d) throw std::invalid_argument("embed_tokens: class token must be [d]");

    Tensor projected = proj.forward(patches);
    Tensor out({1 + l, d});
    for (std::size_t c = 0; c < d; ++c) out[c] = class_tok[c];
    for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            out[(1 + t) * d + c] = projected[t * d + c] + pos[t * d + c];
        }
    }
    return out;
}

}  // namespace dim
