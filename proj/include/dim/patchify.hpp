#pragma once

#include "dim/tensor.hpp"

namespace dim {

// Latent layout descriptor. Images are the t_frames == 1 case; video latents
// carry a leading frame axis. Patch size must divide both spatial dims.
struct PatchGrid {
    std::size_t t_frames = 1;
    std::size_t h_z = 0, w_z = 0;
    std::size_t c = 0;
    std::size_t p = 0;

    std::size_t rows() const { return h_z / p; }
    std::size_t cols() const { return w_z / p; }
    std::size_t tokens_per_frame() const { return rows() * cols(); }
    std::size_t total_tokens() const { return t_frames * tokens_per_frame(); }
    std::size_t token_dim() const { return p * p * c; }
};

// Validates divisibility; the error names the offending axis.
PatchGrid make_grid(std::size_t t_frames, std::size_t h_z, std::size_t w_z,
                    std::size_t c, std::size_t p);

// z: [t x h x w x c] (rank 4) or [h x w x c] (rank 3, single frame) ->
// [L_total x p^2*c]. Token order is (frame, row, col) lexicographic; within a
// patch, pixels row-major then channel.
Tensor patchify(const Tensor& z, const PatchGrid& grid);

// Exact inverse of patchify's index map.
Tensor depatchify(const Tensor& tokens, const PatchGrid& grid);

// Fixed sinusoidal tables. sincos_1d rows are [sin(p*w_0..), cos(p*w_0..)]
// with w_i = 10000^(-2i/dim).
Tensor sincos_1d(std::size_t n_pos, std::size_t dim);

// Per-token position table for a grid: 2-D spatial sincos (row half, col
// half), plus a 1-D temporal sincos summed in when t_frames > 1. d must be a
// multiple of 4.
Tensor position_table(const PatchGrid& grid, std::size_t d);

// Scalar-timestep sinusoidal basis (the input to the time MLP).
Tensor timestep_basis(double t, std::size_t dim);

// Assembled token sequence: row 0 is the class/conditioning token, rows
// 1..L are proj(patch) + pos. Errors when the pos table is shorter than the
// patch sequence.
Tensor embed_tokens(const Tensor& patches, const Linear& proj,
                    const Tensor& pos, const Tensor& class_tok);

}  // namespace dim
