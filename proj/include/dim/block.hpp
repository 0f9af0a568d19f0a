#pragma once

#include "dim/ssm.hpp"

namespace dim {

// One DiM block: layer norm with conditioning modulation, per-direction
// value/gate projection to the 2D inner width, causal depthwise conv +
// selective scan per direction, gated combination, zero-initialized output
// projection back to D with a residual. Zero out_proj makes a fresh block an
// exact identity map.
struct DimBlockParams {
    Tensor norm_scale;   // [d], init 1
    Tensor norm_shift;   // [d], init 0
    Linear in_proj_fwd;  // [2*d_inner x d], no bias
    Linear in_proj_bwd;
    Tensor conv_w_fwd;  // [d_inner x k], depthwise taps, k-1 is current token
    Tensor conv_b_fwd;  // [d_inner]
    Tensor conv_w_bwd;
    Tensor conv_b_bwd;
    SsmParams ssm_fwd;
    SsmParams ssm_bwd;
    Linear out_proj;  // [d x d_inner], no bias, init 0
    Linear cond_mod;  // [3d x d] + bias, init 0; rows = (shift, scale, gate)

    std::size_t d() const { return norm_scale.size(); }
    std::size_t d_inner() const { return ssm_fwd.d_inner(); }
    std::size_t conv_k() const { return conv_w_fwd.dim(1); }
};

DimBlockParams make_dim_block(std::size_t d, std::size_t state_n,
                              std::size_t delta_rank, std::size_t conv_k,
                              Rng& rng);
DimBlockParams block_zeros_like(const DimBlockParams& p);
void block_for_each_tensor(DimBlockParams& p, const std::string& prefix,
                           const std::function<void(const std::string&, Tensor&)>& fn);

struct BlockCache {
    Tensor x_hat;    // [L x d] normalized tokens, pre-affine
    Tensor inv_std;  // [L]
    Tensor mod3;     // [1 x 3d] cond_mod output
    Tensor u;        // [L x d] modulated tokens
    Tensor v_fwd, g_fwd;  // [L x d_inner]
    Tensor v_bwd, g_bwd;
    Tensor conv_out_fwd;      // [L x d_inner], pre-silu
    Tensor conv_out_bwd_rev;  // reversed order, pre-silu
    Tensor scan_in_fwd;       // silu(conv_out)
    Tensor scan_in_bwd_rev;
    ScanCache scan_fwd;
    ScanCache scan_bwd;
    Tensor y_fwd;      // [L x d_inner]
    Tensor y_bwd;      // [L x d_inner], back in forward order
    Tensor combined;   // [L x d_inner]
    Tensor proj_out;   // [L x d] out_proj(combined)
};

// tokens: [L x d], cond: [d]. Errors on empty input or non-finite cond.
Tensor dim_block_forward(const Tensor& tokens, const Tensor& cond,
                         const DimBlockParams& p, BlockCache* cache = nullptr);

// Exact adjoint; parameter grads accumulate into `grads`
// (block_zeros_like-shaped), cond grads into grad_cond. Returns grad_tokens.
Tensor dim_block_backward(const Tensor& tokens, const Tensor& cond,
                          const DimBlockParams& p, const BlockCache& cache,
                          const Tensor& grad_out, DimBlockParams& grads,
                          Tensor& grad_cond);

// row-order reversal of an [L x d] tensor
Tensor reverse_rows(const Tensor& t);

// Depthwise causal conv along rows; w: [d x k], tap k-1 aligned with the
// current row, zero left padding.
Tensor causal_conv1d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor causal_conv1d_backward(const Tensor& x, const Tensor& w,
                              const Tensor& grad_y, Tensor& grad_w,
                              Tensor& grad_b);

// Per-token layer norm (no learned affine inside; eps 1e-5).
void layer_norm_rows(const Tensor& x, Tensor& x_hat, Tensor& inv_std);

}  // namespace dim
