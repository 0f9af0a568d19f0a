#pragma once

#include <functional>
#include <string>

#include "dim/rng.hpp"
#include "dim/tensor.hpp"

namespace dim {

// Per-direction state-space parameters. A is restricted to a real negative
// diagonal, stored as a_log with A = -exp(a_log); together with delta > 0
// this keeps |exp(delta*a)| < 1 and the scan stable.
struct SsmParams {
    Tensor a_log;       // [d_inner x n]
    Tensor d_skip;      // [d_inner], direct feedthrough
    Linear x_proj;      // (delta_rank + 2n) x d_inner, no bias
    Linear delta_proj;  // d_inner x delta_rank, with bias

    std::size_t d_inner() const { return a_log.dim(0); }
    std::size_t state_n() const { return a_log.dim(1); }
    std::size_t delta_rank() const { return delta_proj.in_dim(); }
};

// a_log rows ln(1..n), d_skip 1, delta bias placed so softplus lands in
// [dt_min, dt_max].
SsmParams make_ssm_params(std::size_t d_inner, std::size_t n,
                          std::size_t delta_rank, Rng& rng,
                          double dt_min = 1e-3, double dt_max = 1e-1);
SsmParams ssm_zeros_like(const SsmParams& p);
void ssm_for_each_tensor(SsmParams& p, const std::string& prefix,
                         const std::function<void(const std::string&, Tensor&)>& fn);

// Series-branch cut for the ZOH b_bar factor. Mutable only as a fault
// injection seam for the verification suite; production code never touches
// it.
double zoh_series_threshold();
void set_zoh_series_threshold(double t);

// Zero-order-hold factors for one diagonal entry: a_bar = exp(delta*a) and
// phi with b_bar = phi*b. Below the series threshold phi = delta*(1 +
// delta*a/2), otherwise expm1(delta*a)/a.
void zoh_scalar(double a, double delta, double& a_bar, double& phi);

// a: [d_inner x n] (negative), delta: [d_inner] (positive), b: [n].
// Returns a_bar, b_bar with shape [d_inner x n]. Errors on delta <= 0 or
// a >= 0.
void discretize_zoh(const Tensor& a, const Tensor& delta, const Tensor& b,
                    Tensor& a_bar, Tensor& b_bar);

// Saved forward state for the adjoint pass.
struct ScanCache {
    Tensor delta;   // [L x d_inner], post-softplus
    Tensor b_tok;   // [L x n]
    Tensor c_tok;   // [L x n]
    Tensor h;       // [L x d_inner x n]
    Tensor a_bar;   // [L x d_inner x n]
    Tensor phi;     // [L x d_inner x n], b_bar = phi * b_tok
    // selective path only:
    Tensor dl;         // [L x delta_rank]
    Tensor delta_pre;  // [L x d_inner], pre-softplus
};

// Fixed-parameter recurrence h_t = a_bar_t*h_{t-1} + b_bar_t*x_t,
// y_t = c_t . h_t + d_skip*x_t, with per-token delta/b/c supplied by the
// caller. This is the shared core of the selective path and the
// time-invariant oracle cases.
Tensor ssm_scan(const Tensor& x, const Tensor& a, const Tensor& delta,
                const Tensor& b_tok, const Tensor& c_tok, const Tensor& d_skip,
                ScanCache* cache = nullptr);

struct ScanGrads {
    Tensor x;       // [L x d_inner]
    Tensor a;       // [d_inner x n]
    Tensor delta;   // [L x d_inner]
    Tensor b_tok;   // [L x n]
    Tensor c_tok;   // [L x n]
    Tensor d_skip;  // [d_inner]
};

ScanGrads ssm_scan_backward(const Tensor& x, const Tensor& a,
                            const Tensor& d_skip, const ScanCache& cache,
                            const Tensor& grad_y);

// Selective scan: delta/b/c derived per token from x through
// x_proj/delta_proj (delta = softplus(delta_proj(dl) + bias)), then the
// recurrence above.
Tensor selective_scan(const Tensor& x, const SsmParams& p,
                      ScanCache* cache = nullptr);

// Adjoint of the full selective path. Parameter gradients accumulate into
// `grads` (an ssm_zeros_like-shaped holder); returns grad_x.
Tensor selective_scan_backward(const Tensor& x, const SsmParams& p,
                               const ScanCache& cache, const Tensor& grad_y,
                               SsmParams& grads);

// Time-invariant convolutional kernel (C.B_bar, C.A_bar.B_bar, ...,
// C.A_bar^{L-1}.B_bar) for one channel; a_bar, b_bar, c are [n].
Tensor ssm_conv_kernel(const Tensor& a_bar, const Tensor& b_bar,
                       const Tensor& c, std::size_t len);

// y[t] = sum_{k<=t} kernel[k] * x[t-k]; direct O(L^2) form, used as the
// equivalence oracle for the recurrence.
Tensor causal_conv_full(const Tensor& kernel, const Tensor& x);

}  // namespace dim
