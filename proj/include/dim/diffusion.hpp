#pragma once

#include "dim/model.hpp"

namespace dim {

// Precomputed schedule tables, 1-based timestep convention: beta(t), t in
// [1, T]. alpha_bar is the exact running product of the alpha entries.
struct NoiseSchedule {
    std::size_t steps = 0;
    Tensor beta;
    Tensor alpha;
    Tensor alpha_bar;
    Tensor posterior_var;  // beta_tilde; index 0 (t=1) uses alpha_bar_0 = 1

    double beta_t(std::size_t t) const { return beta[t - 1]; }
    double alpha_t(std::size_t t) const { return alpha[t - 1]; }
    double alpha_bar_t(std::size_t t) const {
        return t == 0 ? 1.0 : alpha_bar[t - 1];
    }
};

// Linear beta ramp over T steps. Errors: T < 1, or bounds outside
// 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(std::size_t t_steps, double beta_start,
                            double beta_end);

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps
Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps,
                const NoiseSchedule& sched);

// Gaussian posterior q(z_{t-1} | z_t, z0); t >= 2 (the t=1 step belongs to
// the decoder and is handled inside the sampler).
void posterior_params(const Tensor& z_t, const Tensor& z0, std::size_t t,
                      const NoiseSchedule& sched, Tensor& mean, double& var);

// eps_uncond + s * (eps_cond - eps_uncond); s == 1 returns eps_cond exactly
// (bitwise), matching the single-forward sampling path.
Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double s);

struct SampleOptions {
    int label = -1;          // -1 = unconditional
    double cfg_scale = 1.0;  // 1 = no guidance (single forward pass)
    std::size_t steps = 250;
    bool clamp_z0 = false;  // [-1,1] clamp for raw-image latents
};

// Ancestral DDPM loop over an evenly strided timestep subset (stride 1 when
// steps == T). The final step returns the posterior mean.
Tensor ddpm_sample(const DimModel& m, const NoiseSchedule& sched,
                   const std::vector<std::size_t>& latent_shape,
                   const SampleOptions& opts, Rng& rng);

// For a given sub-chain length, the 1-based timesteps visited in descending
// order; exposed so tests can pin the respacing rule.
std::vector<std::size_t> respaced_timesteps(std::size_t t_steps,
                                            std::size_t sample_steps);

// L_simple = mean ||eps - eps_theta(q_sample(z0, t, eps), t, y)||^2.
// Accumulates parameter gradients into *grads when non-null.
double loss_simple(const DimModel& m, const NoiseSchedule& sched,
                   const Tensor& z0, std::size_t t, const Tensor& eps, int y,
                   DimModel* grads);

struct EmaState {
    DimModel shadow;
};

EmaState make_ema(const DimModel& m);

// shadow <- decay*shadow + (1-decay)*param, every tensor.
void ema_update(EmaState& ema, const DimModel& m, double decay);

}  // namespace dim
