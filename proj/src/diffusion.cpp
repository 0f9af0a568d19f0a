#include "dim/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dim {

NoiseSchedule make_schedule(std::size_t t_steps, double beta_start,
                            double beta_end) {
    if (t_steps < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument(
            "make_schedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.steps = t_steps;
    s.beta = Tensor({t_steps});
    s.alpha = Tensor({t_steps});
    s.alpha_bar = Tensor({t_steps});
    s.posterior_var = Tensor({t_steps});

    double running = 1.0;
    for (std::size_t i = 0; i < t_steps; ++i) {
        const double frac =
            t_steps == 1 ? 0.0
                         : static_cast<double>(i) / static_cast<double>(t_steps - 1);
        s.beta[i] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[i] = 1.0 - s.beta[i];
        running *= s.alpha[i];  // alpha_bar[i] == alpha_bar[i-1]*alpha[i] exactly
        s.alpha_bar[i] = running;
    }
    for (std::size_t i = 0; i < t_steps; ++i) {
        const double ab_prev = i == 0 ? 1.0 : s.alpha_bar[i - 1];
        s.posterior_var[i] = (1.0 - ab_prev) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    }
    return s;
}

static void check_t(std::size_t t, const NoiseSchedule& s, const char* what) {
    if (t < 1 || t > s.steps) {
        throw std::invalid_argument(std::string(what) + ": timestep " +
                                    std::to_string(t) + " outside [1, " +
                                    std::to_string(s.steps) + "]");
    }
}

Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps,
                const NoiseSchedule& sched) {
    check_t(t, sched, "q_sample");
    if (!z0.same_shape(eps)) throw std::invalid_argument("q_sample: eps shape mismatch");
    const double ab = sched.alpha_bar_t(t);
    const double c0 = std::sqrt(ab), ce = std::sqrt(1.0 - ab);
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * z0[i] + ce * eps[i];
    require_finite(out, "q_sample");
    return out;
}

void posterior_params(const Tensor& z_t, const Tensor& z0, std::size_t t,
                      const NoiseSchedule& sched, Tensor& mean, double& var) {
    check_t(t, sched, "posterior_params");
    if (t < 2) throw std::invalid_argument("posterior_params: t must be >= 2");
    if (!z_t.same_shape(z0)) throw std::invalid_argument("posterior_params: shape mismatch");
    const double ab = sched.alpha_bar_t(t);
    const double ab_prev = sched.alpha_bar_t(t - 1);
    const double beta = sched.beta_t(t);
    const double alpha = sched.alpha_t(t);
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab);
    mean = Tensor(z_t.shape());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        mean[i] = c0 * z0[i] + ct * z_t[i];
    }
    var = sched.posterior_var[t - 1];
    require_finite(mean, "posterior_params");
}

Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double s) {
    if (!eps_cond.same_shape(eps_uncond)) {
        throw std::invalid_argument("cfg_combine: shape mismatch");
    }
    if (s == 1.0) return eps_cond;
    Tensor out(eps_cond.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_uncond[i] + s * (eps_cond[i] - eps_uncond[i]);
    }
    require_finite(out, "cfg_combine");
    return out;
}

std::vector<std::size_t> respaced_timesteps(std::size_t t_steps,
                                            std::size_t sample_steps) {
    if (sample_steps < 1 || sample_steps > t_steps) {
        throw std::invalid_argument("respaced_timesteps: steps " +
                                    std::to_string(sample_steps) +
                                    " outside [1, " + std::to_string(t_steps) + "]");
    }
    // tau_k = round(k*T/S), descending; k = S gives T, stride 1 when S == T
    std::vector<std::size_t> taus(sample_steps);
    for (std::size_t k = sample_steps; k >= 1; --k) {
        double v = static_cast<double>(k) * static_cast<double>(t_steps) /
                   static_cast<double>(sample_steps);
        std::size_t tau = static_cast<std::size_t>(std::llround(v));
        taus[sample_steps - k] = std::max<std::size_t>(1, tau);
    }
    return taus;
}

Tensor ddpm_sample(const DimModel& m, const NoiseSchedule& sched,
                   const std::vector<std::size_t>& latent_shape,
                   const SampleOptions& opts, Rng& rng) {
    if (opts.steps > sched.steps) {
        throw std::invalid_argument("ddpm_sample: steps " +
                                    std::to_string(opts.steps) + " > T " +
                                    std::to_string(sched.steps));
    }
    if (!(opts.cfg_scale >= 0.0)) throw std::invalid_argument("ddpm_sample: cfg_scale must be >= 0");
    std::vector<std::size_t> taus = respaced_timesteps(sched.steps, opts.steps);

    Tensor z = randn(rng, latent_shape);
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const std::size_t t = taus[k];
        const std::size_t t_prev = k + 1 < taus.size() ? taus[k + 1] : 0;

        Tensor eps_hat = model_forward(m, z, t, opts.label);
        if (opts.label >= 0 && opts.cfg_scale != 1.0) {
            Tensor eps_uncond = model_forward(m, z, t, -1);
            eps_hat = cfg_combine(eps_hat, eps_uncond, opts.cfg_scale);
        }

        const double ab = sched.alpha_bar_t(t);
        const double ab_prev = sched.alpha_bar_t(t_prev);
        // z0_hat = (z_t - sqrt(1-ab) eps_hat) / sqrt(ab)
        Tensor z0_hat(z.shape());
        const double sab = std::sqrt(ab);
        const double som = std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < z.size(); ++i) {
            double v = (z[i] - som * eps_hat[i]) / sab;
            if (opts.clamp_z0) v = std::clamp(v, -1.0, 1.0);
            z0_hat[i] = v;
        }

        // posterior over the (possibly strided) step; table values when the
        // stride is 1 so the full chain is reproduced exactly
        double beta_eff, alpha_eff;
        if (t_prev + 1 == t) {
            beta_eff = sched.beta_t(t);
            alpha_eff = sched.alpha_t(t);
        } else {
            alpha_eff = ab / ab_prev;
            beta_eff = 1.0 - alpha_eff;
        }
        const double c0 = std::sqrt(ab_prev) * beta_eff / (1.0 - ab);
        const double ct = std::sqrt(alpha_eff) * (1.0 - ab_prev) / (1.0 - ab);
        const double var = (1.0 - ab_prev) / (1.0 - ab) * beta_eff;

        const bool last = (k + 1 == taus.size());
        const double noise_scale = last ? 0.0 : std::sqrt(var);
        for (std::size_t i = 0; i < z.size(); ++i) {
            double mean = c0 * z0_hat[i] + ct * z[i];
            z[i] = last ? mean : mean + noise_scale * rng.normal();
        }
        require_finite(z, "ddpm_sample");
    }
    return z;
}

double loss_simple(const DimModel& m, const NoiseSchedule& sched,
                   const Tensor& z0, std::size_t t, const Tensor& eps, int y,
                   DimModel* grads) {
    Tensor z_t = q_sample(z0, t, eps, sched);
    ModelCache cache;
    Tensor eps_hat = model_forward(m, z_t, t, y, grads ? &cache : nullptr);

    const double inv_n = 1.0 / static_cast<double>(eps.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps_hat[i] - eps[i];
        loss += d * d;
    }
    loss *= inv_n;
    require_finite(loss, "loss_simple");

    if (grads) {
        Tensor g_eps(eps.shape());
        for (std::size_t i = 0; i < eps.size(); ++i) {
            g_eps[i] = 2.0 * (eps_hat[i] - eps[i]) * inv_n;
        }
        model_backward(m, cache, g_eps, *grads);
    }
    return loss;
}

EmaState make_ema(const DimModel& m) {
    EmaState e;
    e.shadow = m;  // deep copy
    return e;
}

void ema_update(EmaState& ema, const DimModel& m, double decay) {
    if (!(decay >= 0.0 && decay <= 1.0)) {
        throw std::invalid_argument("ema_update: decay outside [0, 1]");
    }
    std::vector<Tensor*> shadow_slots, model_slots;
    model_for_each_tensor(ema.shadow,
                          [&](const std::string&, Tensor& t) { shadow_slots.push_back(&t); });
    model_for_each_tensor(const_cast<DimModel&>(m),
                          [&](const std::string&, Tensor& t) { model_slots.push_back(&t); });
    if (shadow_slots.size() != model_slots.size()) {
        throw std::invalid_argument("ema_update: model/shadow layout mismatch");
    }
    for (std::size_t s = 0; s < shadow_slots.size(); ++s) {
        Tensor& sh = *shadow_slots[s];
        const Tensor& pr = *model_slots[s];
        if (!sh.same_shape(pr)) throw std::invalid_argument("ema_update: shape mismatch");
        for (std::size_t i = 0; i < sh.size(); ++i) {
            sh[i] = decay * sh[i] + (1.0 - decay) * pr[i];
        }
    }
}

}  // namespace dim
