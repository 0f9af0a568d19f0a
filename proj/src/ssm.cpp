#include "dim/ssm.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

static double g_zoh_series_threshold = 1e-8;

double zoh_series_threshold() { return g_zoh_series_threshold; }
void set_zoh_series_threshold(double t) { g_zoh_series_threshold = t; }

void zoh_scalar(double a, double delta, double& a_bar, double& phi) {
    const double da = delta * a;
    a_bar = std::exp(da);
    const double mag = std::fabs(da);
    if (mag < g_zoh_series_threshold) {
        phi = delta * (1.0 + 0.5 * da);
    } else if (mag < 1e-3) {
        phi = std::expm1(da) / a;
    } else {
        // cancellation in a_bar - 1 is bounded by eps/|da| < 1e-12 here
        phi = (a_bar - 1.0) / a;
    }
}

// branch-consistent partials of (a_bar, phi) wrt (delta, a)
static inline void zoh_scalar_grads(double a, double delta, double a_bar,
                                    double phi, double& dphi_ddelta,
                                    double& dphi_da) {
    const double da = delta * a;
    if (std::fabs(da) < g_zoh_series_threshold) {
        dphi_ddelta = 1.0 + da;
        dphi_da = 0.5 * delta * delta;
    } else {
        // expm1(da) == phi * a for both smooth branches
        dphi_ddelta = a_bar;
        dphi_da = (da * a_bar - phi * a) / (a * a);
    }
}

SsmParams make_ssm_params(std::size_t d_inner, std::size_t n,
                          std::size_t delta_rank, Rng& rng, double dt_min,
                          double dt_max) {
    if (d_inner == 0 || n == 0 || delta_rank == 0) {
        throw std::invalid_argument("make_ssm_params: zero dimension");
    }
    SsmParams p;
    p.a_log = Tensor({d_inner, n});
    for (std::size_t c = 0; c < d_inner; ++c) {
        for (std::size_t j = 0; j < n; ++j) {
            p.a_log[c * n + j] = std::log(static_cast<double>(j + 1));
        }
    }
    p.d_skip = Tensor::full({d_inner}, 1.0);

    const double kx = 1.0 / std::sqrt(static_cast<double>(d_inner));
    p.x_proj.w = rand_uniform(rng, {delta_rank + 2 * n, d_inner}, -kx, kx);

    const double kd = 1.0 / std::sqrt(static_cast<double>(delta_rank));
    p.delta_proj.w = rand_uniform(rng, {d_inner, delta_rank}, -kd, kd);
    p.delta_proj.b = Tensor({d_inner});
    for (std::size_t c = 0; c < d_inner; ++c) {
        // dt log-uniform in [dt_min, dt_max]; bias = softplus^{-1}(dt)
        double dt = std::exp(rng.uniform(std::log(dt_min), std::log(dt_max)));
        p.delta_proj.b[c] = std::log(std::expm1(dt));
    }
    return p;
}

SsmParams ssm_zeros_like(const SsmParams& p) {
    SsmParams z;
    z.a_log = Tensor(p.a_log.shape());
    z.d_skip = Tensor(p.d_skip.shape());
    z.x_proj.w = Tensor(p.x_proj.w.shape());
    z.delta_proj.w = Tensor(p.delta_proj.w.shape());
    z.delta_proj.b = Tensor(p.delta_proj.b.shape());
    return z;
}

void ssm_for_each_tensor(
    SsmParams& p, const std::string& prefix,
    const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".a_log", p.a_log);
    fn(prefix + ".d_skip", p.d_skip);
    fn(prefix + ".x_proj.w", p.x_proj.w);
    fn(prefix + ".delta_proj.w", p.delta_proj.w);
    fn(prefix + ".delta_proj.b", p.delta_proj.b);
}

void discretize_zoh(const Tensor& a, const Tensor& delta, const Tensor& b,
                    Tensor& a_bar, Tensor& b_bar) {
    if (a.rank() != 2) throw std::invalid_argument("discretize_zoh: a must be [d_inner x n]");
    const std::size_t d = a.dim(0), n = a.dim(1);
    if (delta.size() != d) throw std::invalid_argument("discretize_zoh: delta must be [d_inner]");
    if (b.size() != n) throw std::invalid_argument("discretize_zoh: b must be [n]");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] < 0.0)) throw std::invalid_argument("discretize_zoh: a must be strictly negative");
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (!(delta[i] > 0.0)) throw std::invalid_argument("discretize_zoh: delta must be strictly positive");
    }
    a_bar = Tensor({d, n});
    b_bar = Tensor({d, n});
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t j = 0; j < n; ++j) {
            double ab, phi;
            zoh_scalar(a[c * n + j], delta[c], ab, phi);
            a_bar[c * n + j] = ab;
            b_bar[c * n + j] = phi * b[j];
        }
    }
}

Tensor ssm_scan(const Tensor& x, const Tensor& a, const Tensor& delta,
                const Tensor& b_tok, const Tensor& c_tok, const Tensor& d_skip,
                ScanCache* cache) {
    if (x.rank() != 2) throw std::invalid_argument("ssm_scan: x must be [L x d_inner]");
    const std::size_t len = x.dim(0), d = x.dim(1);
    if (a.rank() != 2 || a.dim(0) != d) throw std::invalid_argument("ssm_scan: a shape mismatch");
    const std::size_t n = a.dim(1);
    if (delta.rank() != 2 || delta.dim(0) != len || delta.dim(1) != d)
        throw std::invalid_argument("ssm_scan: delta shape mismatch");
    if (b_tok.rank() != 2 || b_tok.dim(0) != len || b_tok.dim(1) != n)
        throw std::invalid_argument("ssm_scan: b shape mismatch");
    if (c_tok.rank() != 2 || c_tok.dim(0) != len || c_tok.dim(1) != n)
        throw std::invalid_argument("ssm_scan: c shape mismatch");
    if (d_skip.size() != d) throw std::invalid_argument("ssm_scan: d_skip shape mismatch");

    Tensor y({len, d});
    std::vector<double> h(d * n, 0.0);
    if (cache) {
        cache->delta = delta;
        cache->b_tok = b_tok;
        cache->c_tok = c_tok;
        cache->h = Tensor({len, d, n});
        cache->a_bar = Tensor({len, d, n});
        cache->phi = Tensor({len, d, n});
    }
    for (std::size_t t = 0; t < len; ++t) {
        const double* bt = b_tok.data() + t * n;
        const double* ct = c_tok.data() + t * n;
        const double* dt = delta.data() + t * d;
        const double* xt = x.data() + t * d;
        double* yt = y.data() + t * d;
        for (std::size_t c = 0; c < d; ++c) {
            double* hc = h.data() + c * n;
            double acc = 0.0;
            const double xv = xt[c];
            for (std::size_t j = 0; j < n; ++j) {
                double ab, phi;
                zoh_scalar(a[c * n + j], dt[c], ab, phi);
                hc[j] = ab * hc[j] + phi * bt[j] * xv;
                acc += ct[j] * hc[j];
                if (cache) {
                    const std::size_t idx = (t * d + c) * n + j;
                    cache->h[idx] = hc[j];
                    cache->a_bar[idx] = ab;
                    cache->phi[idx] = phi;
                }
            }
            yt[c] = acc + d_skip[c] * xv;
        }
    }
    require_finite(y, "ssm_scan");
    return y;
}

ScanGrads ssm_scan_backward(const Tensor& x, const Tensor& a,
                            const Tensor& d_skip, const ScanCache& cache,
                            const Tensor& grad_y) {
    const std::size_t len = x.dim(0), d = x.dim(1), n = a.dim(1);
    if (!grad_y.same_shape(x)) throw std::invalid_argument("ssm_scan_backward: grad_y shape mismatch");

    ScanGrads g;
    g.x = Tensor({len, d});
    g.a = Tensor({d, n});
    g.delta = Tensor({len, d});
    g.b_tok = Tensor({len, n});
    g.c_tok = Tensor({len, n});
    g.d_skip = Tensor({d});

    // gh_run[c,j] holds a_bar_{t+1} * dL/dh_{t+1} entering step t
    std::vector<double> gh_run(d * n, 0.0);
    for (std::size_t tt = len; tt-- > 0;) {
        const std::size_t t = tt;
        const double* bt = cache.b_tok.data() + t * n;
        const double* ct = cache.c_tok.data() + t * n;
        const double* dt = cache.delta.data() + t * d;
        const double* xt = x.data() + t * d;
        const double* gyt = grad_y.data() + t * d;
        double* gbt = g.b_tok.data() + t * n;
        double* gct = g.c_tok.data() + t * n;
        for (std::size_t c = 0; c < d; ++c) {
            const double xv = xt[c];
            const double gy = gyt[c];
            g.d_skip[c] += xv * gy;
            double gx_acc = d_skip[c] * gy;
            double gdelta_acc = 0.0;
            double* ghc = gh_run.data() + c * n;
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t idx = (t * d + c) * n + j;
                const double h_t = cache.h[idx];
                const double ab = cache.a_bar[idx];
                const double phi = cache.phi[idx];
                const double h_prev =
                    t > 0 ? cache.h[((t - 1) * d + c) * n + j] : 0.0;

                gct[j] += h_t * gy;
                const double gh = ct[j] * gy + ghc[j];

                double dphi_ddelta, dphi_da;
                zoh_scalar_grads(a[c * n + j], dt[c], ab, phi, dphi_ddelta,
                                 dphi_da);

                const double g_abar = gh * h_prev;
                const double bx = bt[j] * xv;
                // a_bar = exp(delta*a): d/ddelta = a*a_bar, d/da = delta*a_bar
                gdelta_acc += g_abar * a[c * n + j] * ab + gh * bx * dphi_ddelta;
                g.a[c * n + j] += g_abar * dt[c] * ab + gh * bx * dphi_da;
                gbt[j] += gh * phi * xv;
                gx_acc += gh * phi * bt[j];

                ghc[j] = ab * gh;
            }
            g.x[t * d + c] = gx_acc;
            g.delta[t * d + c] = gdelta_acc;
        }
    }
    return g;
}

// splits the x_proj output row into (dl, b, c) views
static void split_proj(const Tensor& proj, std::size_t r, std::size_t n,
                       Tensor& dl, Tensor& b_tok, Tensor& c_tok) {
    const std::size_t len = proj.dim(0), w = proj.dim(1);
    dl = Tensor({len, r});
    b_tok = Tensor({len, n});
    c_tok = Tensor({len, n});
    for (std::size_t t = 0; t < len; ++t) {
        const double* row = proj.data() + t * w;
        for (std::size_t i = 0; i < r; ++i) dl[t * r + i] = row[i];
        for (std::size_t j = 0; j < n; ++j) b_tok[t * n + j] = row[r + j];
        for (std::size_t j = 0; j < n; ++j) c_tok[t * n + j] = row[r + n + j];
    }
}

Tensor selective_scan(const Tensor& x, const SsmParams& p, ScanCache* cache) {
    if (x.rank() != 2 || x.dim(1) != p.d_inner()) {
        throw std::invalid_argument("selective_scan: x must be [L x d_inner]");
    }
    const std::size_t r = p.delta_rank(), n = p.state_n(), d = p.d_inner();

    Tensor proj = p.x_proj.forward(x);  // [L x (r + 2n)]
    Tensor dl, b_tok, c_tok;
    split_proj(proj, r, n, dl, b_tok, c_tok);

    Tensor delta_pre = p.delta_proj.forward(dl);  // [L x d_inner]
    Tensor delta = softplus(delta_pre);

    Tensor a({d, n});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(p.a_log[i]);

    Tensor y = ssm_scan(x, a, delta, b_tok, c_tok, p.d_skip, cache);
    if (cache) {
        cache->dl = std::move(dl);
        cache->delta_pre = std::move(delta_pre);
    }
    return y;
}

Tensor selective_scan_backward(const Tensor& x, const SsmParams& p,
                               const ScanCache& cache, const Tensor& grad_y,
                               SsmParams& grads) {
    const std::size_t len = x.dim(0), d = p.d_inner();
    const std::size_t r = p.delta_rank(), n = p.state_n();

    Tensor a({d, n});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(p.a_log[i]);

    ScanGrads sg = ssm_scan_backward(x, a, p.d_skip, cache, grad_y);

    // a = -exp(a_log) so da/da_log = a
    for (std::size_t i = 0; i < a.size(); ++i) {
        grads.a_log[i] += sg.a[i] * a[i];
    }
    for (std::size_t c = 0; c < d; ++c) grads.d_skip[c] += sg.d_skip[c];

    // delta = softplus(delta_pre)
    Tensor g_pre({len, d});
    for (std::size_t i = 0; i < g_pre.size(); ++i) {
        g_pre[i] = sg.delta[i] * sigmoid_scalar(cache.delta_pre[i]);
    }

    Tensor g_dl({len, r});
    linear_backward(cache.dl.data(), p.delta_proj.w.data(), g_pre.data(),
                    g_dl.data(), grads.delta_proj.w.data(),
                    grads.delta_proj.b.data(), len, r, d);

    // reassemble grad of the packed x_proj output
    Tensor g_proj({len, r + 2 * n});
    for (std::size_t t = 0; t < len; ++t) {
        double* row = g_proj.data() + t * (r + 2 * n);
        for (std::size_t i = 0; i < r; ++i) row[i] = g_dl[t * r + i];
        for (std::size_t j = 0; j < n; ++j) row[r + j] = sg.b_tok[t * n + j];
        for (std::size_t j = 0; j < n; ++j) row[r + n + j] = sg.c_tok[t * n + j];
    }

    Tensor g_x_proj_path({len, d});
    linear_backward(x.data(), p.x_proj.w.data(), g_proj.data(),
                    g_x_proj_path.data(), grads.x_proj.w.data(), nullptr, len,
                    d, r + 2 * n);

    for (std::size_t i = 0; i < sg.x.size(); ++i) sg.x[i] += g_x_proj_path[i];
    return sg.x;
}

Tensor ssm_conv_kernel(const Tensor& a_bar, const Tensor& b_bar,
                       const Tensor& c, std::size_t len) {
    if (len == 0) throw std::invalid_argument("ssm_conv_kernel: len must be >= 1");
    const std::size_t n = a_bar.size();
    if (b_bar.size() != n || c.size() != n) {
        throw std::invalid_argument("ssm_conv_kernel: a_bar/b_bar/c length mismatch");
    }
    Tensor kernel({len});
    std::vector<double> pow_ab(n);  // a_bar^k * b_bar, updated per tap
    for (std::size_t j = 0; j < n; ++j) pow_ab[j] = b_bar[j];
    for (std::size_t k = 0; k < len; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += c[j] * pow_ab[j];
            pow_ab[j] *= a_bar[j];
        }
        kernel[k] = acc;
    }
    return kernel;
}

Tensor causal_conv_full(const Tensor& kernel, const Tensor& x) {
    const std::size_t len = x.size();
    if (kernel.size() != len) {
        throw std::invalid_argument("causal_conv_full: kernel/input length mismatch");
    }
    Tensor y({len});
    for (std::size_t t = 0; t < len; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= t; ++k) acc += kernel[k] * x[t - k];
        y[t] = acc;
    }
    return y;
}

}  // namespace dim
