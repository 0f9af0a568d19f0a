#include "dim/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dim {

AdamState make_adam(const DimModel& model) {
    AdamState st;
    st.m = model_zeros_like(model);
    st.v = model_zeros_like(model);
    return st;
}

static std::vector<Tensor*> tensor_slots(DimModel& m) {
    std::vector<Tensor*> out;
    model_for_each_tensor(m, [&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

void adam_step(DimModel& params, const DimModel& grads, AdamState& st,
               double lr, double weight_decay, double beta1, double beta2,
               double eps) {
    st.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    auto ps = tensor_slots(params);
    auto gs = tensor_slots(const_cast<DimModel&>(grads));
    auto ms = tensor_slots(st.m);
    auto vs = tensor_slots(st.v);
    for (std::size_t s = 0; s < ps.size(); ++s) {
        Tensor& p = *ps[s];
        const Tensor& g = *gs[s];
        Tensor& m = *ms[s];
        Tensor& v = *vs[s];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
        }
    }
}

double grad_norm(const DimModel& grads) {
    double sq = 0;
    model_for_each_tensor(const_cast<DimModel&>(grads),
                          [&](const std::string&, Tensor& t) {
                              for (std::size_t i = 0; i < t.size(); ++i) sq += t[i] * t[i];
                          });
    return std::sqrt(sq);
}

Dataset dataset_from_config(const RunConfig& cfg) {
    if (cfg.dataset == "dir") {
        if (cfg.data_dir.empty()) throw std::invalid_argument("dataset.dir is required for name = dir");
        return make_dir_dataset(cfg.data_dir);
    }
    return make_synthetic_dataset(cfg.dataset, cfg.mu, cfg.sigma);
}

bool resolve_clamp(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.clamp_z0 == Tristate::Auto) return ds.image_like;
    return cfg.clamp_z0 == Tristate::On;
}

bool resolve_flip(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.flip == Tristate::Auto) return ds.image_like;
    return cfg.flip == Tristate::On;
}

static void check_dataset_model(const RunConfig& cfg, const Dataset& ds) {
    const ModelConfig mc = cfg.model_config();
    const auto& sh = ds.latent_shape;
    const std::size_t c = sh.back();
    const std::size_t frames = sh.size() == 4 ? sh[0] : 1;
    if (c != mc.in_channels) {
        throw std::invalid_argument("dataset channels (" + std::to_string(c) +
                                    ") do not match model.in_channels (" +
                                    std::to_string(mc.in_channels) + ")");
    }
    if (frames != mc.frames) {
        throw std::invalid_argument("dataset frames (" + std::to_string(frames) +
                                    ") do not match model.frames (" +
                                    std::to_string(mc.frames) + ")");
    }
    if (ds.num_classes > mc.num_classes) {
        throw std::invalid_argument("dataset has " + std::to_string(ds.num_classes) +
                                    " classes, model.num_classes is " +
                                    std::to_string(mc.num_classes));
    }
}

static std::size_t worker_count() {
    const char* env = std::getenv("DIM_THREADS");
    if (!env) return 1;
    long n = std::strtol(env, nullptr, 10);
    if (n < 1) return 1;
    if (n > 64) return 64;
    return static_cast<std::size_t>(n);
}

static void add_grads(DimModel& into, const DimModel& from) {
    auto a = tensor_slots(into);
    auto b = tensor_slots(const_cast<DimModel&>(from));
    for (std::size_t s = 0; s < a.size(); ++s) {
        for (std::size_t i = 0; i < a[s]->size(); ++i) (*a[s])[i] += (*b[s])[i];
    }
}

static void scale_grads(DimModel& g, double f) {
    model_for_each_tensor(g, [&](const std::string&, Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= f;
    });
}

namespace {

struct CheckpointWriter {
    const RunConfig& cfg;
    bool clamp;

    void write(const std::string& path, std::uint64_t step, const DimModel& model,
               const EmaState& ema, const AdamState& adam) const {
        std::map<std::string, const Tensor*> tensors;
        auto collect = [&](const char* prefix, const DimModel& m) {
            model_for_each_tensor(const_cast<DimModel&>(m),
                                  [&](const std::string& name, Tensor& t) {
                                      tensors[std::string(prefix) + "." + name] = &t;
                                  });
        };
        collect("model", model);
        collect("ema", ema.shadow);
        collect("adam_m", adam.m);
        collect("adam_v", adam.v);
        Rng marker(Rng::derive(cfg.seed, step));
        save_checkpoint(path, cfg, step, marker.state(), clamp, tensors,
                        cfg.checkpoint_f32);
    }
};

}  // namespace

TrainResult run_training(const RunConfig& cfg, const std::string& resume_path,
                         std::ostream* log) {
    Dataset ds = dataset_from_config(cfg);  // fails before any state is written
    check_dataset_model(cfg, ds);
    const ModelConfig mc = cfg.model_config();
    const NoiseSchedule sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    const bool clamp = resolve_clamp(cfg, ds);
    const bool flip = resolve_flip(cfg, ds);

    Rng init_rng(cfg.seed);
    DimModel model = build_model(mc, init_rng);
    EmaState ema = make_ema(model);
    AdamState adam = make_adam(model);
    std::uint64_t start_step = 0;

    if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        // a resume may extend the step budget or relocate output; everything
        // else must match or the trajectory silently forks
        RunConfig norm_a = ck.config, norm_b = cfg;
        norm_a.steps = norm_b.steps;
        norm_a.out_dir = norm_b.out_dir;
        if (serialize_run_config(norm_a) != serialize_run_config(norm_b)) {
            throw std::invalid_argument("resume: checkpoint config differs from the requested run");
        }
        model = ck.materialize("model");
        ema.shadow = ck.materialize("ema");
        adam.m = ck.materialize("adam_m");
        adam.v = ck.materialize("adam_v");
        adam.t = ck.step;
        start_step = ck.step;
    }

    std::filesystem::create_directories(cfg.out_dir);
    const std::string metrics_path = cfg.out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::app);
    if (!metrics) throw std::runtime_error("cannot write metrics to " + metrics_path);

    const std::size_t workers = worker_count();
    const std::size_t tokens_per_sample =
        1 + make_grid(mc.frames,
                      ds.latent_shape[ds.latent_shape.size() == 4 ? 1 : 0],
                      ds.latent_shape[ds.latent_shape.size() == 4 ? 2 : 1],
                      mc.in_channels, mc.patch)
                .total_tokens();

    CheckpointWriter writer{cfg, clamp};
    std::deque<double> last_losses;
    TrainResult result;
    const auto t_start = std::chrono::steady_clock::now();

    for (std::uint64_t step = start_step + 1; step <= cfg.steps; ++step) {
        const auto t_step0 = std::chrono::steady_clock::now();
        // one derived rng per (seed, step, lane): the stream is independent
        // of the worker count and of any earlier step
        std::vector<DimModel> worker_grads;
        std::vector<double> worker_loss(workers, 0.0);
        worker_grads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) worker_grads.push_back(model_zeros_like(model));

        auto run_lane_range = [&](std::size_t w, std::size_t lo, std::size_t hi) {
            for (std::size_t lane = lo; lane < hi; ++lane) {
                Rng lane_rng(Rng::derive(cfg.seed, step, lane));
                Sample s = ds.draw(lane_rng);
                if (flip && lane_rng.uniform() < 0.5) s.z = horizontal_flip(s.z);
                const std::size_t t = 1 + lane_rng.randint(cfg.timesteps);
                int y = s.label;
                if (cfg.cfg_dropout > 0.0 && lane_rng.uniform() < cfg.cfg_dropout) y = -1;
                Tensor eps = randn(lane_rng, s.z.shape());
                worker_loss[w] += loss_simple(model, sched, s.z, t, eps, y,
                                              &worker_grads[w]);
            }
        };

        const std::size_t per = (cfg.batch_size + workers - 1) / workers;
        if (workers == 1) {
            run_lane_range(0, 0, cfg.batch_size);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t lo = std::min(w * per, cfg.batch_size);
                const std::size_t hi = std::min(lo + per, cfg.batch_size);
                pool.emplace_back(run_lane_range, w, lo, hi);
            }
            for (auto& th : pool) th.join();
        }

        // deterministic merge order: worker 0, 1, 2, ...
        DimModel& grads = worker_grads[0];
        for (std::size_t w = 1; w < workers; ++w) add_grads(grads, worker_grads[w]);
        scale_grads(grads, 1.0 / static_cast<double>(cfg.batch_size));
        double loss = 0;
        for (double l : worker_loss) loss += l;
        loss /= static_cast<double>(cfg.batch_size);

        const double gn = grad_norm(grads);
        adam_step(model, grads, adam, cfg.learning_rate, cfg.weight_decay,
                  cfg.beta1, cfg.beta2, cfg.adam_eps);
        ema_update(ema, model, cfg.ema_decay);

        last_losses.push_back(loss);
        if (last_losses.size() > 100) last_losses.pop_front();
        result.last_loss = loss;

        if (cfg.log_every && (step % cfg.log_every == 0 || step == cfg.steps)) {
            const auto now = std::chrono::steady_clock::now();
            const double elapsed = std::chrono::duration<double>(now - t_start).count();
            const double step_s = std::chrono::duration<double>(now - t_step0).count();
            const double tps = step_s > 0
                ? static_cast<double>(cfg.batch_size * tokens_per_sample) / step_s
                : 0.0;
            char line[256];
            std::snprintf(line, sizeof(line),
                          "{\"step\":%llu,\"loss\":%.6f,\"grad_norm\":%.6f,"
                          "\"elapsed_s\":%.3f,\"tokens_per_s\":%.1f}",
                          static_cast<unsigned long long>(step), loss, gn,
                          elapsed, tps);
            metrics << line << "\n";
            metrics.flush();
            if (log) *log << line << std::endl;
        }

        if ((cfg.checkpoint_every && step % cfg.checkpoint_every == 0) ||
            step == cfg.steps) {
            const std::string path =
                cfg.out_dir + "/checkpoint_" + std::to_string(step) + ".dimc";
            writer.write(path, step, model, ema, adam);
            writer.write(cfg.out_dir + "/checkpoint_latest.dimc", step, model,
                         ema, adam);
            result.final_checkpoint = path;
        }
        result.steps_done = step;
    }

    double acc = 0;
    for (double l : last_losses) acc += l;
    result.mean_loss_last100 =
        last_losses.empty() ? 0.0 : acc / static_cast<double>(last_losses.size());
    return result;
}

void run_sampling(const std::string& checkpoint_path, const std::string& out_dir,
                  const SampleRunOptions& opts, std::ostream* log) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    const RunConfig& cfg = ck.config;
    DimModel model = [&]() {
        if (opts.use_ema) {
            if (ck.has_prefix("ema")) return ck.materialize("ema");
            if (log) {
                *log << "warning: checkpoint has no EMA weights; falling back "
                        "to raw model weights"
                     << std::endl;
            }
        }
        return ck.materialize("model");
    }();

    NoiseSchedule sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    Dataset ds = dataset_from_config(cfg);
    std::vector<std::size_t> latent_shape = ds.latent_shape;

    if (opts.label >= 0 &&
        opts.label >= static_cast<int>(model.cfg.num_classes)) {
        throw std::invalid_argument("sample: class " + std::to_string(opts.label) +
                                    " out of range");
    }

    std::filesystem::create_directories(out_dir);

    SampleOptions sopts;
    sopts.label = opts.label;
    sopts.cfg_scale = opts.cfg_scale;
    sopts.steps = opts.steps;
    sopts.clamp_z0 = ck.clamp_z0;

    const bool video = latent_shape.size() == 4;
    std::vector<Tensor> samples;
    samples.reserve(opts.count);
    for (std::size_t i = 0; i < opts.count; ++i) {
        Rng rng(Rng::derive(opts.seed, i, 0x53414d50ull));  // per-sample stream
        samples.push_back(ddpm_sample(model, sched, latent_shape, sopts, rng));
    }

    // exact latents: one stacked record
    {
        std::vector<std::size_t> stacked_shape;
        stacked_shape.push_back(opts.count);
        for (std::size_t dmn : latent_shape) stacked_shape.push_back(dmn);
        Tensor stacked(stacked_shape);
        const std::size_t per = samples[0].size();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            for (std::size_t j = 0; j < per; ++j) stacked[i * per + j] = samples[i][j];
        }
        save_tensor(out_dir + "/samples.dimt", stacked);
    }

    if (!opts.latents_only) {
        if (!video) {
            write_ppm_grid(out_dir + "/samples.ppm", samples,
                           std::max<std::size_t>(1, static_cast<std::size_t>(
                               std::ceil(std::sqrt(static_cast<double>(opts.count))))));
        } else {
            const std::size_t frames = latent_shape[0];
            const std::size_t fh = latent_shape[1], fw = latent_shape[2],
                              fc = latent_shape[3];
            for (std::size_t i = 0; i < samples.size(); ++i) {
                char dir[64];
                std::snprintf(dir, sizeof(dir), "%s/sample_%03zu", out_dir.c_str(), i);
                std::filesystem::create_directories(dir);
                for (std::size_t f = 0; f < frames; ++f) {
                    Tensor frame({fh, fw, fc});
                    const std::size_t off = f * fh * fw * fc;
                    for (std::size_t j = 0; j < frame.size(); ++j) {
                        frame[j] = samples[i][off + j];
                    }
                    char fp[96];
                    std::snprintf(fp, sizeof(fp), "%s/frame_%02zu.ppm", dir, f);
                    write_ppm(fp, frame);
                }
            }
        }
    }
    if (log) {
        *log << "wrote " << opts.count << " samples to " << out_dir << std::endl;
    }
}

}  // namespace dim
