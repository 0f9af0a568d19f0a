#include <fstream>
#include "dim.h"

#include <cstring>
#include <iostream>
#include <sstream>

#include "dim/check.hpp"
#include "dim/efficiency.hpp"
#include "dim/train.hpp"

using namespace dim;

struct dim_tensor {
    Tensor t;
};

struct dim_model {
    DimModel m;
};

struct dim_schedule {
    NoiseSchedule s;
};

namespace {

thread_local std::string g_last_error;

dim_status fail(dim_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// invalid_argument -> INVALID_ARGUMENT, anything else -> RUNTIME; IO-ish
// failures raise runtime_error with path context and map to IO by sniffing
// is_io at the call sites that do file work.
template <typename Fn>
dim_status guarded(Fn&& fn, dim_status io_code = DIM_ERR_RUNTIME) {
    try {
        fn();
        g_last_error.clear();
        return DIM_OK;
    } catch (const std::invalid_argument& e) {
        return fail(DIM_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(io_code, e.what());
    } catch (...) {
        return fail(DIM_ERR_RUNTIME, "unknown error");
    }
}

std::vector<std::string> split_csv_list(const char* csv) {
    std::vector<std::string> out;
    if (!csv) return out;
    std::istringstream is(csv);
    std::string field;
    while (std::getline(is, field, ',')) {
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

}  // namespace

extern "C" {

const char* dim_version(void) { return "0.1.0"; }

const char* dim_last_error(void) { return g_last_error.c_str(); }

void dim_string_free(char* s) { delete[] s; }

dim_status dim_tensor_create(const uint64_t* dims, int rank,
                             const double* data, dim_tensor** out) {
    if (!dims || rank < 1 || !out) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] {
        std::vector<std::size_t> shape(dims, dims + rank);
        Tensor t(shape);
        if (data) {
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = data[i];
        }
        *out = new dim_tensor{std::move(t)};
    });
}

dim_status dim_tensor_load(const char* path, dim_tensor** out) {
    if (!path || !out) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] { *out = new dim_tensor{load_tensor(path)}; }, DIM_ERR_IO);
}

dim_status dim_tensor_save(const dim_tensor* t, const char* path, int as_f32) {
    if (!t || !path) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] { save_tensor(path, t->t, as_f32 != 0); }, DIM_ERR_IO);
}

int dim_tensor_rank(const dim_tensor* t) {
    return t ? static_cast<int>(t->t.rank()) : 0;
}

uint64_t dim_tensor_dim(const dim_tensor* t, int axis) {
    if (!t || axis < 0 || axis >= static_cast<int>(t->t.rank())) return 0;
    return t->t.dim(static_cast<std::size_t>(axis));
}

uint64_t dim_tensor_size(const dim_tensor* t) { return t ? t->t.size() : 0; }

const double* dim_tensor_data(const dim_tensor* t) {
    return t ? t->t.data() : nullptr;
}

void dim_tensor_free(dim_tensor* t) { delete t; }

dim_status dim_model_build(const char* size_tag, int layers, int hidden,
                           int patch, int in_channels, int num_classes,
                           int frames, uint64_t seed, dim_model** out) {
    if (!size_tag || !out) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] {
        SizeTag tag = size_tag_from_name(size_tag);
        ModelConfig cfg;
        cfg.size_tag = tag;
        if (tag == SizeTag::Micro) {
            cfg.layers = static_cast<std::size_t>(layers);
            cfg.hidden_d = static_cast<std::size_t>(hidden);
        } else {
            ModelConfig ladder = config_for_size(tag, patch, in_channels,
                                                 num_classes, frames < 1 ? 1 : frames);
            cfg.layers = ladder.layers;
            cfg.hidden_d = ladder.hidden_d;
        }
        cfg.patch = static_cast<std::size_t>(patch);
        cfg.in_channels = static_cast<std::size_t>(in_channels);
        cfg.num_classes = static_cast<std::size_t>(num_classes);
        cfg.frames = frames < 1 ? 1 : static_cast<std::size_t>(frames);
        validate_config(cfg);
        Rng rng(seed);
        *out = new dim_model{build_model(cfg, rng)};
    });
}

dim_status dim_model_load(const char* checkpoint_path, int use_ema,
                          dim_model** out) {
    if (!checkpoint_path || !out) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded(
        [&] {
            Checkpoint ck = load_checkpoint(checkpoint_path);
            if (use_ema) {
                if (ck.has_prefix("ema")) {
                    *out = new dim_model{ck.materialize("ema")};
                    return;
                }
                std::cerr << "warning: checkpoint has no EMA weights; using "
                             "raw model weights\n";
            }
            *out = new dim_model{ck.materialize("model")};
        },
        DIM_ERR_IO);
}

uint64_t dim_model_param_count(const dim_model* m) {
    return m ? count_params(m->m) : 0;
}

dim_status dim_model_param_count_for(const char* size_tag, int patch,
                                     int in_channels, int num_classes,
                                     uint64_t* out) {
    if (!size_tag || !out) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] {
        ModelConfig cfg = config_for_size(size_tag_from_name(size_tag),
                                          static_cast<std::size_t>(patch),
                                          static_cast<std::size_t>(in_channels),
                                          static_cast<std::size_t>(num_classes));
        *out = count_params(cfg);
    });
}

dim_status dim_model_forward(const dim_model* m, const dim_tensor* z, int t,
                             int label, dim_tensor** eps_out) {
    if (!m || !z || !eps_out || t < 1) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] {
        *eps_out = new dim_tensor{
            model_forward(m->m, z->t, static_cast<std::size_t>(t), label)};
    });
}

void dim_model_free(dim_model* m) { delete m; }

dim_status dim_schedule_new(int timesteps, double beta_start, double beta_end,
                            dim_schedule** out) {
    if (!out || timesteps < 1) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded([&] {
        *out = new dim_schedule{make_schedule(
            static_cast<std::size_t>(timesteps), beta_start, beta_end)};
    });
}

double dim_schedule_alpha_bar(const dim_schedule* s, int t) {
    if (!s || t < 0 || t > static_cast<int>(s->s.steps)) return -1.0;
    return s->s.alpha_bar_t(static_cast<std::size_t>(t));
}

void dim_schedule_free(dim_schedule* s) { delete s; }

dim_status dim_sample_tensor(const dim_model* m, const dim_schedule* s,
                             const uint64_t* latent_dims, int latent_rank,
                             int label, double cfg_scale, int steps,
                             int clamp_z0, uint64_t seed, dim_tensor** out) {
    if (!m || !s || !latent_dims || latent_rank < 3 || latent_rank > 4 || !out) {
        return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    }
    return guarded([&] {
        SampleOptions opts;
        opts.label = label;
        opts.cfg_scale = cfg_scale;
        opts.steps = static_cast<std::size_t>(steps);
        opts.clamp_z0 = clamp_z0 != 0;
        std::vector<std::size_t> shape(latent_dims, latent_dims + latent_rank);
        Rng rng(seed);
        *out = new dim_tensor{ddpm_sample(m->m, s->s, shape, opts, rng)};
    });
}

dim_status dim_train_run(const char* config_path, const char* resume_path,
                         int verbose) {
    if (!config_path) return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    return guarded(
        [&] {
            RunConfig cfg = load_run_config(config_path);
            run_training(cfg, resume_path ? resume_path : "",
                         verbose ? &std::cerr : nullptr);
        },
        DIM_ERR_IO);
}

dim_status dim_sample_run(const char* checkpoint_path, const char* out_dir,
                          int count, int label, double cfg_scale, int steps,
                          uint64_t seed, int latents_only, int use_ema) {
    if (!checkpoint_path || !out_dir || count < 1) {
        return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    }
    return guarded(
        [&] {
            SampleRunOptions opts;
            opts.count = static_cast<std::size_t>(count);
            opts.label = label;
            opts.cfg_scale = cfg_scale;
            opts.steps = static_cast<std::size_t>(steps);
            opts.seed = seed;
            opts.latents_only = latents_only != 0;
            opts.use_ema = use_ema != 0;
            run_sampling(checkpoint_path, out_dir, opts, &std::cerr);
        },
        DIM_ERR_IO);
}

dim_status dim_flops_report(const char* archs_csv, const char* size_tag,
                            int patch, const char* resolutions_csv,
                            const char* csv_path, char** markdown_out) {
    if (!archs_csv || !size_tag || !resolutions_csv) {
        return fail(DIM_ERR_INVALID_ARGUMENT, "bad arguments");
    }
    return guarded(
        [&] {
            std::vector<std::string> archs = split_csv_list(archs_csv);
            std::vector<std::size_t> res;
            for (const auto& r : split_csv_list(resolutions_csv)) {
                res.push_back(static_cast<std::size_t>(std::stoull(r)));
            }
            FlopsReport rep = gflops_report(archs, size_tag_from_name(size_tag),
                                            static_cast<std::size_t>(patch), res);
            if (csv_path) {
                std::ofstream f(csv_path, std::ios::binary);
                if (!f) throw std::runtime_error(std::string("cannot write '") + csv_path + "'");
                f << rep.csv;
            }
            if (markdown_out) {
                char* s = new char[rep.markdown.size() + 1];
                std::memcpy(s, rep.markdown.c_str(), rep.markdown.size() + 1);
                *markdown_out = s;
            }
        },
        DIM_ERR_IO);
}

int dim_check_run(void) {
    try {
        auto results = run_all_checks();
        return print_check_report(std::cout, results);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return -1;
    }
}

}  // extern "C"
