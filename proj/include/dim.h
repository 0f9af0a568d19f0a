/* C interface to the DiM library: opaque handles, status codes, UTF-8
 * paths. Every function returns DIM_OK (0) on success; on failure the
 * thread-local message from dim_last_error() describes what went wrong.
 * Handles are created by dim_*_new/load functions and released with the
 * matching dim_*_free; freeing NULL is a no-op. */

#ifndef DIM_H
#define DIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dim_status {
    DIM_OK = 0,
    DIM_ERR_INVALID_ARGUMENT = 1,
    DIM_ERR_IO = 2,
    DIM_ERR_RUNTIME = 3
} dim_status;

const char* dim_version(void);

/* Message for the most recent failure on this thread; empty string if the
 * last call succeeded. */
const char* dim_last_error(void);

/* Frees strings returned through char** out-parameters. */
void dim_string_free(char* s);

/* ---- tensors ("DIMT" container) ---- */

typedef struct dim_tensor dim_tensor;

dim_status dim_tensor_create(const uint64_t* dims, int rank,
                             const double* data, dim_tensor** out);
dim_status dim_tensor_load(const char* path, dim_tensor** out);
/* as_f32 != 0 stores a 32-bit payload. */
dim_status dim_tensor_save(const dim_tensor* t, const char* path, int as_f32);
int dim_tensor_rank(const dim_tensor* t);
uint64_t dim_tensor_dim(const dim_tensor* t, int axis);
uint64_t dim_tensor_size(const dim_tensor* t);
const double* dim_tensor_data(const dim_tensor* t);
void dim_tensor_free(dim_tensor* t);

/* ---- models ---- */

typedef struct dim_model dim_model;

/* size_tag: "S" | "B" | "L" | "XL" | "micro"; layers/hidden are honored for
 * "micro" only (the named sizes pin them). frames = 1 for image models. */
dim_status dim_model_build(const char* size_tag, int layers, int hidden,
                           int patch, int in_channels, int num_classes,
                           int frames, uint64_t seed, dim_model** out);
/* use_ema != 0 loads the EMA weights (falling back to raw with a warning on
 * stderr when the record is absent). */
dim_status dim_model_load(const char* checkpoint_path, int use_ema,
                          dim_model** out);
uint64_t dim_model_param_count(const dim_model* m);
/* Analytic parameter count for a configuration, no allocation. */
dim_status dim_model_param_count_for(const char* size_tag, int patch,
                                     int in_channels, int num_classes,
                                     uint64_t* out);
/* z: [h x w x c] or [t x h x w x c]; label -1 = unconditional. */
dim_status dim_model_forward(const dim_model* m, const dim_tensor* z, int t,
                             int label, dim_tensor** eps_out);
void dim_model_free(dim_model* m);

/* ---- noise schedules ---- */

typedef struct dim_schedule dim_schedule;

dim_status dim_schedule_new(int timesteps, double beta_start, double beta_end,
                            dim_schedule** out);
double dim_schedule_alpha_bar(const dim_schedule* s, int t);
void dim_schedule_free(dim_schedule* s);

/* Ancestral sampling into a fresh tensor. label -1 = unconditional;
 * cfg_scale 1.0 runs the single-forward conditional path. */
dim_status dim_sample_tensor(const dim_model* m, const dim_schedule* s,
                             const uint64_t* latent_dims, int latent_rank,
                             int label, double cfg_scale, int steps,
                             int clamp_z0, uint64_t seed, dim_tensor** out);

/* ---- operator entry points (what the CLI calls) ---- */

/* Full training run per the config file; resume_path may be NULL/empty.
 * Progress lines go to stderr when verbose != 0. */
dim_status dim_train_run(const char* config_path, const char* resume_path,
                         int verbose);

/* Samples from a checkpoint into out_dir (samples.dimt + PPM files).
 * label -1 = unconditional; latents_only skips the PPMs; use_ema != 0
 * prefers EMA weights. */
dim_status dim_sample_run(const char* checkpoint_path, const char* out_dir,
                          int count, int label, double cfg_scale, int steps,
                          uint64_t seed, int latents_only, int use_ema);

/* Analytic cost tables. archs_csv: comma-separated subset of
 * dim,dit,diffussm. Writes the CSV to csv_path when non-NULL and hands back
 * the markdown table (free with dim_string_free). */
dim_status dim_flops_report(const char* archs_csv, const char* size_tag,
                            int patch, const char* resolutions_csv,
                            const char* csv_path, char** markdown_out);

/* Runs the full verification suite, printing one line per check to stdout.
 * Returns the number of failed checks, or -1 on internal error. */
int dim_check_run(void);

#ifdef __cplusplus
}
#endif

#endif /* DIM_H */
