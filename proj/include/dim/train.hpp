#pragma once

#include <iosfwd>

#include "dim/dataset.hpp"
#include "dim/diffusion.hpp"
#include "dim/serialize.hpp"

namespace dim {

// Decoupled-weight-decay adaptive moments; beta/eps defaults live in
// RunConfig (0.9, 0.999, 1e-8).
struct AdamState {
    DimModel m;  // first moment
    DimModel v;  // second moment
    std::uint64_t t = 0;
};

AdamState make_adam(const DimModel& model);
void adam_step(DimModel& params, const DimModel& grads, AdamState& st,
               double lr, double weight_decay, double beta1, double beta2,
               double eps);

double grad_norm(const DimModel& grads);

struct TrainResult {
    std::uint64_t steps_done = 0;
    double last_loss = 0.0;
    double mean_loss_last100 = 0.0;
    std::string final_checkpoint;
};

// The full loop: batch draw -> per-element t -> CFG label dropout ->
// loss_simple -> adam -> EMA, with line-delimited metrics and periodic
// checkpoints under cfg.out_dir. Worker count comes from DIM_THREADS
// (default 1); results are bit-stable for a fixed worker count.
// resume_path restarts bit-identically from a saved checkpoint.
TrainResult run_training(const RunConfig& cfg, const std::string& resume_path = "",
                         std::ostream* log = nullptr);

struct SampleRunOptions {
    std::size_t count = 8;
    int label = -1;
    double cfg_scale = 1.5;
    std::size_t steps = 250;
    std::uint64_t seed = 0;
    bool latents_only = false;
    bool use_ema = true;
};

// Loads a checkpoint (EMA weights unless missing, which warns and falls back
// to raw), samples, and writes samples.dimt plus PPM visualizations (a grid
// for images, per-frame files for video) under out_dir.
void run_sampling(const std::string& checkpoint_path, const std::string& out_dir,
                  const SampleRunOptions& opts, std::ostream* log = nullptr);

// Resolved tri-states for a config/dataset pair.
bool resolve_clamp(const RunConfig& cfg, const Dataset& ds);
bool resolve_flip(const RunConfig& cfg, const Dataset& ds);

Dataset dataset_from_config(const RunConfig& cfg);

}  // namespace dim
