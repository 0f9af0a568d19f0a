#pragma once

#include <string>

#include "dim/model.hpp"

namespace dim {

enum class Tristate { Auto, On, Off };

// Run settings parsed from the line-based `key = value` config format with
// [section] headers. Every field has a default; unknown sections or keys are
// hard errors so typos cannot silently fall back.
struct RunConfig {
    // [model]
    std::string model_size = "micro";
    std::size_t layers = 2;
    std::size_t hidden = 16;
    std::size_t patch = 2;
    std::size_t in_channels = 1;
    std::size_t num_classes = 2;
    std::size_t frames = 1;
    std::size_t state_n = 16;
    std::size_t conv_k = 4;
    bool use_class_token = true;
    bool use_adaln = true;

    // [diffusion]
    std::size_t timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double cfg_dropout = 0.1;
    Tristate clamp_z0 = Tristate::Auto;  // auto: on for image-like datasets

    // [optimizer]
    double learning_rate = 1e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 256;
    std::size_t steps = 400000;

    // [ema]
    double ema_decay = 0.9999;

    // [dataset]
    std::string dataset = "two_mode_latent";
    double mu = 0.8;
    double sigma = 0.1;
    std::string data_dir;
    Tristate flip = Tristate::Auto;  // auto: on for image-like datasets

    // [run]
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    std::size_t log_every = 50;
    std::size_t checkpoint_every = 1000;
    bool checkpoint_f32 = false;

    ModelConfig model_config() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical text form; parse(serialize(x)) == x and serialize is a fixed
// point of the round trip.
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace dim
