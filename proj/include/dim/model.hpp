#pragma once

#include <vector>

#include "dim/block.hpp"
#include "dim/patchify.hpp"

namespace dim {

enum class SizeTag { S, B, L, XL, Micro };

const char* size_tag_name(SizeTag t);
SizeTag size_tag_from_name(const std::string& name);

// Micro leaves layers/hidden free for toy configs; the named sizes pin them
// to the published ladder.
struct ModelConfig {
    SizeTag size_tag = SizeTag::Micro;
    std::size_t layers = 2;
    std::size_t hidden_d = 16;
    std::size_t patch = 2;
    std::size_t in_channels = 1;
    std::size_t num_classes = 2;
    std::size_t frames = 1;  // 1 = image mode
    std::size_t ssm_state_n = 16;
    std::size_t delta_rank = 0;  // 0 = ceil(d_inner / 16)
    std::size_t conv_k = 4;
    std::size_t time_freq_dim = 256;
    // conditioning paths, individually ablatable
    bool use_class_token = true;
    bool use_adaln = true;

    std::size_t d_inner() const { return 2 * hidden_d; }
    std::size_t delta_rank_eff() const {
        return delta_rank ? delta_rank : (d_inner() + 15) / 16;
    }
    std::size_t token_dim() const { return patch * patch * in_channels; }
};

// Applies the (layers, hidden) ladder for a named size.
ModelConfig config_for_size(SizeTag tag, std::size_t patch,
                            std::size_t in_channels, std::size_t num_classes,
                            std::size_t frames = 1);

// Throws on invalid tag/patch/dims (patch in {2,4,8}, hidden % 4 == 0, ladder
// pairs exact for named sizes).
void validate_config(const ModelConfig& cfg);

struct DimModel {
    ModelConfig cfg;
    Linear patch_proj;   // [d x token_dim] + bias
    Linear time_mlp1;    // [d x time_freq] + bias
    Linear time_mlp2;    // [d x d] + bias
    Tensor class_table;  // [(num_classes + 1) x d]; last row = null label
    std::vector<DimBlockParams> blocks;
    Linear final_mod;  // [2d x d] + bias (shift, scale), init 0
    Linear head;       // [token_dim x d] + bias, init 0
};

// Deterministic for a given seed; zero-initialized head means the fresh
// model predicts eps_hat = 0 everywhere.
DimModel build_model(const ModelConfig& cfg, Rng& rng);

DimModel model_zeros_like(const DimModel& m);
void model_for_each_tensor(DimModel& m,
                           const std::function<void(const std::string&, Tensor&)>& fn);

std::size_t count_params(const DimModel& m);
// Analytic count from shapes alone; lets the XL row be checked without
// allocating half a billion doubles.
std::size_t count_params(const ModelConfig& cfg);

struct ModelCache {
    PatchGrid grid;
    Tensor patches;   // [L x token_dim]
    Tensor time_basis;
    Tensor time_h_pre;  // [1 x d], pre-silu
    Tensor cond;        // [d]
    int label_row = 0;
    std::vector<Tensor> block_inputs;  // token sequence entering each block
    std::vector<BlockCache> block_caches;
    Tensor body;  // [L x d], class row dropped
    Tensor final_xhat;
    Tensor final_inv_std;
    Tensor final_mod2;  // [1 x 2d]
    Tensor final_u;     // [L x d]
};

// z: [t x h x w x c] or [h x w x c]; t: diffusion step >= 1 (upper bound is
// the schedule's business); y: class in [0, num_classes) or -1 for the null
// label. Returns eps_hat with z's shape.
Tensor model_forward(const DimModel& m, const Tensor& z, std::size_t t, int y,
                     ModelCache* cache = nullptr);

// Parameter adjoints for dL/d(eps_hat) = grad_eps; accumulates into `grads`.
void model_backward(const DimModel& m, const ModelCache& cache,
                    const Tensor& grad_eps, DimModel& grads);

// Conditioning vector (time embedding + class row); exposed for tests.
Tensor model_cond_vector(const DimModel& m, std::size_t t, int y,
                         ModelCache* cache = nullptr);

}  // namespace dim
