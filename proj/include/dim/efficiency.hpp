#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dim/model.hpp"

namespace dim {

struct CostTerm {
    std::string label;
    long long ops;  // multiply-add counted as 2 ops
};

struct CostModel {
    std::string arch;
    std::size_t seq_len = 0;
    std::size_t hidden = 0;
    std::size_t layers = 0;
    std::size_t state_n = 0;
    std::vector<CostTerm> terms;

    long long total() const {
        long long t = 0;
        for (const auto& term : terms) t += term.ops;
        return t;
    }
};

// Per-block analytic operation counts. The DiM count follows the 8NLD form
// (N = SSM state size); the walker below reports how the concrete
// bidirectional implementation maps onto it.
long long flops_dit(std::size_t l, std::size_t d);        // 4LD^2 + 2L^2D
long long flops_diffussm(std::size_t l, std::size_t d);   // 7.5LD^2, rounded
long long flops_dim(std::size_t l, std::size_t d, std::size_t n = 16);  // 8NLD

// Walks one forward pass of the concrete model shape-by-shape and itemizes
// multiply-add counts per component. Counts depend on shapes only.
CostModel count_model_ops(const ModelConfig& cfg, const PatchGrid& grid);
CostModel count_model_ops(const DimModel& m, const PatchGrid& grid);

// ops contributed by the scan recurrences alone (both directions); equals
// 3 * flops_dim(L_tokens, D, N) * layers by construction, see the report
// footer for the mapping.
long long scan_ops(const CostModel& cm);

struct FlopsReport {
    std::string markdown;
    std::string csv;
};

// One row per architecture, one column per resolution (Gflops for a single
// forward at that resolution), latent = resolution / 8, L = (latent/patch)^2.
// archs: subset of {"dim", "dit", "diffussm"}.
FlopsReport gflops_report(const std::vector<std::string>& archs, SizeTag size,
                          std::size_t patch,
                          const std::vector<std::size_t>& resolutions);

}  // namespace dim
