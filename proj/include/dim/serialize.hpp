#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "dim/config.hpp"
#include "dim/model.hpp"

namespace dim {

// "DIMT" raw tensor container: magic, version byte, u32 rank, u64 dims,
// dtype byte (0 = f32, 1 = f64), flat little-endian payload.
void write_tensor(std::ostream& os, const Tensor& t, bool as_f32 = false);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t, bool as_f32 = false);
Tensor load_tensor(const std::string& path);

// "DIMC" checkpoint: magic, u16 format version, u32 manifest length, JSON
// manifest (config echo, step, rng state), u32 record count, then named
// "DIMT" records for model / EMA / optimizer moments.
struct Checkpoint {
    RunConfig config;
    std::uint64_t step = 0;
    std::array<std::uint64_t, 6> rng_state{};
    bool clamp_z0 = false;  // resolved at training time
    std::map<std::string, Tensor> tensors;

    // reassembles a parameter set from records under `prefix.`
    DimModel materialize(const std::string& prefix) const;
    bool has_prefix(const std::string& prefix) const;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     std::uint64_t step,
                     const std::array<std::uint64_t, 6>& rng_state,
                     bool clamp_z0,
                     const std::map<std::string, const Tensor*>& tensors,
                     bool as_f32 = false);
Checkpoint load_checkpoint(const std::string& path);

// Binary PPM (P6), 8-bit RGB. Tensors are [h x w x c] with c 1 or 3 and
// values in [-1, 1]; grayscale replicates the channel on write. Reading
// returns [h x w x 3] in [-1, 1].
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

// Tiles equally shaped [h x w x c] images into one PPM, row-major.
void write_ppm_grid(const std::string& path,
                    const std::vector<Tensor>& images, std::size_t cols);

}  // namespace dim
