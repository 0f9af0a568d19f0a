#pragma once

#include "dim/rng.hpp"

namespace dim {

struct Sample {
    Tensor z;  // [h x w x c] or [t x h x w x c]
    int label = 0;
};

// Desk-scale stand-ins for the big corpora plus a raw PPM directory loader.
// Synthetic draws are pure functions of the rng stream.
struct Dataset {
    std::string name;
    std::size_t num_classes = 0;
    std::vector<std::size_t> latent_shape;
    bool image_like = false;  // drives the clamp/flip "auto" resolution
    double mu = 0.8, sigma = 0.1;
    // dir-backed data
    std::vector<Tensor> items;
    std::vector<int> labels;

    Sample draw(Rng& rng) const;
};

// name: two_mode_latent | checker_images | moving_bar_video; unknown names
// are an error listing the valid set.
Dataset make_synthetic_dataset(const std::string& name, double mu = 0.8,
                               double sigma = 0.1);

// Loads every .ppm in a directory (sorted); a leading "<int>_" in the file
// name becomes the label, otherwise 0.
Dataset make_dir_dataset(const std::string& path);

// z mirrored along the width axis.
Tensor horizontal_flip(const Tensor& z);

}  // namespace dim
