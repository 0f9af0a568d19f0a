#include "dim/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "dim/serialize.hpp"

namespace dim {

namespace {

Sample draw_two_mode(const Dataset& d, Rng& rng) {
    Sample s;
    s.label = static_cast<int>(rng.randint(2));
    const double center = s.label == 0 ? d.mu : -d.mu;
    s.z = Tensor({8, 8, 1});
    for (auto& v : s.z.vec()) v = center + d.sigma * rng.normal();
    return s;
}

Sample draw_checker(const Dataset& d, Rng& rng) {
    // 4 classes: cell size {4, 8} x phase {0, 1}; mild per-draw noise
    Sample s;
    s.label = static_cast<int>(rng.randint(4));
    const std::size_t cell = s.label < 2 ? 4 : 8;
    const std::size_t phase = s.label & 1;
    s.z = Tensor({32, 32, 3});
    for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) {
            const bool on = (((y / cell) + (x / cell)) % 2) == phase;
            const double base = on ? 0.8 : -0.8;
            for (std::size_t c = 0; c < 3; ++c) {
                // channel tint keeps the classes visually distinct
                const double tint = (c == static_cast<std::size_t>(s.label % 3)) ? 0.15 : 0.0;
                s.z[(y * 32 + x) * 3 + c] = base + tint + 0.05 * rng.normal();
            }
        }
    }
    return s;
}

Sample draw_moving_bar(const Dataset& d, Rng& rng) {
    // 8 frames of 16x16x1; a 2px vertical bar moves one column per frame,
    // wrapping; label 0 moves right, label 1 moves left
    (void)d;
    Sample s;
    s.label = static_cast<int>(rng.randint(2));
    const int dir = s.label == 0 ? 1 : -1;
    const int start = static_cast<int>(rng.randint(16));
    s.z = Tensor({8, 16, 16, 1});
    for (auto& v : s.z.vec()) v = -1.0;
    for (int f = 0; f < 8; ++f) {
        const int col = ((start + dir * f) % 16 + 16) % 16;
        for (int y = 0; y < 16; ++y) {
            for (int wth = 0; wth < 2; ++wth) {
                const int x = (col + wth) % 16;
                s.z[(f * 16 + y) * 16 + x] = 1.0;
            }
        }
    }
    return s;
}

}  // namespace

Sample Dataset::draw(Rng& rng) const {
    if (name == "two_mode_latent") return draw_two_mode(*this, rng);
    if (name == "checker_images") return draw_checker(*this, rng);
    if (name == "moving_bar_video") return draw_moving_bar(*this, rng);
    if (name == "dir") {
        if (items.empty()) throw std::runtime_error("dir dataset is empty");
        const std::size_t i = rng.randint(items.size());
        return Sample{items[i], labels[i]};
    }
    throw std::invalid_argument("unknown dataset '" + name + "'");
}

Dataset make_synthetic_dataset(const std::string& name, double mu, double sigma) {
    Dataset d;
    d.name = name;
    d.mu = mu;
    d.sigma = sigma;
    if (name == "two_mode_latent") {
        d.num_classes = 2;
        d.latent_shape = {8, 8, 1};
        d.image_like = false;
    } else if (name == "checker_images") {
        d.num_classes = 4;
        d.latent_shape = {32, 32, 3};
        d.image_like = true;
    } else if (name == "moving_bar_video") {
        d.num_classes = 2;
        d.latent_shape = {8, 16, 16, 1};
        d.image_like = true;
    } else {
        throw std::invalid_argument(
            "unknown dataset '" + name +
            "' (expected two_mode_latent, checker_images or moving_bar_video)");
    }
    return d;
}

Dataset make_dir_dataset(const std::string& path) {
    namespace fs = std::filesystem;
    Dataset d;
    d.name = "dir";
    d.image_like = true;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".ppm") {
            files.push_back(e.path().string());
        }
    }
    if (files.empty()) throw std::runtime_error("no .ppm files under '" + path + "'");
    std::sort(files.begin(), files.end());
    int max_label = 0;
    for (const auto& f : files) {
        d.items.push_back(read_ppm(f));
        const std::string stem = fs::path(f).filename().string();
        int label = 0;
        std::size_t us = stem.find('_');
        if (us != std::string::npos && us > 0) {
            try {
                label = std::stoi(stem.substr(0, us));
            } catch (...) {
                label = 0;
            }
        }
        d.labels.push_back(label);
        max_label = std::max(max_label, label);
        if (!d.items.back().same_shape(d.items.front())) {
            throw std::runtime_error("dir dataset: mixed image shapes");
        }
    }
    d.num_classes = static_cast<std::size_t>(max_label) + 1;
    d.latent_shape = {d.items[0].dim(0), d.items[0].dim(1), d.items[0].dim(2)};
    return d;
}

Tensor horizontal_flip(const Tensor& z) {
    Tensor out(z.shape());
    std::size_t t = 1, h, w, c;
    if (z.rank() == 4) {
        t = z.dim(0); h = z.dim(1); w = z.dim(2); c = z.dim(3);
    } else if (z.rank() == 3) {
        h = z.dim(0); w = z.dim(1); c = z.dim(2);
    } else {
        throw std::invalid_argument("horizontal_flip: rank 3 or 4 expected");
    }
    for (std::size_t f = 0; f < t; ++f) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    out[((f * h + y) * w + x) * c + ch] =
                        z[((f * h + y) * w + (w - 1 - x)) * c + ch];
                }
            }
        }
    }
    return out;
}

}  // namespace dim
