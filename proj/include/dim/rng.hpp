#pragma once

#include <array>
#include <cstdint>

#include "dim/tensor.hpp"

namespace dim {

// xoshiro256++ seeded through splitmix64; normals via Box-Muller with a
// cached spare. Same seed gives bit-identical streams on any IEEE-754
// platform, which is what makes golden files portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // [0, 1), 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);

    // standard normal
    double normal();

    // uniform integer in [0, n)
    std::uint64_t randint(std::uint64_t n);

    // Deterministic sub-stream seed for (seed, a, b); used to split the seed
    // space across steps and batch lanes.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0);

    // Full state round-trip (4 xoshiro words, spare flag, spare bits) so a
    // checkpoint resume continues the exact stream.
    std::array<std::uint64_t, 6> state() const;
    void set_state(const std::array<std::uint64_t, 6>& st);

private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// i.i.d. standard normal entries; errors on empty/zero shape.
Tensor randn(Rng& rng, std::vector<std::size_t> shape);
Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo,
                    double hi);

}  // namespace dim
