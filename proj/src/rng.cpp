#include "dim/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dim {

static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
}

static inline std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so log never sees zero
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::randint(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("randint: n must be positive");
    // 128-bit multiply-shift; bias is < 2^-64, irrelevant at our scale
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed;
    std::uint64_t h = splitmix64(x);
    x ^= a * 0x9e3779b97f4a7c15ull + h;
    h = splitmix64(x);
    x ^= b * 0xbf58476d1ce4e5b9ull + h;
    return splitmix64(x);
}

std::array<std::uint64_t, 6> Rng::state() const {
    return {s_[0], s_[1], s_[2], s_[3], has_spare_ ? 1ull : 0ull,
            std::bit_cast<std::uint64_t>(spare_)};
}

void Rng::set_state(const std::array<std::uint64_t, 6>& st) {
    s_ = {st[0], st[1], st[2], st[3]};
    has_spare_ = st[4] != 0;
    spare_ = std::bit_cast<double>(st[5]);
}

Tensor randn(Rng& rng, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));  // rejects zero dims
    for (auto& v : t.vec()) v = rng.normal();
    return t;
}

Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo,
                    double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace dim
