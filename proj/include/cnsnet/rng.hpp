#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cnsnet {

// Seeded random stream with self-contained uniform/normal transforms.
// std::mt19937_64 output is pinned by the standard; the transforms below are
// written out explicitly so a (seed -> draws) sequence is reproducible and not
// at the mercy of libstdc++'s distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; draws are consumed in pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Bounded integer draw for shuffles (modulo rejection to stay unbiased).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % bound;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
    }

    // Derive an independent child stream (used to give init/shuffle/latent
    // sampling their own sequences under one run seed).
    Rng fork(std::uint64_t stream_id) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace cnsnet
