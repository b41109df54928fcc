#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cnsnet/rng.hpp"
#include "cnsnet/tensor.hpp"

// Independent oracles used across the suites. These re-derive the expected
// values with plain long-double loops and never call into the implementation
// path they check.
namespace oracle {

inline constexpr long double kEps = 1e-8L;

inline long double clampl(long double v) {
    return std::min(std::max(v, kEps), 1.0L);
}

inline std::vector<long double> softmax(std::span<const long double> logits) {
    long double mx = logits[0];
    for (long double v : logits) mx = std::max(mx, v);
    long double sum = 0.0L;
    std::vector<long double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

inline long double cross_entropy(std::span<const long double> p, std::size_t hot) {
    return -std::log(clampl(p[hot]));
}

inline long double kl_to_uniform(std::span<const long double> p) {
    const long double u = 1.0L / static_cast<long double>(p.size());
    long double acc = 0.0L;
    for (long double v : p) acc += u * std::log(u / clampl(v));
    return acc;
}

inline long double masked_l2(std::span<const long double> p, std::span<const std::uint8_t> mask) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (mask[i]) acc += p[i] * p[i];
    return std::sqrt(acc);
}

// Central finite difference of f along one coordinate of x.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double step = 1e-4) {
    x[i] += step;
    const double hi = f(x);
    x[i] -= 2.0 * step;
    const double lo = f(x);
    return (hi - lo) / (2.0 * step);
}

// |a - b| against a relative tolerance with an absolute floor for values
// near zero.
inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-7) {
    const double diff = std::abs(a - b);
    return diff <= abs_floor + rel * std::max(std::abs(a), std::abs(b));
}

// Random probability vector (softmax of random logits).
inline std::vector<double> random_distribution(cnsnet::Rng& rng, std::size_t k) {
    std::vector<long double> logits(k);
    for (auto& v : logits) v = rng.uniform(-4.0, 4.0);
    auto p = softmax(logits);
    return std::vector<double>(p.begin(), p.end());
}

} // namespace oracle
