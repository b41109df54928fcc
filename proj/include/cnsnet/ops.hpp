#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "cnsnet/tensor.hpp"

namespace cnsnet {

// Lower bound fed to every logarithm in the loss terms; probabilities are
// clamped into [kLogEps, 1] before log so saturated classifiers keep all
// losses finite.
inline constexpr double kLogEps = 1e-8;

template <class T>
inline double clamp_log_arg(T v) {
    return std::clamp(static_cast<double>(v), kLogEps, 1.0);
}

template <class T>
bool is_distribution(std::span<const T> p, double tol = 1e-6) {
    double sum = 0.0;
    for (T v : p) {
        const double d = static_cast<double>(v);
        if (!std::isfinite(d) || d < 0.0 || d > 1.0 + tol) return false;
        sum += d;
    }
    return std::abs(sum - 1.0) <= tol;
}

template <class T>
void check_distribution(std::span<const T> p, const char* context) {
    if (!is_distribution<T>(p))
        throw InvalidInput(std::string(context) + ": argument is not a probability distribution");
}

// Row-wise softmax with max-subtraction. Accumulation runs in double even for
// float tensors so row sums land within 1e-6 of one.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw InvalidInput("softmax expects a [batch, k] tensor");
    logits.check_finite("softmax");
    const std::int64_t rows = logits.dim(0), k = logits.dim(1);
    Tensor<T> out(logits.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        auto in = logits.row(r);
        double mx = static_cast<double>(in[0]);
        for (T v : in) mx = std::max(mx, static_cast<double>(v));
        double sum = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            const double e = std::exp(static_cast<double>(in[static_cast<std::size_t>(j)]) - mx);
            out.at(r, j) = static_cast<T>(e);
            sum += e;
        }
        for (std::int64_t j = 0; j < k; ++j)
            out.at(r, j) = static_cast<T>(static_cast<double>(out.at(r, j)) / sum);
    }
    return out;
}

template <class T>
Tensor<T> softmax_row(std::span<const T> logits) {
    Tensor<T> t({1, static_cast<std::int64_t>(logits.size())},
                std::vector<T>(logits.begin(), logits.end()));
    return softmax(t);
}

// -sum_j y_j log(clamp(p_j)) for a one-hot target.
template <class T>
double cross_entropy(std::span<const T> pred, std::span<const T> target_onehot) {
    if (pred.size() != target_onehot.size())
        throw InvalidInput("cross_entropy: prediction/target length mismatch");
    check_distribution(pred, "cross_entropy");
    int ones = 0;
    std::size_t hot = 0;
    for (std::size_t j = 0; j < target_onehot.size(); ++j) {
        const double y = static_cast<double>(target_onehot[j]);
        if (y == 1.0) {
            ++ones;
            hot = j;
        } else if (y != 0.0) {
            throw InvalidInput("cross_entropy: target is not a one-hot vector");
        }
    }
    if (ones != 1) throw InvalidInput("cross_entropy: target must contain exactly one 1");
    return -std::log(clamp_log_arg(pred[hot]));
}

// D_KL(U || p) = sum_j (1/k) log((1/k) / clamp(p_j)); uniform is the first
// argument, exactly the direction the flattening regularizer is written in.
template <class T>
double kl_to_uniform(std::span<const T> pred) {
    const std::size_t k = pred.size();
    if (k < 2) throw InvalidInput("kl_to_uniform: needs at least 2 classes");
    check_distribution(pred, "kl_to_uniform");
    const double u = 1.0 / static_cast<double>(k);
    double acc = 0.0;
    for (T v : pred) acc += u * std::log(u / clamp_log_arg(v));
    return acc;
}

// ||mask (.) p||_2 with elementwise masking before the norm.
template <class T>
double masked_l2(std::span<const T> pred, std::span<const std::uint8_t> mask) {
    if (pred.size() != mask.size()) throw InvalidInput("masked_l2: prediction/mask length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (mask[j] > 1) throw InvalidInput("masked_l2: mask entries must be 0 or 1");
        if (mask[j]) {
            const double p = static_cast<double>(pred[j]);
            acc += p * p;
        }
    }
    return std::sqrt(acc);
}

template <class T>
std::size_t argmax(std::span<const T> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i; // ties keep the lowest index
    return best;
}

} // namespace cnsnet
