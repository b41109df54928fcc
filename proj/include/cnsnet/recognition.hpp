#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnsnet/network.hpp"
#include "cnsnet/ops.hpp"

namespace cnsnet {

// Per-instance open-set decision: either Unknown, or a known family id with
// the max probability that carried the decision.
struct RecognitionOutcome {
    bool is_unknown = false;
    int family = -1;
    double confidence = 0.0;
};

struct ThresholdPolicy {
    enum class Kind { fixed, percentile, sweep };
    Kind kind = Kind::percentile;
    double value = 5.0; // theta for fixed, q for percentile
    std::vector<double> grid;

    static ThresholdPolicy fixed(double theta) { return {Kind::fixed, theta, {}}; }
    static ThresholdPolicy percentile(double q) { return {Kind::percentile, q, {}}; }
    static ThresholdPolicy sweep(std::vector<double> grid) {
        return {Kind::sweep, 0.0, std::move(grid)};
    }
};

inline void check_theta(double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw InvalidConfig("detection threshold must lie strictly inside (0,1)");
}

// Unknown iff every component sits strictly below theta. Written as the
// literal all-components test; equivalent to max(probs) < theta.
template <class T>
bool detect(std::span<const T> probs, double theta) {
    check_theta(theta);
    check_distribution(probs, "detect");
    for (T p : probs)
        if (!(static_cast<double>(p) < theta)) return false;
    return true;
}

// Argmax family; ties resolve to the lowest index.
template <class T>
int classify(std::span<const T> probs) {
    check_distribution(probs, "classify");
    return static_cast<int>(argmax(probs));
}

template <class T>
RecognitionOutcome recognize_probs(std::span<const T> probs, double theta) {
    RecognitionOutcome out;
    if (detect(probs, theta)) {
        out.is_unknown = true;
        out.confidence = static_cast<double>(probs[argmax(probs)]);
        return out;
    }
    out.family = classify(probs);
    out.confidence = static_cast<double>(probs[static_cast<std::size_t>(out.family)]);
    return out;
}

// Detection first, classification only for accepted instances.
template <class T>
std::vector<RecognitionOutcome> recognize(const ModelTriple<T>& model, const Tensor<T>& instances,
                                          double theta) {
    const Tensor<T> probs = classifier_probabilities(model, instances);
    std::vector<RecognitionOutcome> out;
    out.reserve(static_cast<std::size_t>(probs.dim(0)));
    for (std::int64_t i = 0; i < probs.dim(0); ++i)
        out.push_back(recognize_probs(probs.row(i), theta));
    return out;
}

template <class T>
std::vector<double> max_probabilities(const ModelTriple<T>& model, const Tensor<T>& instances) {
    const Tensor<T> probs = classifier_probabilities(model, instances);
    std::vector<double> out(static_cast<std::size_t>(probs.dim(0)));
    for (std::int64_t i = 0; i < probs.dim(0); ++i)
        out[static_cast<std::size_t>(i)] = static_cast<double>(probs.row(i)[argmax(probs.row(i))]);
    return out;
}

// Percentile with linear interpolation between closest ranks.
inline double percentile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("percentile over an empty set");
    if (!(q >= 0.0 && q <= 100.0)) throw InvalidConfig("percentile q must lie in [0,100]");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// Nudges a resolved threshold into the open interval.
inline double clamp_theta(double theta) {
    return std::clamp(theta, 1e-6, 1.0 - 1e-6);
}

inline double sweep_threshold(const std::vector<double>& known_max_probs,
                              const std::vector<double>& unknown_max_probs,
                              const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidConfig("threshold sweep needs a non-empty grid");
    if (known_max_probs.empty() || unknown_max_probs.empty())
        throw InvalidInput("threshold sweep needs both known and pseudo-unknown calibration sets");
    double best_theta = 0.0, best_dacc = -1.0;
    for (double theta : grid) {
        check_theta(theta);
        double accepted = 0.0, rejected = 0.0;
        for (double p : known_max_probs)
            if (!(p < theta)) accepted += 1.0;
        for (double p : unknown_max_probs)
            if (p < theta) rejected += 1.0;
        const double tpr = accepted / static_cast<double>(known_max_probs.size());
        const double tnr = rejected / static_cast<double>(unknown_max_probs.size());
        const double dacc = 0.5 * (tpr + tnr);
        if (dacc > best_dacc) {
            best_dacc = dacc;
            best_theta = theta;
        }
    }
    return best_theta;
}

// Resolves theta. fixed: the constant. percentile(q): the q-th percentile of
// validation known max-probabilities. sweep: best-D_Acc grid point, with the
// pseudo-unknown scores supplied by the caller (synthesized instances in the
// shipped pipeline).
template <class T>
double calibrate_threshold(const ModelTriple<T>& model, const Tensor<T>& validation,
                           const ThresholdPolicy& policy,
                           const std::vector<double>* pseudo_unknown_max_probs = nullptr) {
    switch (policy.kind) {
    case ThresholdPolicy::Kind::fixed:
        check_theta(policy.value);
        return policy.value;
    case ThresholdPolicy::Kind::percentile: {
        if (validation.rank() != 2 || validation.dim(0) < 1)
            throw InvalidInput("percentile threshold policy needs a non-empty validation set");
        return clamp_theta(percentile_linear(max_probabilities(model, validation), policy.value));
    }
    case ThresholdPolicy::Kind::sweep: {
        if (!pseudo_unknown_max_probs)
            throw InvalidInput("sweep threshold policy needs pseudo-unknown scores");
        return sweep_threshold(max_probabilities(model, validation), *pseudo_unknown_max_probs,
                               policy.grid);
    }
    }
    throw ContractViolation("unreachable threshold policy kind");
}

} // namespace cnsnet
