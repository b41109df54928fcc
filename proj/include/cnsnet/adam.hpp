#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cnsnet/tensor.hpp"

namespace cnsnet {

// Adam state for one parameter set. Accumulators mirror the parameter shapes;
// the step counter advances by exactly one per update.
template <class T>
struct AdamState {
    std::vector<Tensor<T>> first_moment;
    std::vector<Tensor<T>> second_moment;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(const std::vector<Tensor<T>>& params) {
        AdamState s;
        s.first_moment.reserve(params.size());
        s.second_moment.reserve(params.size());
        for (const auto& p : params) {
            s.first_moment.emplace_back(p.shape());
            s.second_moment.emplace_back(p.shape());
        }
        return s;
    }
};

// One bias-corrected Adam update, in place.
template <class T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, double learning_rate) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ContractViolation("adam_step: parameter/gradient/state count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]))
            throw ContractViolation("adam_step: shape mismatch at parameter " + std::to_string(i));

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& w = params[i];
        const Tensor<T>& g = grads[i];
        Tensor<T>& m = state.first_moment[i];
        Tensor<T>& v = state.second_moment[i];
        for (std::int64_t j = 0; j < w.numel(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = state.beta1 * static_cast<double>(m[j]) + (1.0 - state.beta1) * gj;
            const double vj = state.beta2 * static_cast<double>(v[j]) + (1.0 - state.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            w[j] -= static_cast<T>(learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + state.epsilon));
        }
    }
}

} // namespace cnsnet
