#pragma once

#include <cmath>
#include <vector>

#include "carl/cascade_policy.hpp"
#include "carl/net.hpp"

namespace carl::test {

/// Sub-policy whose output is `value` in every component regardless of the state.
inline DenseNet constant_sub_policy(double value, std::size_t hidden = 4) {
    DenseNet net({kStateDim, hidden, kActionDim}, OutputActivation::kSquash);
    const double s = (value - kSquashFloor) / (1.0 - kSquashFloor);
    const double logit = std::log(s / (1.0 - s));
    auto p = net.mutable_params();
    for (std::size_t o = 0; o < kActionDim; ++o) p[net.bias_offset(1) + o] = logit;
    return net;
}

/// Factorizer emitting `weights` for every state (zero entries become exact zeros).
inline DenseNet constant_factorizer(const std::vector<double>& weights, std::size_t hidden = 4) {
    DenseNet net({kStateDim, hidden, weights.size()}, OutputActivation::kSimplex);
    auto p = net.mutable_params();
    for (std::size_t o = 0; o < weights.size(); ++o) {
        p[net.bias_offset(1) + o] = weights[o] > 0.0 ? std::log(weights[o]) : -1e4;
    }
    return net;
}

/// Factorizer sending time_of_day above `threshold` to sub-space 0 and below it to sub-space 1.
inline DenseNet time_of_day_factorizer(double threshold, double sharpness = 200.0) {
    DenseNet net({kStateDim, 2, 2}, OutputActivation::kSimplex);
    auto p = net.mutable_params();
    // hidden 0 = relu(k (tod - t)), hidden 1 = relu(k (t - tod))
    p[0 * kStateDim + kTimeOfDay] = sharpness;
    p[1 * kStateDim + kTimeOfDay] = -sharpness;
    p[net.bias_offset(0) + 0] = -sharpness * threshold;
    p[net.bias_offset(0) + 1] = sharpness * threshold;
    const std::size_t w1 = net.param_offset(1);
    p[w1 + 0 * 2 + 0] = 1.0;
    p[w1 + 1 * 2 + 1] = 1.0;
    return net;
}

}  // namespace carl::test
