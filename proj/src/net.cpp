#include "carl/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "carl/error.hpp"

namespace carl {

namespace {

std::uint64_t next_stamp() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

const char* to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::kIdentity: return "identity";
        case OutputActivation::kSquash: return "squash";
        case OutputActivation::kSimplex: return "simplex";
    }
    return "?";
}

OutputActivation output_activation_from_string(const std::string& s) {
    if (s == "identity") return OutputActivation::kIdentity;
    if (s == "squash") return OutputActivation::kSquash;
    if (s == "simplex") return OutputActivation::kSimplex;
    throw ConfigError("unknown output activation '" + s + "'");
}

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, OutputActivation output)
    : layer_sizes_(std::move(layer_sizes)), output_(output), stamp_(next_stamp()) {
    if (layer_sizes_.size() < 2) throw ConfigError("a network needs at least an input and an output layer");
    for (std::size_t n : layer_sizes_) {
        if (n == 0) throw ConfigError("layer sizes must be positive");
    }
    build_offsets();
}

DenseNet DenseNet::initialized(std::vector<std::size_t> layer_sizes, OutputActivation output, std::uint64_t seed) {
    DenseNet net(std::move(layer_sizes), output);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < net.weight_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.layer_sizes_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t begin = net.offsets_[l];
        const std::size_t end = net.offsets_[l + 1];
        for (std::size_t k = begin; k < end; ++k) net.params_[k] = dist(rng);
    }
    return net;
}

void DenseNet::build_offsets() {
    offsets_.assign(layer_sizes_.size(), 0);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        offsets_[l] = total;
        total += (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
    }
    offsets_.back() = total;
    params_.assign(total, 0.0);
}

std::size_t DenseNet::bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + layer_sizes_[layer] * layer_sizes_[layer + 1];
}

std::span<double> DenseNet::mutable_params() {
    stamp_ = next_stamp();
    return params_;
}

void DenseNet::set_params(std::span<const double> values) {
    if (values.size() != params_.size()) throw DomainError("parameter count mismatch");
    std::copy(values.begin(), values.end(), params_.begin());
    stamp_ = next_stamp();
}

bool DenseNet::same_architecture(const DenseNet& other) const {
    return layer_sizes_ == other.layer_sizes_ && output_ == other.output_;
}

void DenseNet::apply_output(std::span<const double> pre, std::span<double> out) const {
    switch (output_) {
        case OutputActivation::kIdentity:
            std::copy(pre.begin(), pre.end(), out.begin());
            break;
        case OutputActivation::kSquash:
            for (std::size_t i = 0; i < pre.size(); ++i) {
                out[i] = kSquashFloor + (1.0 - kSquashFloor) * logistic(pre[i]);
            }
            break;
        case OutputActivation::kSimplex: {
            const double peak = *std::max_element(pre.begin(), pre.end());
            double total = 0.0;
            for (std::size_t i = 0; i < pre.size(); ++i) {
                out[i] = std::exp(pre[i] - peak);
                total += out[i];
            }
            for (double& o : out) o /= total;
            break;
        }
    }
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
    ForwardCache scratch;
    return forward(input, scratch);
}

std::vector<double> DenseNet::forward(std::span<const double> input, ForwardCache& cache) const {
    if (layer_sizes_.empty()) throw UsageError("forward on an empty network");
    if (input.size() != input_dim()) {
        throw DomainError("input has " + std::to_string(input.size()) + " components, network expects " +
                          std::to_string(input_dim()));
    }
    const std::size_t layers = weight_layers();
    cache.layer_inputs.resize(layers + 1);
    cache.pre_activations.resize(layers);
    cache.layer_inputs[0].assign(input.begin(), input.end());

    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t n_in = layer_sizes_[l];
        const std::size_t n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + n_in * n_out;
        const std::vector<double>& x = cache.layer_inputs[l];
        std::vector<double>& z = cache.pre_activations[l];
        z.resize(n_out);
        for (std::size_t o = 0; o < n_out; ++o) {
            const double* row = w + o * n_in;
            double acc = b[o];
            for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
            z[o] = acc;
        }
        std::vector<double>& y = cache.layer_inputs[l + 1];
        y.resize(n_out);
        if (l + 1 < layers) {
            for (std::size_t o = 0; o < n_out; ++o) y[o] = z[o] > 0.0 ? z[o] : 0.0;
        } else {
            apply_output(z, y);
        }
    }
    cache.stamp = stamp_;
    return cache.layer_inputs.back();
}

std::vector<double> DenseNet::backward(const ForwardCache& cache,
                                       std::span<const double> output_grad,
                                       std::span<double> param_grad) const {
    if (cache.empty()) throw UsageError("backward called without a forward cache");
    if (cache.stamp != stamp_ || cache.layer_inputs.size() != layer_sizes_.size()) {
        throw UsageError("forward cache is stale: parameters changed since forward()");
    }
    if (output_grad.size() != output_dim()) throw DomainError("output gradient has wrong length");
    if (param_grad.size() != params_.size()) throw DomainError("parameter gradient buffer has wrong length");

    const std::size_t layers = weight_layers();
    // dL/dz for the output layer.
    std::vector<double> delta(output_dim());
    const std::vector<double>& y = cache.layer_inputs.back();
    switch (output_) {
        case OutputActivation::kIdentity:
            std::copy(output_grad.begin(), output_grad.end(), delta.begin());
            break;
        case OutputActivation::kSquash:
            for (std::size_t i = 0; i < delta.size(); ++i) {
                const double s = logistic(cache.pre_activations.back()[i]);
                delta[i] = output_grad[i] * (1.0 - kSquashFloor) * s * (1.0 - s);
            }
            break;
        case OutputActivation::kSimplex: {
            double dot = 0.0;
            for (std::size_t i = 0; i < delta.size(); ++i) dot += y[i] * output_grad[i];
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = y[i] * (output_grad[i] - dot);
            break;
        }
    }

    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t n_in = layer_sizes_[l];
        const std::size_t n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + offsets_[l];
        double* gw = param_grad.data() + offsets_[l];
        double* gb = gw + n_in * n_out;
        const std::vector<double>& x = cache.layer_inputs[l];

        std::vector<double> prev(n_in, 0.0);
        for (std::size_t o = 0; o < n_out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            gb[o] += d;
            const double* row = w + o * n_in;
            double* grow = gw + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                grow[i] += d * x[i];
                prev[i] += d * row[i];
            }
        }
        if (l > 0) {
            const std::vector<double>& z = cache.pre_activations[l - 1];
            for (std::size_t i = 0; i < n_in; ++i) {
                if (z[i] <= 0.0) prev[i] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

Adam::Adam(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw DomainError("optimizer state, parameters and gradients must have equal length");
    }
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!std::isfinite(grads[k])) {
            throw TrainingError("gradient for parameter " + std::to_string(k) + " is not finite");
        }
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        const double g = grads[k];
        m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
        v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m_[k] / c1;
        const double v_hat = v_[k] / c2;
        params[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

void Adam::restore(std::uint64_t step_count, std::vector<double> m, std::vector<double> v) {
    if (m.size() != v.size()) throw DomainError("moment vectors differ in length");
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace carl
