#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace carl {

enum class OutputActivation {
    kIdentity,
    /// floor + (1 - floor) * logistic(z); never reaches exactly 0.
    kSquash,
    /// softmax onto the probability simplex.
    kSimplex,
};

inline constexpr double kSquashFloor = 1e-3;

const char* to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

class DenseNet;

/// Activations recorded by DenseNet::forward for a later backward pass.
struct ForwardCache {
    /// layer_inputs[l] is the input of weight layer l; the last entry is the network output.
    std::vector<std::vector<double>> layer_inputs;
    /// Pre-activation of every weight layer.
    std::vector<std::vector<double>> pre_activations;
    std::uint64_t stamp = 0;

    bool empty() const { return layer_inputs.empty(); }
    std::span<const double> output() const { return layer_inputs.back(); }
};

/// Fully connected feed-forward network, ReLU hidden layers.
///
/// Parameters are stored flat. Weight layer l occupies
/// [W_l (n_out x n_in, row-major), b_l (n_out)] starting at param_offset(l).
class DenseNet {
public:
    DenseNet() = default;
    /// All parameters zero.
    DenseNet(std::vector<std::size_t> layer_sizes, OutputActivation output);

    /// Fan-in scaled uniform init: U(-1/sqrt(n_in), 1/sqrt(n_in)) for weights and biases.
    static DenseNet initialized(std::vector<std::size_t> layer_sizes, OutputActivation output, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    OutputActivation output_activation() const { return output_; }
    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    std::size_t weight_layers() const { return layer_sizes_.size() - 1; }
    std::size_t param_count() const { return params_.size(); }
    std::size_t param_offset(std::size_t layer) const { return offsets_.at(layer); }
    std::size_t bias_offset(std::size_t layer) const;

    std::span<const double> params() const { return params_; }
    /// Invalidates every ForwardCache taken before the call.
    std::span<double> mutable_params();
    void set_params(std::span<const double> values);

    bool same_architecture(const DenseNet& other) const;

    std::vector<double> forward(std::span<const double> input) const;
    std::vector<double> forward(std::span<const double> input, ForwardCache& cache) const;

    /// Accumulates dLoss/dparams into param_grad and returns dLoss/dinput.
    std::vector<double> backward(const ForwardCache& cache,
                                 std::span<const double> output_grad,
                                 std::span<double> param_grad) const;

private:
    void build_offsets();
    void apply_output(std::span<const double> pre, std::span<double> out) const;

    std::vector<std::size_t> layer_sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    OutputActivation output_ = OutputActivation::kIdentity;
    std::uint64_t stamp_ = 0;
};

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t param_count, AdamConfig config);

    /// Throws TrainingError naming the first non-finite gradient entry.
    void step(std::span<double> params, std::span<const double> grads);

    const AdamConfig& config() const { return config_; }
    std::uint64_t step_count() const { return step_count_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

    /// Restores a serialized state.
    void restore(std::uint64_t step_count, std::vector<double> m, std::vector<double> v);

private:
    AdamConfig config_;
    std::uint64_t step_count_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace carl
