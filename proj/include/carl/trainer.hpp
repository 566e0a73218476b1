#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carl/cascade_policy.hpp"
#include "carl/mdp.hpp"
#include "carl/net.hpp"

namespace carl {

/// How log(C(s)^T M(s)) is scalarized over the six knobs.
enum class PolicyLikelihood {
    /// sum_k log m_k(s), the mixed action read literally.
    kLiteralLog,
    /// log N(a_data | m(s), sigma^2 I).
    kGaussian,
};

const char* to_string(PolicyLikelihood l);
PolicyLikelihood policy_likelihood_from_string(const std::string& s);

struct TrainerConfig {
    double lambda = 1.0;
    double gamma = 0.99;
    std::size_t batch_size = 256;
    double learning_rate = 1e-4;
    double tau = 0.005;
    double confidence_coeff = 1.0;
    std::size_t gradient_steps = 1000;
    double advantage_clip = 20.0;
    /// Multiplies rewards before they enter critic targets.
    double reward_scale = 1.0;
    PolicyLikelihood likelihood = PolicyLikelihood::kGaussian;
    double gaussian_sigma = 0.2;
    std::vector<std::size_t> critic_hidden{64, 64};

    /// Throws ConfigError for out-of-range values.
    void validate() const;
};

/// Reads `key = value` lines; '#' starts a comment. Unknown keys are a ConfigError.
/// Keys outside TrainerConfig (seed, paths) are returned in `extra` when non-null.
TrainerConfig parse_trainer_config(const std::string& text,
                                   std::vector<std::pair<std::string, std::string>>* extra = nullptr);
TrainerConfig load_trainer_config(const std::filesystem::path& path,
                                  std::vector<std::pair<std::string, std::string>>* extra = nullptr);
std::string format_trainer_config(const TrainerConfig& config);

inline constexpr std::size_t kCriticInputDim = kStateDim + kActionDim;

/// Twin Q networks over (state || action) with delayed target copies.
struct CriticPair {
    DenseNet q1;
    DenseNet q2;
    DenseNet q1_target;
    DenseNet q2_target;

    static CriticPair create(std::uint64_t seed, const std::vector<std::size_t>& hidden = {64, 64});

    double q_min(std::span<const double> state, std::span<const double> action) const;
    double q_target_min(std::span<const double> state, std::span<const double> action) const;
};

/// One normalized training tuple.
struct Sample {
    StateVector state{};
    ActionVector action{};
    double reward = 0.0;
    StateVector next_state{};
    bool terminal = false;
};

std::vector<Sample> prepare_samples(const OfflineDataset& dataset);

/// Uniform sampling with replacement: batch_size draws of uniform_int_distribution(0, n-1) on `rng`.
std::vector<std::size_t> sample_batch_indices(std::size_t n, std::size_t batch_size, std::mt19937_64& rng);

/// A = min(q1,q2)(s,a) - min(q1,q2)(s, act(policy, s)).
double compute_advantage(const CriticPair& critics, const CascadePolicy& policy, std::span<const double> state,
                         std::span<const double> action);

/// exp(min(A / lambda, clip)).
double advantage_weight(double advantage, double lambda, double clip);

struct PolicyLoss {
    double loss = 0.0;
    std::vector<double> factorizer_grad;
    std::vector<std::vector<double>> sub_policy_grads;
    double mean_advantage_weight = 0.0;
    double mean_confidence = 0.0;
};

/// Advantage-weighted cascade loss with the confidence regularizer and its exact gradients.
///
/// loss = -mean_b[ loglik_b * exp(min(A_b / lambda, clip)) ] - confidence_coeff * mean_b[ sum_i c_i(s_b)^2 ]
///
/// The advantage weight is a constant (no gradient into the critics). In hard-gumbel mode a
/// `gumbel_rng` supplies the noise for the relaxed one-hot weights.
PolicyLoss carl_policy_loss(const CascadePolicy& policy, const CriticPair& critics, std::span<const Sample> batch,
                            const TrainerConfig& config, std::mt19937_64* gumbel_rng = nullptr);

/// Loss value only, with advantages evaluated at the given (frozen) policy. Used for finite differences.
double carl_policy_loss_value(const CascadePolicy& policy, const CriticPair& critics, std::span<const Sample> batch,
                              const TrainerConfig& config, std::span<const double> frozen_weights,
                              std::mt19937_64* gumbel_rng = nullptr);

/// Per-sample advantage weights exp(min(A/lambda, clip)) under `policy`.
std::vector<double> advantage_weights(const CascadePolicy& policy, const CriticPair& critics,
                                      std::span<const Sample> batch, const TrainerConfig& config);

struct CriticOptimizers {
    Adam q1;
    Adam q2;
};

/// One Adam step of both critics toward y = scale*r + gamma * (1 - terminal) * min(q1',q2')(s', act(target, s')).
/// Returns the mean of the two critics' MSE before the step.
double critic_update(CriticPair& critics, CriticOptimizers& optimizers, const CascadePolicy& target_policy,
                     std::span<const Sample> batch, const TrainerConfig& config);

/// target <- tau * online + (1 - tau) * target, element-wise.
void soft_update(DenseNet& target, const DenseNet& online, double tau);
void target_update(CriticPair& critics, CascadePolicy& target_policy, const CascadePolicy& policy, double tau);

struct LossRecord {
    std::size_t step = 0;
    double policy_loss = 0.0;
    double critic_loss = 0.0;
    double mean_advantage_weight = 0.0;
    double mean_confidence = 0.0;
};

std::string loss_curve_csv(std::span<const LossRecord> records);

/// Stateful trainer; run() may be called repeatedly on a growing sample set.
class OfflineTrainer {
public:
    OfflineTrainer(CascadePolicy policy, CriticPair critics, TrainerConfig config, std::uint64_t seed);

    /// Runs `steps` iterations of: sample batch, critic update, policy step, target update.
    std::vector<LossRecord> run(std::span<const Sample> samples, std::size_t steps);

    const CascadePolicy& policy() const { return policy_; }
    const CascadePolicy& target_policy() const { return target_policy_; }
    const CriticPair& critics() const { return critics_; }
    const TrainerConfig& config() const { return config_; }
    std::size_t steps_done() const { return steps_done_; }
    const Adam& factorizer_optimizer() const { return factorizer_opt_; }
    const std::vector<Adam>& sub_policy_optimizers() const { return sub_opts_; }
    const CriticOptimizers& critic_optimizers() const { return critic_opts_; }

private:
    CascadePolicy policy_;
    CascadePolicy target_policy_;
    CriticPair critics_;
    TrainerConfig config_;
    Adam factorizer_opt_;
    std::vector<Adam> sub_opts_;
    CriticOptimizers critic_opts_;
    std::mt19937_64 rng_;
    std::mt19937_64 gumbel_rng_;
    std::size_t steps_done_ = 0;
};

struct TrainResult {
    CascadePolicy policy;
    CriticPair critics;
    NormalizationStats normalization;
    std::vector<LossRecord> losses;
};

/// Trains for config.gradient_steps on the dataset; deterministic given `seed`.
TrainResult train_offline(CascadePolicy policy, CriticPair critics, const OfflineDataset& dataset,
                          const TrainerConfig& config, std::uint64_t seed);

}  // namespace carl
