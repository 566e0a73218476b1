#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carl/mdp.hpp"
#include "carl/net.hpp"

namespace carl {

enum class MixingMode { kSoft, kHardGumbel };

const char* to_string(MixingMode m);
MixingMode mixing_mode_from_string(const std::string& s);

struct PolicyArchitecture {
    std::vector<std::size_t> factorizer_hidden{32, 32};
    std::vector<std::size_t> sub_policy_hidden{64, 64};
};

/// Factorizer over M sub-spaces plus M deterministic sub-policies.
///
/// The factorizer maps a normalized state to weights c (a point on the simplex);
/// the soft action is sum_i c_i * mu_i(s).
class CascadePolicy {
public:
    CascadePolicy() = default;
    CascadePolicy(DenseNet factorizer, std::vector<DenseNet> sub_policies, MixingMode mode = MixingMode::kSoft,
                  double temperature = 1.0);

    /// Each sub-policy gets its own seed derived from `seed`.
    static CascadePolicy create(std::size_t sub_policies, std::uint64_t seed, const PolicyArchitecture& arch = {},
                                MixingMode mode = MixingMode::kSoft, double temperature = 1.0);

    std::size_t size() const { return sub_policies_.size(); }
    const DenseNet& factorizer() const { return factorizer_; }
    DenseNet& factorizer() { return factorizer_; }
    const std::vector<DenseNet>& sub_policies() const { return sub_policies_; }
    std::vector<DenseNet>& sub_policies() { return sub_policies_; }
    const DenseNet& sub_policy(std::size_t i) const { return sub_policies_.at(i); }
    DenseNet& sub_policy(std::size_t i) { return sub_policies_.at(i); }

    MixingMode mixing_mode() const { return mode_; }
    double temperature() const { return temperature_; }
    void set_mixing(MixingMode mode, double temperature);

    std::size_t parameter_count() const;

    /// Factorizer output C(s).
    std::vector<double> factorize(std::span<const double> state) const;

    /// Soft mode: convex combination of sub-policy actions. Hard mode: action of the argmax sub-policy.
    TsAction act(std::span<const double> state) const;

    /// Outputs of every sub-policy for one state.
    std::vector<ActionVector> sub_actions(std::span<const double> state) const;

private:
    void check_invariants() const;

    DenseNet factorizer_;
    std::vector<DenseNet> sub_policies_;
    MixingMode mode_ = MixingMode::kSoft;
    double temperature_ = 1.0;
};

/// Mixes sub-policy actions with the given weights.
ActionVector mix_actions(std::span<const ActionVector> actions, std::span<const double> weights);

enum class GumbelPhase { kTraining, kEvaluation };

struct GumbelSelection {
    TsAction action;
    /// Sub-policy picked by the Gumbel-max draw (training) or the argmax of C(s) (evaluation).
    std::size_t selected = 0;
    /// softmax((log c + g) / temperature) in training; one-hot in evaluation.
    std::vector<double> relaxed_weights;
};

/// Gumbel-softmax mixing. Training returns the temperature-relaxed mixture; evaluation is deterministic.
GumbelSelection act_hard_gumbel(const CascadePolicy& policy, std::span<const double> state, std::mt19937_64& rng,
                                GumbelPhase phase);

/// Draws standard Gumbel noise.
double sample_gumbel(std::mt19937_64& rng);

struct TransferResult {
    /// Mean factorizer output over the new states.
    std::vector<double> weights;
    std::size_t new_index = 0;
};

/// Appends a sub-policy whose parameters are the mean-factorizer-weighted average of the existing ones.
/// The factorizer output layer gains one unit initialized with the same weighted average of its rows.
TransferResult transfer_init(CascadePolicy& policy, std::span<const StateVector> new_states);

/// Appends `sub_policy` and a factorizer unit whose incoming weights average existing rows with `row_weights`.
void extend_policy(CascadePolicy& policy, DenseNet sub_policy, std::span<const double> row_weights);

}  // namespace carl
