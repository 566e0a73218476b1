#include "carl/cascade_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "carl/error.hpp"

namespace carl {

const char* to_string(MixingMode m) { return m == MixingMode::kSoft ? "soft" : "hard-gumbel"; }

MixingMode mixing_mode_from_string(const std::string& s) {
    if (s == "soft") return MixingMode::kSoft;
    if (s == "hard-gumbel") return MixingMode::kHardGumbel;
    throw ConfigError("unknown mixing mode '" + s + "'");
}

CascadePolicy::CascadePolicy(DenseNet factorizer, std::vector<DenseNet> sub_policies, MixingMode mode,
                             double temperature)
    : factorizer_(std::move(factorizer)), sub_policies_(std::move(sub_policies)) {
    set_mixing(mode, temperature);
    check_invariants();
}

CascadePolicy CascadePolicy::create(std::size_t sub_policies, std::uint64_t seed, const PolicyArchitecture& arch,
                                    MixingMode mode, double temperature) {
    if (sub_policies == 0) throw ConfigError("a cascade policy needs at least one sub-policy");
    std::vector<std::size_t> f_sizes{kStateDim};
    f_sizes.insert(f_sizes.end(), arch.factorizer_hidden.begin(), arch.factorizer_hidden.end());
    f_sizes.push_back(sub_policies);
    std::vector<std::size_t> p_sizes{kStateDim};
    p_sizes.insert(p_sizes.end(), arch.sub_policy_hidden.begin(), arch.sub_policy_hidden.end());
    p_sizes.push_back(kActionDim);

    std::vector<std::uint64_t> seeds(sub_policies + 1);
    std::mt19937_64 rng(seed);
    for (auto& s : seeds) s = rng();

    DenseNet factorizer = DenseNet::initialized(f_sizes, OutputActivation::kSimplex, seeds[0]);
    std::vector<DenseNet> subs;
    subs.reserve(sub_policies);
    for (std::size_t i = 0; i < sub_policies; ++i) {
        subs.push_back(DenseNet::initialized(p_sizes, OutputActivation::kSquash, seeds[i + 1]));
    }
    return CascadePolicy(std::move(factorizer), std::move(subs), mode, temperature);
}

void CascadePolicy::set_mixing(MixingMode mode, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("gumbel temperature must be positive");
    mode_ = mode;
    temperature_ = temperature;
}

void CascadePolicy::check_invariants() const {
    if (sub_policies_.empty()) throw ConfigError("a cascade policy needs at least one sub-policy");
    if (factorizer_.output_activation() != OutputActivation::kSimplex) {
        throw ConfigError("factorizer must end in a simplex output");
    }
    if (factorizer_.input_dim() != kStateDim || factorizer_.output_dim() != sub_policies_.size()) {
        throw ConfigError("factorizer must map 8 features to M weights");
    }
    for (const auto& p : sub_policies_) {
        if (p.input_dim() != kStateDim || p.output_dim() != kActionDim) {
            throw ConfigError("sub-policies must map 8 features to 6 knobs");
        }
        if (p.output_activation() != OutputActivation::kSquash) {
            throw ConfigError("sub-policies must use the squashed output");
        }
    }
}

std::size_t CascadePolicy::parameter_count() const {
    std::size_t n = factorizer_.param_count();
    for (const auto& p : sub_policies_) n += p.param_count();
    return n;
}

std::vector<double> CascadePolicy::factorize(std::span<const double> state) const {
    return factorizer_.forward(state);
}

std::vector<ActionVector> CascadePolicy::sub_actions(std::span<const double> state) const {
    std::vector<ActionVector> out(sub_policies_.size());
    for (std::size_t i = 0; i < sub_policies_.size(); ++i) {
        const std::vector<double> y = sub_policies_[i].forward(state);
        std::copy(y.begin(), y.end(), out[i].begin());
    }
    return out;
}

ActionVector mix_actions(std::span<const ActionVector> actions, std::span<const double> weights) {
    if (actions.size() != weights.size()) throw DomainError("one weight per sub-policy action is required");
    ActionVector out{};
    for (std::size_t i = 0; i < actions.size(); ++i) {
        for (std::size_t k = 0; k < kActionDim; ++k) out[k] += weights[i] * actions[i][k];
    }
    return out;
}

namespace {

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TsAction CascadePolicy::act(std::span<const double> state) const {
    const std::vector<double> c = factorize(state);
    if (mode_ == MixingMode::kHardGumbel) {
        const std::vector<double> y = sub_policies_[argmax(c)].forward(state);
        TsAction a;
        std::copy(y.begin(), y.end(), a.values.begin());
        return a;
    }
    return TsAction{mix_actions(sub_actions(state), c)};
}

double sample_gumbel(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    return -std::log(-std::log(u));
}

GumbelSelection act_hard_gumbel(const CascadePolicy& policy, std::span<const double> state, std::mt19937_64& rng,
                                GumbelPhase phase) {
    if (!(policy.temperature() > 0.0)) throw ConfigError("gumbel temperature must be positive");
    const std::vector<double> c = policy.factorize(state);
    const std::size_t m = c.size();
    GumbelSelection out;
    out.relaxed_weights.assign(m, 0.0);

    if (phase == GumbelPhase::kEvaluation) {
        out.selected = argmax(c);
        out.relaxed_weights[out.selected] = 1.0;
        const std::vector<double> y = policy.sub_policy(out.selected).forward(state);
        std::copy(y.begin(), y.end(), out.action.values.begin());
        return out;
    }

    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double log_c = c[i] > 0.0 ? std::log(c[i]) : -std::numeric_limits<double>::infinity();
        logits[i] = log_c + sample_gumbel(rng);
    }
    out.selected = argmax(logits);
    const double peak = logits[out.selected];
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out.relaxed_weights[i] = std::exp((logits[i] - peak) / policy.temperature());
        total += out.relaxed_weights[i];
    }
    for (double& w : out.relaxed_weights) w /= total;
    out.action = TsAction{mix_actions(policy.sub_actions(state), out.relaxed_weights)};
    return out;
}

void extend_policy(CascadePolicy& policy, DenseNet sub_policy, std::span<const double> row_weights) {
    const std::size_t m = policy.size();
    if (row_weights.size() != m) throw DomainError("one row weight per existing sub-policy is required");
    if (!sub_policy.same_architecture(policy.sub_policy(0))) {
        throw UnsupportedError("new sub-policy architecture differs from the existing ones");
    }

    const DenseNet& old_f = policy.factorizer();
    std::vector<std::size_t> sizes = old_f.layer_sizes();
    sizes.back() = m + 1;
    DenseNet new_f(sizes, old_f.output_activation());

    const std::size_t last = old_f.weight_layers() - 1;
    const std::size_t n_in = sizes[last];
    std::span<const double> src = old_f.params();
    std::span<double> dst = new_f.mutable_params();
    // Hidden layers are copied verbatim.
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(old_f.param_offset(last)), dst.begin());

    const std::size_t w_src = old_f.param_offset(last);
    const std::size_t b_src = old_f.bias_offset(last);
    const std::size_t w_dst = new_f.param_offset(last);
    const std::size_t b_dst = new_f.bias_offset(last);
    for (std::size_t o = 0; o < m; ++o) {
        for (std::size_t i = 0; i < n_in; ++i) dst[w_dst + o * n_in + i] = src[w_src + o * n_in + i];
        dst[b_dst + o] = src[b_src + o];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
        double acc = 0.0;
        for (std::size_t o = 0; o < m; ++o) acc += row_weights[o] * src[w_src + o * n_in + i];
        dst[w_dst + m * n_in + i] = acc;
    }
    double bias = 0.0;
    for (std::size_t o = 0; o < m; ++o) bias += row_weights[o] * src[b_src + o];
    dst[b_dst + m] = bias;

    std::vector<DenseNet> subs = policy.sub_policies();
    subs.push_back(std::move(sub_policy));
    policy = CascadePolicy(std::move(new_f), std::move(subs), policy.mixing_mode(), policy.temperature());
}

TransferResult transfer_init(CascadePolicy& policy, std::span<const StateVector> new_states) {
    if (new_states.empty()) throw DomainError("knowledge transfer needs at least one new state");
    const std::size_t m = policy.size();
    for (const auto& p : policy.sub_policies()) {
        if (!p.same_architecture(policy.sub_policy(0))) {
            throw UnsupportedError("sub-policies with different architectures cannot be averaged");
        }
    }

    TransferResult result;
    result.weights.assign(m, 0.0);
    for (const auto& s : new_states) {
        const std::vector<double> c = policy.factorize(s);
        for (std::size_t i = 0; i < m; ++i) result.weights[i] += c[i];
    }
    for (double& w : result.weights) w /= static_cast<double>(new_states.size());

    DenseNet fresh = policy.sub_policy(0);
    std::span<double> theta = fresh.mutable_params();
    std::fill(theta.begin(), theta.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::span<const double> src = policy.sub_policy(i).params();
        const double w = result.weights[i];
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += w * src[k];
    }

    extend_policy(policy, std::move(fresh), result.weights);
    result.new_index = m;
    return result;
}

}  // namespace carl
