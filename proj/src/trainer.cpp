#include "carl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "carl/error.hpp"
#include "carl/io_util.hpp"

namespace carl {

const char* to_string(PolicyLikelihood l) { return l == PolicyLikelihood::kLiteralLog ? "literal_log" : "gaussian"; }

PolicyLikelihood policy_likelihood_from_string(const std::string& s) {
    if (s == "literal_log") return PolicyLikelihood::kLiteralLog;
    if (s == "gaussian") return PolicyLikelihood::kGaussian;
    throw ConfigError("unknown likelihood '" + s + "' (expected literal_log or gaussian)");
}

void TrainerConfig::validate() const {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0,1]");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(advantage_clip > 0.0)) throw ConfigError("advantage_clip must be positive");
    if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
    if (!(gaussian_sigma > 0.0)) throw ConfigError("gaussian_sigma must be positive");
    if (!(confidence_coeff >= 0.0)) throw ConfigError("confidence_coeff must be nonnegative");
    for (std::size_t h : critic_hidden) {
        if (h == 0) throw ConfigError("critic_hidden sizes must be positive");
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d < 0.0 || d != std::floor(d)) throw ConfigError("'" + key + "' expects a nonnegative integer");
    return static_cast<std::size_t>(d);
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_size(key, item));
    }
    return out;
}

}  // namespace

TrainerConfig parse_trainer_config(const std::string& text, std::vector<std::pair<std::string, std::string>>* extra) {
    TrainerConfig c;
    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "lambda") c.lambda = to_double(key, value);
        else if (key == "gamma") c.gamma = to_double(key, value);
        else if (key == "batch_size") c.batch_size = to_size(key, value);
        else if (key == "learning_rate") c.learning_rate = to_double(key, value);
        else if (key == "tau") c.tau = to_double(key, value);
        else if (key == "confidence_coeff") c.confidence_coeff = to_double(key, value);
        else if (key == "gradient_steps") c.gradient_steps = to_size(key, value);
        else if (key == "advantage_clip") c.advantage_clip = to_double(key, value);
        else if (key == "reward_scale") c.reward_scale = to_double(key, value);
        else if (key == "likelihood") c.likelihood = policy_likelihood_from_string(value);
        else if (key == "gaussian_sigma") c.gaussian_sigma = to_double(key, value);
        else if (key == "critic_hidden") c.critic_hidden = to_sizes(key, value);
        else if (extra != nullptr) extra->emplace_back(key, value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

TrainerConfig load_trainer_config(const std::filesystem::path& path,
                                  std::vector<std::pair<std::string, std::string>>* extra) {
    return parse_trainer_config(read_file(path), extra);
}

std::string format_trainer_config(const TrainerConfig& c) {
    std::string hidden;
    for (std::size_t i = 0; i < c.critic_hidden.size(); ++i) {
        hidden += (i ? "," : "") + std::to_string(c.critic_hidden[i]);
    }
    return fmt::format(
        "lambda = {}\ngamma = {}\nbatch_size = {}\nlearning_rate = {}\ntau = {}\nconfidence_coeff = {}\n"
        "gradient_steps = {}\nadvantage_clip = {}\nreward_scale = {}\nlikelihood = {}\ngaussian_sigma = {}\n"
        "critic_hidden = {}\n",
        c.lambda, c.gamma, c.batch_size, c.learning_rate, c.tau, c.confidence_coeff, c.gradient_steps,
        c.advantage_clip, c.reward_scale, to_string(c.likelihood), c.gaussian_sigma, hidden);
}

namespace {

std::array<double, kCriticInputDim> critic_input(std::span<const double> state, std::span<const double> action) {
    std::array<double, kCriticInputDim> x{};
    std::copy(state.begin(), state.end(), x.begin());
    std::copy(action.begin(), action.end(), x.begin() + kStateDim);
    return x;
}

}  // namespace

CriticPair CriticPair::create(std::uint64_t seed, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> sizes{kCriticInputDim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    std::mt19937_64 rng(seed);
    const std::uint64_t s1 = rng();
    const std::uint64_t s2 = rng();
    CriticPair c;
    c.q1 = DenseNet::initialized(sizes, OutputActivation::kIdentity, s1);
    c.q2 = DenseNet::initialized(sizes, OutputActivation::kIdentity, s2);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    return c;
}

double CriticPair::q_min(std::span<const double> state, std::span<const double> action) const {
    const auto x = critic_input(state, action);
    return std::min(q1.forward(x)[0], q2.forward(x)[0]);
}

double CriticPair::q_target_min(std::span<const double> state, std::span<const double> action) const {
    const auto x = critic_input(state, action);
    return std::min(q1_target.forward(x)[0], q2_target.forward(x)[0]);
}

std::vector<Sample> prepare_samples(const OfflineDataset& dataset) {
    std::vector<Sample> out;
    out.reserve(dataset.size());
    for (const auto& t : dataset.transitions) {
        Sample s;
        s.state = normalize_state(t.state, dataset.normalization);
        s.action = t.action.values;
        s.reward = t.reward;
        s.next_state = normalize_state(t.next_state, dataset.normalization);
        s.terminal = t.terminal;
        out.push_back(s);
    }
    return out;
}

std::vector<std::size_t> sample_batch_indices(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
    if (n == 0) throw ConfigError("cannot sample from an empty dataset");
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

double compute_advantage(const CriticPair& critics, const CascadePolicy& policy, std::span<const double> state,
                         std::span<const double> action) {
    const TsAction own = policy.act(state);
    return critics.q_min(state, action) - critics.q_min(state, own.values);
}

double advantage_weight(double advantage, double lambda, double clip) {
    return std::exp(std::min(advantage / lambda, clip));
}

std::vector<double> advantage_weights(const CascadePolicy& policy, const CriticPair& critics,
                                      std::span<const Sample> batch, const TrainerConfig& config) {
    std::vector<double> w(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double a = compute_advantage(critics, policy, batch[b].state, batch[b].action);
        w[b] = advantage_weight(a, config.lambda, config.advantage_clip);
    }
    return w;
}

namespace {

/// Log-likelihood term of one sample and its gradient w.r.t. the mixed action.
double log_likelihood(const ActionVector& mixed, const ActionVector& data, const TrainerConfig& config,
                      ActionVector& grad) {
    double ll = 0.0;
    if (config.likelihood == PolicyLikelihood::kLiteralLog) {
        for (std::size_t k = 0; k < kActionDim; ++k) {
            ll += std::log(mixed[k]);
            grad[k] = 1.0 / mixed[k];
        }
        return ll;
    }
    const double var = config.gaussian_sigma * config.gaussian_sigma;
    const double log_norm = std::log(config.gaussian_sigma * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t k = 0; k < kActionDim; ++k) {
        const double d = data[k] - mixed[k];
        ll += -0.5 * d * d / var - log_norm;
        grad[k] = d / var;
    }
    return ll;
}

/// Shared forward/backward for the cascade loss. `grads` may be null for value-only evaluation.
double evaluate_policy_loss(const CascadePolicy& policy, std::span<const Sample> batch, const TrainerConfig& config,
                            std::span<const double> weights, std::mt19937_64* gumbel_rng, PolicyLoss* grads) {
    if (batch.empty()) throw DomainError("policy loss needs a non-empty batch");
    if (weights.size() != batch.size()) throw DomainError("one advantage weight per sample is required");
    const bool gumbel = policy.mixing_mode() == MixingMode::kHardGumbel;
    if (gumbel && gumbel_rng == nullptr) throw UsageError("hard-gumbel training needs a noise generator");

    const std::size_t m = policy.size();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double temp = policy.temperature();

    if (grads != nullptr) {
        grads->factorizer_grad.assign(policy.factorizer().param_count(), 0.0);
        grads->sub_policy_grads.assign(m, {});
        for (std::size_t i = 0; i < m; ++i) grads->sub_policy_grads[i].assign(policy.sub_policy(i).param_count(), 0.0);
    }

    ForwardCache f_cache;
    std::vector<ForwardCache> sub_cache(m);
    std::vector<ActionVector> mu(m);
    std::vector<double> mix(m);
    double total = 0.0;
    double confidence_total = 0.0;

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Sample& s = batch[b];
        const std::vector<double> c = policy.factorizer().forward(s.state, f_cache);
        for (std::size_t i = 0; i < m; ++i) {
            const std::vector<double> y = policy.sub_policy(i).forward(s.state, sub_cache[i]);
            std::copy(y.begin(), y.end(), mu[i].begin());
        }

        if (gumbel) {
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                mix[i] = (std::log(c[i]) + sample_gumbel(*gumbel_rng)) / temp;
                peak = std::max(peak, mix[i]);
            }
            double z = 0.0;
            for (double& v : mix) {
                v = std::exp(v - peak);
                z += v;
            }
            for (double& v : mix) v /= z;
        } else {
            std::copy(c.begin(), c.end(), mix.begin());
        }

        const ActionVector mixed = mix_actions(mu, mix);
        ActionVector dll{};
        const double ll = log_likelihood(mixed, s.action, config, dll);
        double conf = 0.0;
        for (double ci : c) conf += ci * ci;
        const double sample_loss = -ll * weights[b] - config.confidence_coeff * conf;
        if (!std::isfinite(sample_loss)) {
            throw TrainingError("policy loss is not finite at batch index " + std::to_string(b));
        }
        total += sample_loss;
        confidence_total += conf;

        if (grads == nullptr) continue;

        ActionVector d_mixed{};
        for (std::size_t k = 0; k < kActionDim; ++k) d_mixed[k] = -weights[b] * dll[k] * inv_b;

        std::vector<double> d_mix(m, 0.0);
        std::array<double, kActionDim> d_mu{};
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t k = 0; k < kActionDim; ++k) {
                d_mu[k] = mix[i] * d_mixed[k];
                d_mix[i] += mu[i][k] * d_mixed[k];
            }
            policy.sub_policy(i).backward(sub_cache[i], d_mu, grads->sub_policy_grads[i]);
        }

        std::vector<double> d_c(m, 0.0);
        if (gumbel) {
            double dot = 0.0;
            for (std::size_t i = 0; i < m; ++i) dot += mix[i] * d_mix[i];
            for (std::size_t i = 0; i < m; ++i) d_c[i] = mix[i] * (d_mix[i] - dot) / temp / c[i];
        } else {
            d_c = d_mix;
        }
        for (std::size_t i = 0; i < m; ++i) d_c[i] -= 2.0 * config.confidence_coeff * c[i] * inv_b;
        policy.factorizer().backward(f_cache, d_c, grads->factorizer_grad);
    }

    if (grads != nullptr) {
        double w_total = 0.0;
        for (double w : weights) w_total += w;
        grads->mean_advantage_weight = w_total * inv_b;
        grads->mean_confidence = confidence_total * inv_b;
    }
    return total * inv_b;
}

}  // namespace

PolicyLoss carl_policy_loss(const CascadePolicy& policy, const CriticPair& critics, std::span<const Sample> batch,
                            const TrainerConfig& config, std::mt19937_64* gumbel_rng) {
    const std::vector<double> w = advantage_weights(policy, critics, batch, config);
    PolicyLoss out;
    out.loss = evaluate_policy_loss(policy, batch, config, w, gumbel_rng, &out);
    return out;
}

double carl_policy_loss_value(const CascadePolicy& policy, const CriticPair&, std::span<const Sample> batch,
                              const TrainerConfig& config, std::span<const double> frozen_weights,
                              std::mt19937_64* gumbel_rng) {
    return evaluate_policy_loss(policy, batch, config, frozen_weights, gumbel_rng, nullptr);
}

double critic_update(CriticPair& critics, CriticOptimizers& optimizers, const CascadePolicy& target_policy,
                     std::span<const Sample> batch, const TrainerConfig& config) {
    if (batch.empty()) throw DomainError("critic update needs a non-empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<double> g1(critics.q1.param_count(), 0.0);
    std::vector<double> g2(critics.q2.param_count(), 0.0);
    ForwardCache cache;
    double loss1 = 0.0;
    double loss2 = 0.0;

    for (const Sample& s : batch) {
        double y = config.reward_scale * s.reward;
        if (!s.terminal) {
            const TsAction next = target_policy.act(s.next_state);
            y += config.gamma * critics.q_target_min(s.next_state, next.values);
        }
        const auto x = critic_input(s.state, s.action);

        const double e1 = critics.q1.forward(x, cache)[0] - y;
        loss1 += e1 * e1;
        const double d1 = 2.0 * e1 * inv_b;
        critics.q1.backward(cache, std::span<const double>(&d1, 1), g1);

        const double e2 = critics.q2.forward(x, cache)[0] - y;
        loss2 += e2 * e2;
        const double d2 = 2.0 * e2 * inv_b;
        critics.q2.backward(cache, std::span<const double>(&d2, 1), g2);
    }
    optimizers.q1.step(critics.q1.mutable_params(), g1);
    optimizers.q2.step(critics.q2.mutable_params(), g2);
    return 0.5 * (loss1 + loss2) * inv_b;
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0,1]");
    if (!target.same_architecture(online)) throw DomainError("target and online networks differ in architecture");
    std::span<const double> src = online.params();
    std::span<double> dst = target.mutable_params();
    if (tau == 1.0) {
        std::copy(src.begin(), src.end(), dst.begin());
        return;
    }
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
}

void target_update(CriticPair& critics, CascadePolicy& target_policy, const CascadePolicy& policy, double tau) {
    soft_update(critics.q1_target, critics.q1, tau);
    soft_update(critics.q2_target, critics.q2, tau);
    soft_update(target_policy.factorizer(), policy.factorizer(), tau);
    for (std::size_t i = 0; i < policy.size(); ++i) soft_update(target_policy.sub_policy(i), policy.sub_policy(i), tau);
}

std::string loss_curve_csv(std::span<const LossRecord> records) {
    std::string out = "step,policy_loss,critic_loss,mean_advantage_weight,mean_confidence\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{}\n", r.step, r.policy_loss, r.critic_loss, r.mean_advantage_weight,
                           r.mean_confidence);
    }
    return out;
}

OfflineTrainer::OfflineTrainer(CascadePolicy policy, CriticPair critics, TrainerConfig config, std::uint64_t seed)
    : policy_(std::move(policy)),
      target_policy_(policy_),
      critics_(std::move(critics)),
      config_(std::move(config)),
      rng_(seed),
      gumbel_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    config_.validate();
    const AdamConfig adam{.learning_rate = config_.learning_rate};
    factorizer_opt_ = Adam(policy_.factorizer().param_count(), adam);
    for (const auto& p : policy_.sub_policies()) sub_opts_.emplace_back(p.param_count(), adam);
    critic_opts_.q1 = Adam(critics_.q1.param_count(), adam);
    critic_opts_.q2 = Adam(critics_.q2.param_count(), adam);
}

std::vector<LossRecord> OfflineTrainer::run(std::span<const Sample> samples, std::size_t steps) {
    if (samples.empty()) throw ConfigError("cannot train on an empty dataset");
    std::vector<LossRecord> records;
    records.reserve(steps);
    std::vector<Sample> batch(config_.batch_size);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::vector<std::size_t> idx = sample_batch_indices(samples.size(), config_.batch_size, rng_);
        for (std::size_t b = 0; b < idx.size(); ++b) batch[b] = samples[idx[b]];

        LossRecord rec;
        rec.step = steps_done_;
        rec.critic_loss = critic_update(critics_, critic_opts_, target_policy_, batch, config_);

        PolicyLoss pl;
        try {
            pl = carl_policy_loss(policy_, critics_, batch, config_, &gumbel_rng_);
        } catch (const TrainingError& e) {
            throw TrainingError("step " + std::to_string(steps_done_) + ": " + e.what());
        }
        factorizer_opt_.step(policy_.factorizer().mutable_params(), pl.factorizer_grad);
        for (std::size_t i = 0; i < policy_.size(); ++i) {
            sub_opts_[i].step(policy_.sub_policy(i).mutable_params(), pl.sub_policy_grads[i]);
        }
        target_update(critics_, target_policy_, policy_, config_.tau);

        rec.policy_loss = pl.loss;
        rec.mean_advantage_weight = pl.mean_advantage_weight;
        rec.mean_confidence = pl.mean_confidence;
        records.push_back(rec);
        ++steps_done_;
    }
    return records;
}

TrainResult train_offline(CascadePolicy policy, CriticPair critics, const OfflineDataset& dataset,
                          const TrainerConfig& config, std::uint64_t seed) {
    dataset.check_trainable();
    const std::vector<Sample> samples = prepare_samples(dataset);
    OfflineTrainer trainer(std::move(policy), std::move(critics), config, seed);
    TrainResult out;
    out.losses = trainer.run(samples, config.gradient_steps);
    out.policy = trainer.policy();
    out.critics = trainer.critics();
    out.normalization = dataset.normalization;
    return out;
}

}  // namespace carl
