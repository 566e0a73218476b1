#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "carl/trainer.hpp"
#include "reference.hpp"

namespace carl::test {

/// Two state clusters (early/low-load vs late/high-load). Each state is recorded twice: with its
/// cluster's optimal action (reward 1) and with a uniform random action (reward 0).
inline OfflineDataset two_cluster_bandit(std::uint64_t seed, int states) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jit(0.0, 0.03);
    std::uniform_real_distribution<double> u(kActionFloor, 1.0);
    OfflineDataset ds;
    for (int k = 0; k < states; ++k) {
        const bool a = k % 2 == 0;
        TsState s;
        s.serving_freq_mhz = 1900;
        s.target_freq_mhz = 2100;
        s.time_of_day = std::clamp((a ? 0.2 : 0.8) + jit(rng), 0.0, 0.99);
        s.day_of_week = 2;
        s.serving_prb_util = std::clamp((a ? 0.3 : 0.7) + jit(rng), 0.0, 1.0);
        s.target_prb_util = std::clamp(0.5 + jit(rng), 0.0, 1.0);
        s.serving_throughput_mbps = 60.0 + 100.0 * jit(rng);
        s.target_throughput_mbps = 40.0;
        Transition good;
        good.state = s;
        good.next_state = s;
        good.terminal = true;
        good.action.values.fill(a ? 0.2 : 0.8);
        good.reward = 1.0;
        Transition bad = good;
        for (double& v : bad.action.values) v = u(rng);
        bad.reward = 0.0;
        ds.transitions.push_back(good);
        ds.transitions.push_back(bad);
    }
    ds.refresh_normalization();
    return ds;
}

inline std::vector<Sample> random_samples(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> a(0.05, 0.95);
    std::vector<Sample> out(n);
    for (auto& s : out) {
        for (double& v : s.state) v = u(rng);
        for (double& v : s.next_state) v = u(rng);
        for (double& v : s.action) v = a(rng);
        s.reward = 10.0 * u(rng);
        s.terminal = u(rng) < 0.1;
    }
    return out;
}

/// Reference single-policy trainer seeded from the same initial networks as a CaRL M=1 trainer.
inline ref::AwacReference awac_reference(const CascadePolicy& policy, const CriticPair& critics,
                                         const TrainerConfig& c, std::uint64_t seed) {
    ref::AwacReference r;
    r.pi_sizes = policy.sub_policy(0).layer_sizes();
    r.q_sizes = critics.q1.layer_sizes();
    auto flat = [](const DenseNet& n) { return std::vector<double>(n.params().begin(), n.params().end()); };
    r.pi = r.pi_t = flat(policy.sub_policy(0));
    r.q1 = flat(critics.q1);
    r.q2 = flat(critics.q2);
    r.q1_t = flat(critics.q1_target);
    r.q2_t = flat(critics.q2_target);
    r.opt_pi.lr = r.opt_q1.lr = r.opt_q2.lr = c.learning_rate;
    r.lambda = c.lambda;
    r.gamma = c.gamma;
    r.tau = c.tau;
    r.clip = c.advantage_clip;
    r.reward_scale = c.reward_scale;
    r.sigma = c.gaussian_sigma;
    r.gaussian = c.likelihood == PolicyLikelihood::kGaussian;
    r.batch = c.batch_size;
    r.rng.seed(seed);
    return r;
}

inline std::vector<ref::RefSample> to_reference(const std::vector<Sample>& samples) {
    std::vector<ref::RefSample> out;
    for (const auto& s : samples) {
        out.push_back({std::vector<double>(s.state.begin(), s.state.end()),
                       std::vector<double>(s.action.begin(), s.action.end()),
                       std::vector<double>(s.next_state.begin(), s.next_state.end()), s.reward, s.terminal});
    }
    return out;
}

}  // namespace carl::test
