#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "carl/mdp.hpp"

namespace carl::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("carl_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline TsState random_state(std::mt19937_64& rng) {
    static const double freqs[] = {700, 1900, 2100, 2300, 2600};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> f(0, 4);
    std::uniform_int_distribution<int> d(0, 6);
    TsState s;
    s.serving_freq_mhz = freqs[f(rng)];
    s.target_freq_mhz = freqs[f(rng)];
    s.time_of_day = u(rng) * 0.999;
    s.day_of_week = d(rng);
    s.serving_prb_util = u(rng);
    s.target_prb_util = u(rng);
    s.serving_throughput_mbps = 100.0 * u(rng);
    s.target_throughput_mbps = 100.0 * u(rng);
    return s;
}

inline Transition random_transition(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(kActionFloor, 1.0);
    std::uniform_int_distribution<int> cell(0, 11);
    Transition t;
    t.state = random_state(rng);
    t.next_state = random_state(rng);
    for (double& a : t.action.values) a = u(rng);
    t.reward = 200.0 * u(rng);
    t.epoch_index = cell(rng);
    t.serving_cell_id = cell(rng);
    t.target_cell_id = cell(rng);
    t.terminal = cell(rng) == 0;
    return t;
}

inline std::vector<double> unit_vector(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

/// Central differences of f with respect to every entry of x.
inline std::vector<double> central_difference(std::vector<double>& x, const std::function<double()>& f,
                                              double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double keep = x[k];
        x[k] = keep + h;
        const double up = f();
        x[k] = keep - h;
        const double down = f();
        x[k] = keep;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor).
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = std::abs(a[k] - b[k]);
        worst = std::max(worst, d / std::max({std::abs(a[k]), std::abs(b[k]), floor}));
    }
    return worst;
}

}  // namespace carl::test
