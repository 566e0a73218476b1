#include "carl/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "carl/error.hpp"

namespace carl {

namespace {

constexpr std::array<const char*, kStateDim> kFeatureNames = {
    "serving_freq_mhz",   "target_freq_mhz", "time_of_day",
    "day_of_week",        "serving_prb_util", "target_prb_util",
    "serving_throughput_mbps", "target_throughput_mbps",
};

constexpr std::array<const char*, kActionDim> kKnobNames = {
    "offloadAllowed", "maxRC", "RCHeadroom", "deltaRC", "rsrpCMLBFilter", "cio",
};

}  // namespace

const char* feature_name(std::size_t feature) { return kFeatureNames.at(feature); }
const char* knob_name(std::size_t knob) { return kKnobNames.at(knob); }

StateVector TsState::to_array() const {
    return {serving_freq_mhz,
            target_freq_mhz,
            time_of_day,
            static_cast<double>(day_of_week),
            serving_prb_util,
            target_prb_util,
            serving_throughput_mbps,
            target_throughput_mbps};
}

TsState TsState::from_array(const StateVector& v) {
    TsState s;
    s.serving_freq_mhz = v[kServingFreq];
    s.target_freq_mhz = v[kTargetFreq];
    s.time_of_day = v[kTimeOfDay];
    s.day_of_week = static_cast<int>(std::lround(v[kDayOfWeek]));
    s.serving_prb_util = v[kServingPrbUtil];
    s.target_prb_util = v[kTargetPrbUtil];
    s.serving_throughput_mbps = v[kServingThroughput];
    s.target_throughput_mbps = v[kTargetThroughput];
    return s;
}

void TsState::validate() const {
    const auto fail = [](std::size_t f, const char* why) {
        throw DomainError(std::string(feature_name(f)) + " " + why);
    };
    const StateVector v = to_array();
    for (std::size_t i = 0; i < kStateDim; ++i) {
        if (!std::isfinite(v[i])) fail(i, "is not finite");
    }
    if (time_of_day < 0.0 || time_of_day >= 1.0) fail(kTimeOfDay, "must lie in [0,1)");
    if (day_of_week < 0 || day_of_week > 6) fail(kDayOfWeek, "must lie in 0..6");
    if (serving_prb_util < 0.0 || serving_prb_util > 1.0) fail(kServingPrbUtil, "must lie in [0,1]");
    if (target_prb_util < 0.0 || target_prb_util > 1.0) fail(kTargetPrbUtil, "must lie in [0,1]");
    if (serving_throughput_mbps < 0.0) fail(kServingThroughput, "must be nonnegative");
    if (target_throughput_mbps < 0.0) fail(kTargetThroughput, "must be nonnegative");
    if (serving_freq_mhz <= 0.0) fail(kServingFreq, "must be positive");
    if (target_freq_mhz <= 0.0) fail(kTargetFreq, "must be positive");
}

TsAction TsAction::clamped(const ActionVector& raw) {
    TsAction a;
    for (std::size_t i = 0; i < kActionDim; ++i) {
        a.values[i] = std::clamp(raw[i], kActionFloor, 1.0);
    }
    return a;
}

void TsAction::validate() const {
    for (std::size_t i = 0; i < kActionDim; ++i) {
        if (!(values[i] > 0.0 && values[i] <= 1.0)) {
            throw DomainError(std::string(knob_name(i)) + " must lie in (0,1]");
        }
    }
}

StateVector normalize_state(const TsState& raw, const NormalizationStats& stats) {
    if (!stats.complete()) {
        throw ConfigError("normalization stats must cover all 8 features");
    }
    const StateVector v = raw.to_array();
    StateVector out{};
    for (std::size_t i = 0; i < kStateDim; ++i) {
        const double lo = stats.min[i];
        const double hi = stats.max[i];
        if (lo > hi) {
            throw ConfigError(std::string("normalization min > max for ") + feature_name(i));
        }
        out[i] = hi == lo ? 0.5 : std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    }
    return out;
}

NormalizationStats compute_normalization(std::span<const Transition> transitions) {
    NormalizationStats stats;
    stats.min.assign(kStateDim, 0.0);
    stats.max.assign(kStateDim, 0.0);
    bool first = true;
    const auto absorb = [&](const TsState& s) {
        const StateVector v = s.to_array();
        for (std::size_t i = 0; i < kStateDim; ++i) {
            if (first) {
                stats.min[i] = stats.max[i] = v[i];
            } else {
                stats.min[i] = std::min(stats.min[i], v[i]);
                stats.max[i] = std::max(stats.max[i], v[i]);
            }
        }
        first = false;
    };
    for (const auto& t : transitions) {
        absorb(t.state);
        absorb(t.next_state);
    }
    stats.min[kDayOfWeek] = 0.0;
    stats.max[kDayOfWeek] = 6.0;
    return stats;
}

double compute_reward(double downlink_volume_mbits, double transmission_time_s) {
    if (!(transmission_time_s > 0.0)) {
        throw DomainError("transmission time must be positive");
    }
    if (downlink_volume_mbits < 0.0) {
        throw DomainError("downlink volume must be nonnegative");
    }
    return downlink_volume_mbits / transmission_time_s;
}

void OfflineDataset::refresh_normalization() { normalization = compute_normalization(transitions); }

void OfflineDataset::check_trainable() const {
    if (transitions.empty()) throw ConfigError("dataset is empty");
    if (!normalization.complete()) throw ConfigError("dataset has no normalization stats");
    for (std::size_t k = 0; k < transitions.size(); ++k) {
        for (const TsState* s : {&transitions[k].state, &transitions[k].next_state}) {
            const StateVector v = s->to_array();
            for (std::size_t i = 0; i < kStateDim; ++i) {
                if (v[i] < normalization.min[i] || v[i] > normalization.max[i]) {
                    throw ConfigError("transition " + std::to_string(k) + " lies outside normalization range of " +
                                      feature_name(i));
                }
            }
        }
    }
}

}  // namespace carl
