#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace carl {

inline constexpr std::size_t kStateDim = 8;
inline constexpr std::size_t kActionDim = 6;

/// Smallest admissible normalized knob value. Actions live in [kActionFloor, 1].
inline constexpr double kActionFloor = 1e-3;

using StateVector = std::array<double, kStateDim>;
using ActionVector = std::array<double, kActionDim>;

enum StateFeature : std::size_t {
    kServingFreq = 0,
    kTargetFreq,
    kTimeOfDay,
    kDayOfWeek,
    kServingPrbUtil,
    kTargetPrbUtil,
    kServingThroughput,
    kTargetThroughput,
};

enum Knob : std::size_t {
    kOffloadAllowed = 0,
    kMaxRc,
    kRcHeadroom,
    kDeltaRc,
    kRsrpCmlbFilter,
    kCio,
};

const char* feature_name(std::size_t feature);
const char* knob_name(std::size_t knob);

/// Raw (domain-unit) observation of one serving/target cell pair.
struct TsState {
    double serving_freq_mhz = 0.0;
    double target_freq_mhz = 0.0;
    double time_of_day = 0.0;
    int day_of_week = 0;
    double serving_prb_util = 0.0;
    double target_prb_util = 0.0;
    double serving_throughput_mbps = 0.0;
    double target_throughput_mbps = 0.0;

    StateVector to_array() const;
    static TsState from_array(const StateVector& v);

    /// Throws DomainError naming the offending field.
    void validate() const;

    bool operator==(const TsState&) const = default;
};

/// Normalized control knobs emitted by a policy for one cell pair.
struct TsAction {
    ActionVector values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool offload_allowed() const { return values[kOffloadAllowed] >= 0.5; }

    /// Clamps every component into [kActionFloor, 1].
    static TsAction clamped(const ActionVector& raw);
    void validate() const;

    bool operator==(const TsAction&) const = default;
};

struct Transition {
    TsState state;
    TsAction action;
    double reward = 0.0;
    TsState next_state;
    std::int64_t epoch_index = 0;
    std::int64_t serving_cell_id = 0;
    std::int64_t target_cell_id = 0;
    /// Last transition of a twin episode; bootstrap is masked for it.
    bool terminal = false;

    bool operator==(const Transition&) const = default;
};

struct NormalizationStats {
    std::vector<double> min;
    std::vector<double> max;

    bool complete() const { return min.size() == kStateDim && max.size() == kStateDim; }
    bool operator==(const NormalizationStats&) const = default;
};

/// Maps raw features into [0,1] with the dataset min/max. Degenerate features map to 0.5.
StateVector normalize_state(const TsState& raw, const NormalizationStats& stats);

/// Computes per-feature bounds over states and next states. day_of_week is pinned to [0,6].
NormalizationStats compute_normalization(std::span<const Transition> transitions);

/// Cell-level throughput in Mbps from a downlink volume (Mbits) and a transmission time (s).
double compute_reward(double downlink_volume_mbits, double transmission_time_s);

struct OfflineDataset {
    std::vector<Transition> transitions;
    NormalizationStats normalization;
    /// Set when a read produced no records.
    bool empty_warning = false;

    bool empty() const { return transitions.empty(); }
    std::size_t size() const { return transitions.size(); }

    /// Recomputes normalization from the current transitions.
    void refresh_normalization();
    /// Throws ConfigError if the dataset is empty or a transition falls outside the stats.
    void check_trainable() const;
};

inline constexpr const char* kTransitionsSchema = "carl-transitions-v1";

void write_dataset(const std::filesystem::path& path, const OfflineDataset& dataset);
OfflineDataset read_dataset(const std::filesystem::path& path);

/// Line-level codecs, exposed for the new-state files used by transfer.
std::string encode_transition(const Transition& t);
Transition decode_transition(const std::string& line, std::size_t line_number);

}  // namespace carl
