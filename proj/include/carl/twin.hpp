#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "carl/mdp.hpp"

namespace carl::twin {

struct Position {
    double x = 0.0;
    double y = 0.0;
};

double distance(Position a, Position b);

struct Cell {
    int cell_id = 0;
    int site_id = 0;
    int sector_id = 0;
    double carrier_freq_mhz = 0.0;
    double bandwidth_mhz = 10.0;
    int prb_count = 50;
    /// Reference-signal power per resource element.
    double tx_power_dbm = 18.0;
    Position position;
};

/// Log-distance path loss: PL(d) = pl0_db + 10 * exponent * log10(d / reference_distance_m).
struct PropagationModel {
    double pl0_db = 38.0;
    double exponent = 3.5;
    double reference_distance_m = 1.0;
};

/// Received reference power in dBm; distances below 1 m are clamped to 1 m.
double rsrp_dbm(const Cell& cell, const PropagationModel& model, Position ue);

/// Per-frequency-pair A5 constants.
struct A5Thresholds {
    double hys_thres3_inter_freq_db = 2.0;
    double thres3_inter_freq_dbm = -100.0;
    double thres3a_inter_freq_dbm = -110.0;
};

/// Both A5 inequalities, strict: serv + hys < thres3 and target - hys + cio > thres3a.
bool a5_triggered(double rsrp_serv_dbm, double rsrp_target_dbm, const A5Thresholds& thresholds, double cio_db);

/// Domain-unit knobs of one ordered (serving, target) pair.
struct PairKnobs {
    bool offload_allowed = false;
    double max_rc = 0.3;
    double rc_headroom = 0.5;
    double delta_rc = 0.2;
    double rsrp_cmlb_filter_dbm = -110.0;
    double cio_db = 0.0;

    bool operator==(const PairKnobs&) const = default;
};

/// offloadAllowed and RC_serv < maxRC and RC_target > RCHeadroom and RC_target - RC_serv >= deltaRC
/// and RSRP_target >= rsrpCMLBFilter.
bool cmlb_eligible(const PairKnobs& knobs, double rc_serving, double rc_target, double rsrp_target_dbm);

/// Affine map normalized (0,1] <-> domain units: value = lo + (hi - lo) * x.
struct KnobRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct KnobMaps {
    std::array<KnobRange, kActionDim> ranges{{
        {0.0, 1.0},       // offloadAllowed (threshold 0.5)
        {0.0, 1.0},       // maxRC fraction
        {0.0, 1.0},       // RCHeadroom fraction
        {0.0, 1.0},       // deltaRC fraction
        {-140.0, -80.0},  // rsrpCMLBFilter dBm
        {-10.0, 10.0},    // cio dB
    }};

    PairKnobs to_knobs(const TsAction& action) const;
    /// Inverse map, clamped into [kActionFloor, 1]. offloadAllowed maps to 1 or kActionFloor.
    TsAction to_action(const PairKnobs& knobs) const;
};

class KnobTable {
public:
    void set(int serving, int target, const PairKnobs& knobs) { pairs_[{serving, target}] = knobs; }
    /// Throws ConfigError if the pair has no entry.
    const PairKnobs& at(int serving, int target) const;
    bool contains(int serving, int target) const { return pairs_.count({serving, target}) != 0; }
    std::size_t size() const { return pairs_.size(); }

    void set_thresholds(double serving_freq_mhz, double target_freq_mhz, const A5Thresholds& t);
    void set_default_thresholds(const A5Thresholds& t) { default_thresholds_ = t; }
    const A5Thresholds& thresholds(double serving_freq_mhz, double target_freq_mhz) const;

    const std::map<std::pair<int, int>, PairKnobs>& entries() const { return pairs_; }

private:
    std::map<std::pair<int, int>, PairKnobs> pairs_;
    std::map<std::pair<long long, long long>, A5Thresholds> freq_thresholds_;
    A5Thresholds default_thresholds_;
};

/// IMLB reselection weights: w_i = (1 - util_i + eps) / sum_j (1 - util_j + eps).
std::vector<double> imlb_weights(std::span<const double> utilizations, double eps = 0.01);

/// Offered load of a UE group. mean_off_s == 0 means always on.
struct DemandProfile {
    double rate_mbps = 1.0;
    double mean_on_s = 60.0;
    double mean_off_s = 0.0;
    /// Rate multiplier 1 + amplitude * cos(2*pi*(tod - peak_tod)).
    double diurnal_amplitude = 0.0;
    double diurnal_peak_tod = 0.75;
};

struct UeGroup {
    int count = 0;
    Position center;
    double min_radius_m = 30.0;
    double max_radius_m = 500.0;
    /// Cell every UE of the group initially attaches to; -1 selects by best sector and IMLB.
    int camp_cell = -1;
    double speed_mps = 1.0;
    DemandProfile demand;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    double epoch_s = 60.0;
    int horizon_epochs = 8;
    int warmup_epochs = 1;
    double start_time_of_day = 0.5;
    int start_day_of_week = 2;
    int check_period_ms = 1000;
    int ho_interruption_ms = 50;
    double noise_figure_db = 7.0;
    double interference_factor = 0.5;
    double se_cap = 6.0;
    double idle_inactivity_s = 10.0;
    bool intra_sector_only = false;

    std::vector<Cell> cells;
    std::map<long long, PropagationModel> propagation;  // keyed by llround(freq_mhz)
    A5Thresholds default_a5;
    std::vector<std::tuple<double, double, A5Thresholds>> a5_overrides;
    KnobMaps knob_maps;
    PairKnobs baseline_knobs;
    std::vector<UeGroup> ue_groups;

    const PropagationModel& propagation_for(double freq_mhz) const;
    int total_ues() const;
    /// Throws ConfigError on inconsistent cells, groups or timing.
    void validate() const;
};

ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioConfig& config);

/// Ordered neighbor pairs evaluated for steering.
std::vector<std::pair<int, int>> neighbor_pairs(const ScenarioConfig& config);

/// Knob table holding the same knobs for every neighbor pair.
KnobTable uniform_knob_table(const ScenarioConfig& config, const PairKnobs& knobs);

enum class RrcMode { kConnected, kIdle };

struct UeState {
    int ue_id = 0;
    std::size_t group = 0;
    Position position;
    Position waypoint;
    double speed_mps = 0.0;
    RrcMode mode = RrcMode::kIdle;
    /// Index into cells: serving cell when connected, camped cell when idle.
    std::size_t cell = 0;
    double buffer_mbits = 0.0;
    bool traffic_on = false;
    double traffic_timer_s = 0.0;
    double inactive_s = 0.0;
    std::int64_t blocked_until_tti = 0;
    std::int64_t last_ho_epoch = -1;
    int ho_count = 0;
    double offered_mbits = 0.0;
    double served_mbits = 0.0;
    std::vector<double> rsrp_dbm;
    double spectral_efficiency = 0.0;
    double rate_mbits_per_tti = 0.0;
};

struct CellRuntime {
    double window_util = 0.0;
    double epoch_util = 0.0;
    std::int64_t prb_used_window = 0;
    std::int64_t prb_used_epoch = 0;
    double served_mbits_epoch = 0.0;
    double offered_mbits_epoch = 0.0;
    double connected_sum = 0.0;
    int connected_samples = 0;
    int ho_out = 0;
    int ho_in = 0;
    int max_prbs_in_tti = 0;
    std::size_t rr_offset = 0;
};

struct TtiAllocation {
    std::vector<int> prbs;
    std::vector<double> served_mbits;
};

struct CellKpi {
    int cell_id = 0;
    double prb_util = 0.0;
    double rc = 1.0;
    double connected_ues = 0.0;
    double served_mbits = 0.0;
    double offered_mbits = 0.0;
    double throughput_mbps = 0.0;
    int ho_out = 0;
    int ho_in = 0;
    int max_prbs_in_tti = 0;
    int prb_count = 0;
};

struct EpochReport {
    int epoch = 0;
    double time_of_day = 0.0;
    int day_of_week = 0;
    std::vector<CellKpi> cells;
    int handovers = 0;
};

struct PairObservation {
    int serving_cell = 0;
    int target_cell = 0;
    TsState state;
};

/// Deterministic desk-scale multi-cell RAN.
class Twin {
public:
    explicit Twin(ScenarioConfig config);

    const ScenarioConfig& config() const { return config_; }
    const std::vector<UeState>& ues() const { return ues_; }
    std::vector<UeState>& mutable_ues() { return ues_; }
    const std::vector<CellRuntime>& cell_runtime() const { return cells_; }
    std::size_t cell_index(int cell_id) const;

    std::int64_t tti() const { return tti_; }
    int epoch() const { return epoch_; }
    double time_of_day() const;
    int day_of_week() const;

    /// Allocates one TTI of PRBs round-robin across backlogged UEs of every cell and advances the clock.
    const TtiAllocation& schedule_tti();

    /// Advances one control interval with the given knobs.
    EpochReport step_epoch(const KnobTable& knobs);

    /// Current per-cell state without advancing; used before the first epoch.
    EpochReport snapshot() const;

    /// One observation per ordered neighbor pair, built from an epoch report.
    std::vector<PairObservation> pair_observations(const EpochReport& report) const;

    /// (source cell, target cell, ue) triples currently passing cmlb_eligible.
    std::vector<std::array<int, 3>> cmlb_eligible_triples(const KnobTable& knobs) const;

    /// Rebuilds per-cell connected lists and spectral efficiencies after external state edits.
    void refresh();

private:
    void measurement_step(const KnobTable& knobs, double dt_s);
    void handover_checks(const KnobTable& knobs);
    void idle_reselection();
    void update_radio(UeState& ue) const;
    void arrive_demand();
    std::size_t best_cell(const UeState& ue) const;
    std::vector<std::size_t> sector_cells(std::size_t cell) const;
    double demand_rate(const UeState& ue) const;

    ScenarioConfig config_;
    std::vector<UeState> ues_;
    std::vector<CellRuntime> cells_;
    std::vector<std::vector<std::size_t>> cell_ues_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::vector<std::size_t> active_;
    std::vector<std::size_t> backlog_;
    TtiAllocation alloc_;
    std::mt19937_64 rng_;
    std::int64_t tti_ = 0;
    int epoch_ = 0;
    double noise_mw_ = 0.0;
};

/// Policy-side view of the controller interface.
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// One normalized action per observation.
    virtual std::vector<TsAction> decide(int epoch, std::span<const PairObservation> observations) = 0;
    /// Transitions completed by the last epoch; online learners use them.
    virtual void observe(std::span<const Transition> transitions) { (void)transitions; }
};

struct RunResult {
    std::vector<EpochReport> epochs;
    std::vector<Transition> transitions;
    std::vector<int> ue_handovers;
    double offered_mbits = 0.0;
    double served_mbits = 0.0;

    /// Mean over epochs of the summed cell throughput.
    double mean_aggregate_throughput() const;
    int total_handovers() const;
    /// Fraction of UEs with at most `limit` HOs over the run.
    double fraction_ues_with_at_most(int limit) const;
};

/// Runs warmup epochs with the baseline knobs, then the horizon under the controller.
/// Exceptions from the controller are rethrown as Error naming the epoch.
RunResult run_scenario(const ScenarioConfig& config, Controller& controller);

/// Columns: epoch,cell_id,prb_util,rc,connected_ues,served_mbits,throughput_mbps,ho_out,ho_in
std::string kpi_csv(const RunResult& result);
/// Columns: ue_id,handovers
std::string ue_handover_csv(const RunResult& result);

/// Builds a dataset from logged transitions.
OfflineDataset to_dataset(std::vector<Transition> transitions);

}  // namespace carl::twin
