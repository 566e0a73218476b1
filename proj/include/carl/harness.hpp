#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "carl/cascade_policy.hpp"
#include "carl/checkpoint.hpp"
#include "carl/controllers.hpp"
#include "carl/mdp.hpp"
#include "carl/trainer.hpp"
#include "carl/twin.hpp"

namespace carl::harness {

namespace fs = std::filesystem;

/// Scenario file path or preset name (a name without a path separator or extension that matches a preset).
twin::ScenarioConfig resolve_scenario(const std::string& ref, const fs::path& base_dir = {});

struct CollectOptions {
    int runs = 1;
    double exploration_noise = 0.05;
    /// Varies seed, start time, UE population and initial knobs between runs.
    bool diversify = false;
    std::optional<int> epochs;
};

/// Variant `index` of a base scenario used for diversified collection. Fills the heuristic's starting knobs.
twin::ScenarioConfig collection_variant(const twin::ScenarioConfig& base, int index, std::mt19937_64& rng,
                                        twin::PairKnobs& initial_knobs);

/// Runs the exploratory heuristic `runs` times and pools the transitions.
OfflineDataset collect_dataset(const twin::ScenarioConfig& scenario, const CollectOptions& options,
                               std::uint64_t seed);

/// Trainer config plus the policy shape. Read from the same key=value file.
struct TrainSpec {
    TrainerConfig trainer;
    std::size_t sub_policies = 2;
    MixingMode mixing = MixingMode::kSoft;
    double temperature = 1.0;
    PolicyArchitecture architecture;
    std::uint64_t seed = 1;
};

TrainSpec parse_train_spec(const std::string& text);
TrainSpec load_train_spec(const fs::path& path);

struct TrainOutcome {
    Checkpoint checkpoint;
    std::vector<LossRecord> losses;
};

/// Initializes a fresh policy and critics from `spec.seed` and trains on the dataset.
TrainOutcome train_checkpoint(const OfflineDataset& dataset, const TrainSpec& spec);

struct ControllerSpec {
    std::string name;
    /// baseline | heuristic | qtable | policy | online_carl
    std::string type;
    std::string checkpoint;
    std::string dataset;
    double exploration_noise = 0.0;
    /// Online CaRL settings.
    std::string train_config;
    int warmup_epochs = 10;
    std::size_t steps_per_epoch = 200;
};

struct ExperimentPlan {
    fs::path base_dir;
    fs::path output_dir = "results";
    std::vector<std::string> scenarios;
    std::vector<ControllerSpec> controllers;
    std::vector<std::uint64_t> seeds{1};
    std::optional<int> epochs;
    bool plots = true;
    bool feature_importance = true;

    /// Optional pipeline stages for `run`.
    std::optional<std::string> collect_scenario;
    CollectOptions collect;
    std::uint64_t collect_seed = 1;
    std::optional<std::string> train_config;
    std::optional<std::uint64_t> train_seed;

    /// Throws ConfigError when a list is empty or a controller is malformed.
    void validate() const;
};

ExperimentPlan parse_plan(const std::string& json_text, const fs::path& base_dir);
ExperimentPlan load_plan(const fs::path& path);

/// Path fields may use @dataset / @checkpoint to reference the pipeline outputs of `run`.
fs::path resolve_artifact(const std::string& ref, const ExperimentPlan& plan);

std::unique_ptr<twin::Controller> make_controller(const ControllerSpec& spec, const ExperimentPlan& plan,
                                                  const twin::ScenarioConfig& scenario, std::uint64_t seed);

/// HO-count bins per UE: 0-5, 6-10, 11+.
std::array<int, 3> handover_histogram(const std::vector<int>& per_ue);

struct SummaryRow {
    std::string scenario;
    std::string controller;
    std::size_t seeds = 0;
    double mean_throughput_mbps = 0.0;
    double mean_total_handovers = 0.0;
    /// Relative to the baseline controller of the same scenario; NaN when there is none.
    double throughput_pct = 0.0;
    double handover_pct = 0.0;
    std::array<int, 3> histogram{};
};

std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(const std::string& text);
/// Percentages against the "baseline" row of each scenario.
void normalize_to_baseline(std::vector<SummaryRow>& rows);

/// Mean aggregate throughput and total HOs from a KPI CSV; histogram from a per-UE HO CSV.
struct KpiTotals {
    double mean_aggregate_throughput = 0.0;
    int total_handovers = 0;
    int epochs = 0;
};
KpiTotals totals_from_kpi_csv(const std::string& text);
std::vector<int> handovers_from_csv(const std::string& text);

std::vector<SummaryRow> evaluate(const ExperimentPlan& plan);

struct ReportOutcome {
    std::vector<std::string> gaps;
    std::vector<fs::path> files;
};

/// Markdown report and SVG charts from an evaluation directory. Missing inputs are flagged, not fatal.
ReportOutcome report(const fs::path& results_dir);

struct CheckOutcome {
    std::size_t rows_checked = 0;
    std::vector<std::string> mismatches;
};

/// Recomputes summary.csv from the per-epoch CSVs.
CheckOutcome check(const fs::path& results_dir);

struct OracleGrid {
    std::vector<double> max_rc{0.2, 0.5, 0.8};
    std::vector<double> rc_headroom{0.1, 0.3, 0.5};
    std::vector<double> delta_rc{0.0, 0.1, 0.2, 0.4};
    std::vector<double> rsrp_cmlb_filter_dbm{-140.0, -120.0, -110.0, -100.0};
    std::vector<double> cio_db{-6.0, -3.0, 0.0, 3.0, 6.0, 10.0};
};

struct OracleResult {
    twin::PairKnobs best_knobs;
    double best_throughput = 0.0;
    double baseline_throughput = 0.0;
    std::size_t evaluated = 0;
};

/// Exhaustive search over constant knob settings (offloadAllowed on) applied to every pair.
OracleResult grid_search_oracle(const twin::ScenarioConfig& scenario, const OracleGrid& grid);
std::string oracle_to_json_text(const OracleResult& result, const std::string& scenario_name);
OracleResult oracle_from_json_text(const std::string& text);

/// Full pipeline from one plan: collect, train, evaluate, report.
std::vector<SummaryRow> run_plan(const ExperimentPlan& plan);

}  // namespace carl::harness
