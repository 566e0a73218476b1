#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "carl/cascade_policy.hpp"
#include "carl/mdp.hpp"
#include "carl/trainer.hpp"
#include "carl/twin.hpp"

namespace carl {

/// Emits the same golden-value action for every pair.
class StaticController : public twin::Controller {
public:
    explicit StaticController(TsAction action, std::string name = "baseline")
        : action_(action), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    std::vector<TsAction> decide(int epoch, std::span<const twin::PairObservation> observations) override;

private:
    TsAction action_;
    std::string name_;
};

struct HeuristicConfig {
    double margin = 0.1;
    double max_rc_step = 0.02;
    double rc_headroom_step = 0.02;
    double cio_step_db = 1.0;
    /// Half-width of uniform noise added to each emitted normalized knob; 0 disables it.
    double exploration_noise = 0.0;
};

/// One rule application. Knobs are clamped to the ranges of `maps` afterwards.
twin::PairKnobs heuristic_step(const twin::PairKnobs& prev, double util_serving, double util_target,
                               const HeuristicConfig& config, const twin::KnobMaps& maps);

/// Per-pair step adjuster starting from the scenario's baseline knobs.
class HeuristicController : public twin::Controller {
public:
    HeuristicController(twin::KnobMaps maps, twin::PairKnobs initial, HeuristicConfig config, std::uint64_t seed);
    std::string name() const override { return "heuristic"; }
    std::vector<TsAction> decide(int epoch, std::span<const twin::PairObservation> observations) override;

    const std::map<std::pair<int, int>, twin::PairKnobs>& knobs() const { return knobs_; }

private:
    twin::KnobMaps maps_;
    twin::PairKnobs initial_;
    HeuristicConfig config_;
    std::map<std::pair<int, int>, twin::PairKnobs> knobs_;
    std::mt19937_64 rng_;
};

/// Bin count per state feature; 0 means exact-match on the raw category value.
using BinSpec = std::array<std::size_t, kStateDim>;

/// Frequencies and day_of_week exact, 8 bins elsewhere.
BinSpec default_bins();

using QKey = std::array<long long, kStateDim>;

struct QEntry {
    TsAction action;
    double reward = 0.0;
};

/// Lookup table keyed on discretized states; returns stored dataset actions verbatim.
class QTable {
public:
    QTable() = default;
    QTable(BinSpec bins, NormalizationStats normalization, TsAction fallback);

    /// Keeps the highest-reward transition's action per key. Throws ConfigError on an empty dataset.
    static QTable build(const OfflineDataset& dataset, const BinSpec& bins, const TsAction& fallback);

    QKey key(const TsState& state) const;
    /// Stored action on an exact key hit, fallback (and a counted miss) otherwise.
    TsAction act(const TsState& state);

    void insert(const QKey& key, const TsAction& action, double reward);
    const std::map<QKey, QEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t lookups() const { return lookups_; }
    std::size_t misses() const { return misses_; }
    double miss_rate() const { return lookups_ == 0 ? 0.0 : static_cast<double>(misses_) / lookups_; }
    const TsAction& fallback() const { return fallback_; }
    const BinSpec& bins() const { return bins_; }
    const NormalizationStats& normalization() const { return normalization_; }

    void save(const std::filesystem::path& path) const;
    static QTable load(const std::filesystem::path& path);

private:
    BinSpec bins_{};
    NormalizationStats normalization_;
    TsAction fallback_;
    std::map<QKey, QEntry> entries_;
    std::size_t lookups_ = 0;
    std::size_t misses_ = 0;
};

class QTableController : public twin::Controller {
public:
    explicit QTableController(QTable table) : table_(std::move(table)) {}
    std::string name() const override { return "qtable"; }
    std::vector<TsAction> decide(int epoch, std::span<const twin::PairObservation> observations) override;
    const QTable& table() const { return table_; }

private:
    QTable table_;
};

/// Deploys a cascade policy; hard-gumbel policies act through the argmax sub-policy.
class PolicyController : public twin::Controller {
public:
    PolicyController(CascadePolicy policy, NormalizationStats normalization, std::string name = "carl");
    std::string name() const override { return name_; }
    std::vector<TsAction> decide(int epoch, std::span<const twin::PairObservation> observations) override;
    const CascadePolicy& policy() const { return policy_; }

private:
    CascadePolicy policy_;
    NormalizationStats normalization_;
    std::string name_;
};

/// CaRL with a single sub-policy.
CascadePolicy make_ddpg_policy(std::uint64_t seed, const PolicyArchitecture& arch = {});

struct OnlineCarlConfig {
    std::size_t sub_policies = 2;
    int warmup_epochs = 10;
    std::size_t steps_per_epoch = 200;
    TrainerConfig trainer;
    PolicyArchitecture architecture;
};

/// Learns from scratch on transitions streamed from the live twin.
/// Random actions during warmup, then the current policy after each streaming update.
class OnlineCarlController : public twin::Controller {
public:
    OnlineCarlController(OnlineCarlConfig config, std::uint64_t seed);
    std::string name() const override { return "online_carl"; }
    std::vector<TsAction> decide(int epoch, std::span<const twin::PairObservation> observations) override;
    void observe(std::span<const Transition> transitions) override;

    const OfflineDataset& collected() const { return dataset_; }
    const CascadePolicy& policy() const;

private:
    OnlineCarlConfig config_;
    std::mt19937_64 rng_;
    OfflineDataset dataset_;
    std::unique_ptr<OfflineTrainer> trainer_;
    std::uint64_t seed_;
    int epochs_seen_ = 0;
    CascadePolicy initial_;
};

}  // namespace carl
