#include "carl/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "carl/error.hpp"
#include "carl/io_util.hpp"

namespace carl {

std::vector<TsAction> StaticController::decide(int, std::span<const twin::PairObservation> observations) {
    return std::vector<TsAction>(observations.size(), action_);
}

twin::PairKnobs heuristic_step(const twin::PairKnobs& prev, double util_serving, double util_target,
                               const HeuristicConfig& config, const twin::KnobMaps& maps) {
    twin::PairKnobs next = prev;
    double dir = 0.0;
    if (util_serving > util_target + config.margin) {
        dir = 1.0;
    } else if (util_serving < util_target - config.margin) {
        dir = -1.0;
    }
    if (dir == 0.0) return next;
    next.offload_allowed = dir > 0.0;
    next.max_rc += dir * config.max_rc_step;
    next.rc_headroom -= dir * config.rc_headroom_step;
    next.cio_db += dir * config.cio_step_db;
    auto clamp = [&](double v, std::size_t k) { return std::clamp(v, maps.ranges[k].lo, maps.ranges[k].hi); };
    next.max_rc = clamp(next.max_rc, kMaxRc);
    next.rc_headroom = clamp(next.rc_headroom, kRcHeadroom);
    next.cio_db = clamp(next.cio_db, kCio);
    return next;
}

HeuristicController::HeuristicController(twin::KnobMaps maps, twin::PairKnobs initial, HeuristicConfig config,
                                         std::uint64_t seed)
    : maps_(maps), initial_(initial), config_(config), rng_(seed) {
    if (config_.margin < 0.0 || config_.exploration_noise < 0.0) {
        throw ConfigError("heuristic margin and exploration noise must be nonnegative");
    }
}

std::vector<TsAction> HeuristicController::decide(int, std::span<const twin::PairObservation> observations) {
    std::vector<TsAction> out;
    out.reserve(observations.size());
    std::uniform_real_distribution<double> noise(-config_.exploration_noise, config_.exploration_noise);
    for (const auto& o : observations) {
        auto [it, inserted] = knobs_.try_emplace({o.serving_cell, o.target_cell}, initial_);
        it->second = heuristic_step(it->second, o.state.serving_prb_util, o.state.target_prb_util, config_, maps_);
        TsAction a = maps_.to_action(it->second);
        if (config_.exploration_noise > 0.0) {
            ActionVector raw = a.values;
            for (double& v : raw) v += noise(rng_);
            a = TsAction::clamped(raw);
        }
        out.push_back(a);
    }
    return out;
}

BinSpec default_bins() { return {0, 0, 8, 0, 8, 8, 8, 8}; }

QTable::QTable(BinSpec bins, NormalizationStats normalization, TsAction fallback)
    : bins_(bins), normalization_(std::move(normalization)), fallback_(fallback) {
    if (!normalization_.complete()) throw ConfigError("q-table needs normalization stats for 8 features");
    fallback_.validate();
}

QTable QTable::build(const OfflineDataset& dataset, const BinSpec& bins, const TsAction& fallback) {
    if (dataset.empty()) throw ConfigError("cannot build a q-table from an empty dataset");
    NormalizationStats stats = dataset.normalization.complete() ? dataset.normalization
                                                                : compute_normalization(dataset.transitions);
    QTable table(bins, stats, fallback);
    for (const Transition& t : dataset.transitions) table.insert(table.key(t.state), t.action, t.reward);
    return table;
}

QKey QTable::key(const TsState& state) const {
    const StateVector raw = state.to_array();
    const StateVector norm = normalize_state(state, normalization_);
    QKey k{};
    for (std::size_t i = 0; i < kStateDim; ++i) {
        if (bins_[i] == 0) {
            k[i] = std::llround(raw[i]);
        } else {
            const auto b = static_cast<long long>(std::floor(norm[i] * static_cast<double>(bins_[i])));
            k[i] = std::min(b, static_cast<long long>(bins_[i]) - 1);
        }
    }
    return k;
}

void QTable::insert(const QKey& key, const TsAction& action, double reward) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        entries_.emplace(key, QEntry{action, reward});
    } else if (reward > it->second.reward) {
        it->second = QEntry{action, reward};
    }
}

TsAction QTable::act(const TsState& state) {
    ++lookups_;
    auto it = entries_.find(key(state));
    if (it == entries_.end()) {
        ++misses_;
        return fallback_;
    }
    return it->second.action;
}

void QTable::save(const std::filesystem::path& path) const {
    std::string out = "# carl-qtable-v1\n";
    out += "bins";
    for (auto b : bins_) out += fmt::format(" {}", b);
    out += "\nnorm_min";
    for (double v : normalization_.min) out += fmt::format(" {}", v);
    out += "\nnorm_max";
    for (double v : normalization_.max) out += fmt::format(" {}", v);
    out += "\nfallback";
    for (double v : fallback_.values) out += fmt::format(" {}", v);
    out += "\n";
    for (const auto& [k, e] : entries_) {
        out += "entry";
        for (auto v : k) out += fmt::format(" {}", v);
        out += fmt::format(" reward {} action", e.reward);
        for (double v : e.action.values) out += fmt::format(" {}", v);
        out += "\n";
    }
    write_file_atomic(path, out);
}

QTable QTable::load(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    BinSpec bins{};
    NormalizationStats stats;
    ActionVector fallback{};
    std::vector<std::pair<QKey, QEntry>> rows;
    bool header = false;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(fmt::format("{}:{}: {}", path.string(), line_no, what));
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line == "# carl-qtable-v1") header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "bins") {
            for (auto& b : bins) ls >> b;
        } else if (tag == "norm_min" || tag == "norm_max") {
            auto& dst = tag == "norm_min" ? stats.min : stats.max;
            dst.assign(kStateDim, 0.0);
            for (auto& v : dst) ls >> v;
        } else if (tag == "fallback") {
            for (auto& v : fallback) ls >> v;
        } else if (tag == "entry") {
            QKey k{};
            for (auto& v : k) ls >> v;
            std::string word;
            QEntry e;
            ls >> word >> e.reward;
            if (word != "reward") fail("expected 'reward'");
            ls >> word;
            if (word != "action") fail("expected 'action'");
            for (auto& v : e.action.values) ls >> v;
            rows.emplace_back(k, e);
        } else {
            fail("unknown record '" + tag + "'");
        }
        if (ls.fail()) fail("truncated record");
    }
    if (!header) throw ConfigError(path.string() + " is not a carl-qtable-v1 file");
    QTable table(bins, stats, TsAction{fallback});
    for (auto& [k, e] : rows) table.entries_[k] = e;
    return table;
}

std::vector<TsAction> QTableController::decide(int, std::span<const twin::PairObservation> observations) {
    std::vector<TsAction> out;
    out.reserve(observations.size());
    for (const auto& o : observations) out.push_back(table_.act(o.state));
    return out;
}

PolicyController::PolicyController(CascadePolicy policy, NormalizationStats normalization, std::string name)
    : policy_(std::move(policy)), normalization_(std::move(normalization)), name_(std::move(name)) {
    if (!normalization_.complete()) throw ConfigError("policy controller needs normalization stats");
}

std::vector<TsAction> PolicyController::decide(int, std::span<const twin::PairObservation> observations) {
    std::vector<TsAction> out;
    out.reserve(observations.size());
    for (const auto& o : observations) {
        const StateVector s = normalize_state(o.state, normalization_);
        out.push_back(policy_.act(s));
    }
    return out;
}

CascadePolicy make_ddpg_policy(std::uint64_t seed, const PolicyArchitecture& arch) {
    return CascadePolicy::create(1, seed, arch);
}

OnlineCarlController::OnlineCarlController(OnlineCarlConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed), seed_(seed) {
    config_.trainer.validate();
    if (config_.sub_policies == 0) throw ConfigError("online CaRL needs at least one sub-policy");
    if (config_.warmup_epochs < 1) throw ConfigError("online CaRL needs at least one warmup epoch");
    initial_ = CascadePolicy::create(config_.sub_policies, seed, config_.architecture);
}

const CascadePolicy& OnlineCarlController::policy() const { return trainer_ ? trainer_->policy() : initial_; }

std::vector<TsAction> OnlineCarlController::decide(int, std::span<const twin::PairObservation> observations) {
    std::vector<TsAction> out;
    out.reserve(observations.size());
    if (!trainer_) {
        std::uniform_real_distribution<double> u(kActionFloor, 1.0);
        for (std::size_t k = 0; k < observations.size(); ++k) {
            ActionVector a{};
            for (double& v : a) v = u(rng_);
            out.push_back(TsAction{a});
        }
        return out;
    }
    for (const auto& o : observations) {
        out.push_back(trainer_->policy().act(normalize_state(o.state, dataset_.normalization)));
    }
    return out;
}

void OnlineCarlController::observe(std::span<const Transition> transitions) {
    dataset_.transitions.insert(dataset_.transitions.end(), transitions.begin(), transitions.end());
    dataset_.refresh_normalization();
    ++epochs_seen_;
    if (epochs_seen_ < config_.warmup_epochs) return;
    if (!trainer_) {
        trainer_ = std::make_unique<OfflineTrainer>(initial_, CriticPair::create(seed_ + 1, config_.trainer.critic_hidden),
                                                    config_.trainer, seed_ + 2);
    }
    const std::vector<Sample> samples = prepare_samples(dataset_);
    trainer_->run(samples, config_.steps_per_epoch);
}

}  // namespace carl
